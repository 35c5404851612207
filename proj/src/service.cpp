#include "infoneed/service.hpp"

#include <algorithm>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "infoneed/error.hpp"
#include "infoneed/text.hpp"

namespace infoneed {

std::optional<VariantKind> route_variant(bool has_source, bool has_context, bool has_intent) noexcept {
    if (has_context) return has_intent ? VariantKind::ContextIntent : VariantKind::Context;
    if (has_source) return has_intent ? VariantKind::SourceIntent : VariantKind::Source;
    return std::nullopt;
}

ApiResponse api_error(int status, std::string code, std::string message) {
    return {status, Json{{"code", std::move(code)}, {"message", std::move(message)}}};
}

PredictionService::PredictionService(std::vector<Document> passages, ServiceOptions options,
                                     ProviderRegistry providers)
    : passages_(std::move(passages)),
      options_(std::move(options)),
      providers_(std::move(providers)),
      prompt_(options_.template_text.empty() ? PromptTemplate::default_generation()
                                             : PromptTemplate(options_.template_text)) {
    if (!providers_.contains(options_.generator))
        throw ValidationError("unknown generator provider '" + options_.generator + "'");
    for (const auto& d : passages_) by_id_.push_back(&d);
    std::sort(by_id_.begin(), by_id_.end(), [](const Document* a, const Document* b) { return a->doc_id < b->doc_id; });
    if (!passages_.empty()) pipeline_ = std::make_unique<RetrievalPipeline>(passages_, options_.pipeline, providers_);
}

namespace {

std::optional<std::string> text_field(const Json& req, const char* name) {
    if (!req.contains(name) || req[name].is_null()) return std::nullopt;
    if (!req[name].is_string()) throw ValidationError(std::string("field '") + name + "' must be a string");
    auto s = req[name].get<std::string>();
    if (trim(s).empty()) return std::nullopt;
    return s;
}

std::size_t count_field(const Json& req, const char* name, std::size_t def) {
    if (!req.contains(name)) return def;
    if (!req[name].is_number_integer() || req[name].get<long long>() < 1)
        throw ValidationError(std::string("field '") + name + "' must be an integer >= 1");
    return req[name].get<std::size_t>();
}

}  // namespace

ApiResponse PredictionService::predict(const Json& req) const {
    const auto start = std::chrono::steady_clock::now();
    if (!req.is_object()) return api_error(400, "invalid_request", "request body must be a JSON object");

    Sample s;
    bool want_questions = true;
    bool want_passages = true;
    std::size_t k = 10;
    std::size_t n_questions = 3;
    std::optional<VariantKind> variant;
    try {
        const auto source = text_field(req, "source");
        const auto context = text_field(req, "context");
        const auto intent = text_field(req, "intent");
        variant = route_variant(source.has_value(), context.has_value(), intent.has_value());
        if (!variant) return api_error(400, "missing_context", "context or source must be nonempty");
        s.source = source.value_or("");
        s.context = context.value_or("");
        s.intent = intent;
        k = count_field(req, "k", k);
        n_questions = count_field(req, "n_questions", n_questions);
        if (req.contains("modes")) {
            if (!req["modes"].is_array()) throw ValidationError("field 'modes' must be a list");
            want_questions = want_passages = false;
            for (const auto& m : req["modes"]) {
                const auto name = m.is_string() ? m.get<std::string>() : std::string();
                if (name == "questions") want_questions = true;
                else if (name == "passages") want_passages = true;
                else throw ValidationError("unknown mode '" + m.dump() + "'");
            }
            if (!want_questions && !want_passages) throw ValidationError("field 'modes' is empty");
        }
    } catch (const ValidationError& e) {
        return api_error(400, "invalid_request", e.what());
    }
    if (options_.log_content) spdlog::debug("predict request: {}", req.dump());

    const auto input = build_variant(s, *variant, {options_.separator});
    Json response;
    response["variant_used"] = std::string(to_string(*variant));
    response["questions"] = Json::array();
    response["passages"] = Json::array();
    try {
        if (want_questions) {
            auto provider = providers_.get(options_.generator);
            std::vector<std::string> seen;
            for (std::size_t i = 0; i < n_questions; ++i) {
                GenerationOptions go;
                go.max_tokens = options_.max_tokens;
                go.seed = i;
                const auto g = generate_question(input, *provider, prompt_, go);
                if (std::find(seen.begin(), seen.end(), g.text) != seen.end()) continue;
                seen.push_back(g.text);
                response["questions"].push_back({{"text", g.text}, {"provider", g.provider}});
            }
        }
        if (want_passages) {
            if (!pipeline_) return api_error(503, "corpus_unavailable", "no corpus loaded");
            const auto list = pipeline_->retrieve(input, k);
            std::size_t rank = 1;
            for (const auto& e : list.entries) {
                const auto* doc = pipeline_->find(e.doc_id);
                response["passages"].push_back({{"doc_id", e.doc_id},
                                                {"snippet", truncate_utf8(doc->text, options_.snippet_bytes)},
                                                {"score", e.score},
                                                {"rank", rank++}});
            }
        }
    } catch (const ProviderError& e) {
        return api_error(503, "provider_unavailable", e.what());
    }
    response["latency_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - start)
                                 .count();
    return {200, response};
}

ApiResponse PredictionService::predict_body(const std::string& body) const {
    Json req;
    try {
        req = Json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        return api_error(400, "invalid_json", e.what());
    }
    return predict(req);
}

ApiResponse PredictionService::health() const {
    Json providers = Json::array();
    for (const auto& [name, p] : providers_.all()) {
        bool up = false;
        try {
            up = p->reachable();
        } catch (const std::exception&) {
            up = false;
        }
        providers.push_back({{"name", name}, {"offline", p->offline()}, {"reachable", up}});
    }
    return {200, Json{{"status", "ok"}, {"corpus_docs", passages_.size()}, {"providers", providers}}};
}

ApiResponse PredictionService::document(const std::string& doc_id) const {
    const auto it = std::lower_bound(by_id_.begin(), by_id_.end(), doc_id,
                                     [](const Document* d, const std::string& id) { return d->doc_id < id; });
    if (it == by_id_.end() || (*it)->doc_id != doc_id) return api_error(404, "not_found", "unknown document '" + doc_id + "'");
    Json j{{"doc_id", (*it)->doc_id}, {"text", (*it)->text}};
    if ((*it)->title) j["title"] = *(*it)->title;
    return {200, j};
}

HttpService::HttpService(const PredictionService& service, std::string static_dir, std::string cors_origin)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
    auto& srv = *server_;
    auto reply = [](httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    // small JSON replies on keep-alive connections otherwise stall on delayed ACKs
    srv.set_tcp_nodelay(true);
    srv.set_default_headers({{"Access-Control-Allow-Origin", cors_origin},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type, Authorization"}});
    srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    srv.Post("/api/predict", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, service_.predict_body(req.body));
    });
    srv.Get("/api/health", [this, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, service_.health());
    });
    // req.path is already percent-decoded by the server.
    srv.Get(R"(/api/document/(.+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, service_.document(req.matches[1].str()));
    });
    srv.set_exception_handler([reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        reply(res, api_error(500, "internal", what));
    });
    if (!static_dir.empty() && !srv.set_mount_point("/", static_dir))
        throw IoError("static directory not found: " + static_dir);
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = server_->bind_to_any_port(host);
        if (p < 0) throw IoError("could not bind " + host);
        return p;
    }
    if (!server_->bind_to_port(host, port)) throw IoError("could not bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpService::listen() { server_->listen_after_bind(); }

void HttpService::stop() {
    if (server_) server_->stop();
}

}  // namespace infoneed
