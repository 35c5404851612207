#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "infoneed/error.hpp"
#include "infoneed/providers.hpp"

namespace infoneed {
namespace {

// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
std::pair<std::string, std::string> split_base_url(const std::string& url) {
    const auto scheme = url.find("://");
    const auto start = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = url.find('/', start);
    if (slash == std::string::npos) return {url, ""};
    std::string prefix = url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, slash), prefix};
}

class SlotGuard {
  public:
    explicit SlotGuard(std::counting_semaphore<1024>& s) : s_(s) { s_.acquire(); }
    ~SlotGuard() { s_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

  private:
    std::counting_semaphore<1024>& s_;
};

}  // namespace

HttpProvider::HttpProvider(EndpointConfig config)
    : config_(std::move(config)), slots_(config_.parallelism) {
    std::tie(origin_, path_prefix_) = split_base_url(config_.base_url);
}

HttpProvider::~HttpProvider() = default;

Json HttpProvider::post(const std::string& path, const Json& body) {
    SlotGuard slot(slots_);
    const std::string payload = body.dump();
    const std::string full_path = path_prefix_ + path;

    httplib::Headers headers;
    if (!config_.auth_header_env.empty()) {
        if (const char* token = std::getenv(config_.auth_header_env.c_str())) {
            headers.emplace("Authorization", token);
        }
    }

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto delay = static_cast<long>(config_.backoff_ms * std::pow(2.0, attempt - 1));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        httplib::Client client(origin_);
        const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        const auto started = std::chrono::steady_clock::now();
        auto res = client.Post(full_path, headers, payload, "application/json");
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
        if (!res) {
            last_error = httplib::to_string(res.error());
            spdlog::debug("{} POST {} attempt {} failed after {} ms: {}", config_.name, full_path,
                          attempt + 1, ms, last_error);
            continue;
        }
        spdlog::debug("{} POST {} -> {} in {} ms ({} request bytes, {} response bytes)", config_.name,
                      full_path, res->status, ms, payload.size(), res->body.size());
        if (res->status < 200 || res->status >= 300) {
            throw ProviderError(config_.name + ": HTTP " + std::to_string(res->status) + " from " +
                                    full_path + ": " + res->body.substr(0, 200),
                                false);
        }
        try {
            return Json::parse(res->body);
        } catch (const nlohmann::json::parse_error&) {
            throw ProviderError(config_.name + ": response is not JSON: " + res->body.substr(0, 200), false);
        }
    }
    throw ProviderError(config_.name + ": " + full_path + " unreachable after " +
                            std::to_string(config_.max_retries + 1) + " attempt(s): " + last_error,
                        true);
}

Generation HttpProvider::generate(const GenerationRequest& request) {
    if (request.max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
    Json body{{"prompt", request.prompt},
              {"max_tokens", request.max_tokens},
              {"temperature", request.temperature},
              {"stop", request.stop}};
    if (request.seed) body["seed"] = *request.seed;
    if (!config_.model.empty()) body["model"] = config_.model;
    const Json reply = post("/v1/generate", body);
    if (!reply.contains("text") || !reply["text"].is_string())
        throw ProviderError(config_.name + ": generate reply lacks 'text'", false);
    std::string text = apply_stop_sequences(reply["text"].get<std::string>(), request.stop);
    if (text.empty()) throw ProviderError(config_.name + ": empty generation", false);
    return {std::move(text), config_.name};
}

std::vector<EmbeddingVector> HttpProvider::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw ValidationError("embed: no texts");
    Json body{{"texts", texts}};
    if (!config_.model.empty()) body["model"] = config_.model;
    const Json reply = post("/v1/embed", body);
    if (!reply.contains("vectors") || !reply["vectors"].is_array())
        throw ProviderError(config_.name + ": embed reply lacks 'vectors'", false);
    const auto& vectors = reply["vectors"];
    if (vectors.size() != texts.size())
        throw ProviderError(config_.name + ": embed returned " + std::to_string(vectors.size()) +
                                " vectors for " + std::to_string(texts.size()) + " texts",
                            false);
    std::vector<EmbeddingVector> out;
    for (const auto& v : vectors) {
        EmbeddingVector e;
        for (const auto& x : v) {
            const double d = x.get<double>();
            if (!std::isfinite(d)) throw ProviderError(config_.name + ": non-finite embedding value", false);
            e.values.push_back(d);
        }
        if (e.values.empty()) throw ProviderError(config_.name + ": empty embedding vector", false);
        if (!out.empty() && e.dimension() != out.front().dimension())
            throw ProviderError(config_.name + ": embedding dimension mismatch within batch", false);
        out.push_back(std::move(e));
    }
    return out;
}

double HttpProvider::score_pair(std::string_view input_text, std::string_view candidate_text) {
    Json body{{"a", input_text}, {"b", candidate_text}};
    if (!config_.model.empty()) body["model"] = config_.model;
    const Json reply = post("/v1/score", body);
    if (!reply.contains("score") || !reply["score"].is_number())
        throw ProviderError(config_.name + ": score reply lacks numeric 'score'", false);
    double s = reply["score"].get<double>();
    if (!std::isfinite(s)) throw ProviderError(config_.name + ": non-finite score", false);
    if (s < 0.0 || s > 1.0) {
        ++clamped_;
        spdlog::warn("{}: score {} outside [0,1], clamped", config_.name, s);
        s = std::clamp(s, 0.0, 1.0);
    }
    return s;
}

bool HttpProvider::reachable() {
    httplib::Client client(origin_);
    const auto timeout = std::chrono::milliseconds(std::min(config_.timeout_ms, 2000));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    // Any HTTP reply counts; only transport failure means unreachable.
    return static_cast<bool>(client.Get(path_prefix_ + "/v1/health"));
}

}  // namespace infoneed
