#include "infoneed/providers.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <spdlog/spdlog.h>

#include "infoneed/error.hpp"
#include "infoneed/hash.hpp"
#include "infoneed/text.hpp"

namespace infoneed {

std::string apply_stop_sequences(std::string_view text, const std::vector<std::string>& stop) {
    std::size_t cut = text.size();
    for (const auto& s : stop) {
        if (s.empty()) continue;
        const auto pos = text.find(s);
        if (pos != std::string_view::npos) cut = std::min(cut, pos);
    }
    std::string out(text.substr(0, cut));
    while (!out.empty() && (out.back() == ' ' || out.back() == '\n' || out.back() == '\t' || out.back() == '\r'))
        out.pop_back();
    return out;
}

EndpointConfig endpoint_from_json(const Json& j) {
    EndpointConfig c;
    c.name = j.value("name", c.name);
    c.kind = j.value("kind", j.contains("base_url") ? std::string("http") : c.kind);
    c.base_url = j.value("base_url", c.base_url);
    c.model = j.value("model", c.model);
    c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
    c.parallelism = j.value("parallelism", c.parallelism);
    c.auth_header_env = j.value("auth_header_env", c.auth_header_env);
    c.fallback = j.value("fallback", c.fallback);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    if (c.kind != "http" && c.kind != "offline")
        throw ValidationError("provider '" + c.name + "': unknown kind '" + c.kind + "'");
    if (c.kind == "http" && c.base_url.empty())
        throw ValidationError("provider '" + c.name + "': http provider needs base_url");
    if (c.parallelism < 1 || c.parallelism > 1024)
        throw ValidationError("provider '" + c.name + "': parallelism must be in [1, 1024]");
    if (c.max_retries < 0) throw ValidationError("provider '" + c.name + "': max_retries < 0");
    if (c.embedding_dim < 1) throw ValidationError("provider '" + c.name + "': embedding_dim < 1");
    return c;
}

Json endpoint_to_json(const EndpointConfig& c) {
    return Json{{"name", c.name},
                {"kind", c.kind},
                {"base_url", c.base_url},
                {"model", c.model},
                {"timeout_ms", c.timeout_ms},
                {"max_retries", c.max_retries},
                {"backoff_ms", c.backoff_ms},
                {"parallelism", c.parallelism},
                {"auth_header_env", c.auth_header_env},
                {"fallback", c.fallback},
                {"embedding_dim", c.embedding_dim}};
}

std::vector<EndpointConfig> load_provider_config(const std::filesystem::path& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    std::vector<EndpointConfig> out;
    if (j.contains("providers")) {
        for (const auto& p : j.at("providers")) out.push_back(endpoint_from_json(p));
    } else {
        out.push_back(endpoint_from_json(j));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Offline fallback

OfflineProvider::OfflineProvider(std::size_t dimension, std::string name)
    : dimension_(dimension), name_(std::move(name)) {
    if (dimension_ == 0) throw ValidationError("embedding dimension must be > 0");
}

namespace {

struct PromptFields {
    std::string source;
    std::string context;
    std::string intent;
};

bool starts_with_label(std::string_view line, std::string_view label, std::string& value) {
    if (line.size() < label.size()) return false;
    for (std::size_t i = 0; i < label.size(); ++i) {
        const char c = line[i];
        const char lower = (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c;
        if (lower != label[i]) return false;
    }
    value = trim(line.substr(label.size()));
    return true;
}

PromptFields parse_prompt_fields(std::string_view prompt) {
    PromptFields f;
    for (const auto part : split(prompt, '\n')) {
        const std::string line = trim(part);
        std::string value;
        if (starts_with_label(line, "source:", value)) f.source = value;
        else if (starts_with_label(line, "context:", value)) f.context = value;
        else if (starts_with_label(line, "intent:", value)) f.intent = value;
    }
    return f;
}

std::string leading_words(std::string_view text, std::size_t n) {
    const auto words = split_whitespace(text);
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < words.size() && i < n; ++i) kept.emplace_back(words[i]);
    return join(kept, " ");
}

std::string strip_terminal_punct(std::string s) {
    while (!s.empty() && (s.back() == '?' || s.back() == '.' || s.back() == '!' || s.back() == ','))
        s.pop_back();
    return s;
}

std::string fill_question(const PromptFields& f, std::uint64_t variant) {
    const std::string topic =
        strip_terminal_punct(!f.context.empty() ? f.context : leading_words(f.source, 12));
    const std::string intent = strip_terminal_punct(f.intent);
    std::vector<std::string> options;
    if (!intent.empty() && !topic.empty()) {
        const auto first = tokenize(intent);
        if (!first.empty() && is_wh_word(first.front())) {
            options = {intent + " " + topic + "?", intent + " " + topic + " actually?",
                       "about " + topic + ", " + intent + "?"};
        } else {
            options = {"what is the " + intent + " of " + topic + "?",
                       "how is " + topic + " related to " + intent + "?",
                       "what " + intent + " does " + topic + " have?"};
        }
    } else if (!topic.empty()) {
        options = {"what is " + topic + "?", "what does " + topic + " mean?",
                   "why is " + topic + " important?"};
    } else if (!intent.empty()) {
        options = {intent + "?"};
    }
    if (options.empty()) return {};
    return options[variant % options.size()];
}

}  // namespace

Generation OfflineProvider::generate(const GenerationRequest& request) {
    if (request.max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
    const auto fields = parse_prompt_fields(request.prompt);
    std::string text = fill_question(fields, request.seed.value_or(0));
    if (text.empty()) {
        // Unlabeled prompt: echo its last nonempty line as a question.
        std::string last;
        for (const auto line : split(request.prompt, '\n'))
            if (!trim(line).empty()) last = trim(line);
        last = strip_terminal_punct(last);
        if (!last.empty()) text = last + "?";
    }
    const auto words = split_whitespace(text);
    if (words.size() > static_cast<std::size_t>(request.max_tokens)) {
        text = leading_words(text, static_cast<std::size_t>(request.max_tokens));
    }
    text = apply_stop_sequences(text, request.stop);
    if (text.empty()) throw ProviderError("offline provider: prompt yields no question", false);
    return {text, name_};
}

std::vector<EmbeddingVector> OfflineProvider::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw ValidationError("embed: no texts");
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        EmbeddingVector v;
        v.values.assign(dimension_, 0.0);
        for (const auto& token : tokenize(text)) v.values[fnv1a64(token) % dimension_] += 1.0;
        double norm = 0.0;
        for (const double x : v.values) norm += x * x;
        if (norm > 0) {
            norm = std::sqrt(norm);
            for (double& x : v.values) x /= norm;
        }
        out.push_back(std::move(v));
    }
    return out;
}

double OfflineProvider::score_pair(std::string_view input_text, std::string_view candidate_text) {
    const auto a = tokenize(input_text);
    const auto b = tokenize(candidate_text);
    const std::set<std::string> sa(a.begin(), a.end());
    const std::set<std::string> sb(b.begin(), b.end());
    std::size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    const std::size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Fallback wrapper

FallbackProvider::FallbackProvider(std::shared_ptr<Provider> primary, std::shared_ptr<Provider> fallback)
    : primary_(std::move(primary)), fallback_(std::move(fallback)) {
    if (!primary_ || !fallback_) throw ValidationError("fallback provider needs two providers");
}

Generation FallbackProvider::generate(const GenerationRequest& request) {
    try {
        return primary_->generate(request);
    } catch (const ProviderError& e) {
        spdlog::warn("provider {}: {}; answering from {}", primary_->name(), e.what(), fallback_->name());
        ++fallbacks_;
        return fallback_->generate(request);
    }
}

std::vector<EmbeddingVector> FallbackProvider::embed(const std::vector<std::string>& texts) {
    try {
        return primary_->embed(texts);
    } catch (const ProviderError& e) {
        spdlog::warn("provider {}: {}; answering from {}", primary_->name(), e.what(), fallback_->name());
        ++fallbacks_;
        return fallback_->embed(texts);
    }
}

double FallbackProvider::score_pair(std::string_view input_text, std::string_view candidate_text) {
    try {
        return primary_->score_pair(input_text, candidate_text);
    } catch (const ProviderError& e) {
        spdlog::warn("provider {}: {}; answering from {}", primary_->name(), e.what(), fallback_->name());
        ++fallbacks_;
        return fallback_->score_pair(input_text, candidate_text);
    }
}

std::shared_ptr<Provider> make_provider(const EndpointConfig& config) {
    if (config.kind == "offline")
        return std::make_shared<OfflineProvider>(static_cast<std::size_t>(config.embedding_dim), config.name);
    auto http = std::make_shared<HttpProvider>(config);
    if (!config.fallback) return http;
    return std::make_shared<FallbackProvider>(
        http, std::make_shared<OfflineProvider>(static_cast<std::size_t>(config.embedding_dim), "offline"));
}

ProviderRegistry::ProviderRegistry() { providers_.emplace("offline", std::make_shared<OfflineProvider>()); }

ProviderRegistry::ProviderRegistry(const std::vector<EndpointConfig>& configs) : ProviderRegistry() {
    for (const auto& c : configs) add(c);
}

void ProviderRegistry::add(const EndpointConfig& config) { add(config.name, make_provider(config)); }

void ProviderRegistry::add(std::string name, std::shared_ptr<Provider> provider) {
    providers_[std::move(name)] = std::move(provider);
}

std::shared_ptr<Provider> ProviderRegistry::get(const std::string& name) const {
    const auto it = providers_.find(name);
    if (it == providers_.end()) throw ValidationError("unknown provider '" + name + "'");
    return it->second;
}

}  // namespace infoneed
