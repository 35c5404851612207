#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "infoneed/io.hpp"

namespace infoneed {

struct GenerationRequest {
    std::string prompt;
    int max_tokens = 64;
    double temperature = 0.0;
    std::vector<std::string> stop;
    /// Candidate selector; providers that sample should seed with it.
    std::optional<std::uint64_t> seed;
};

struct Generation {
    std::string text;
    std::string provider;  // name of the provider that actually answered
};

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dimension() const noexcept { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

/// How to reach one inference service. `kind` is "http" or "offline".
struct EndpointConfig {
    std::string name = "offline";
    std::string kind = "offline";
    std::string base_url;
    std::string model;
    int timeout_ms = 10000;
    int max_retries = 3;
    int backoff_ms = 100;
    int parallelism = 4;
    /// Name of the environment variable holding the Authorization header value.
    std::string auth_header_env;
    /// Answer from the offline fallback when the endpoint fails.
    bool fallback = false;
    int embedding_dim = 256;
};

EndpointConfig endpoint_from_json(const Json& j);
Json endpoint_to_json(const EndpointConfig& c);
/// Accepts either a single endpoint object or {"providers": [...]}.
std::vector<EndpointConfig> load_provider_config(const std::filesystem::path& path);

/// Uniform client for generation, embedding and pair scoring.
/// Implementations must be safe for concurrent use.
class Provider {
  public:
    virtual ~Provider() = default;

    virtual std::string name() const = 0;
    virtual std::string model_id() const { return {}; }
    virtual bool offline() const { return false; }

    /// Nonempty text, already cut at the first stop sequence.
    virtual Generation generate(const GenerationRequest& request) = 0;
    /// One vector per text, uniform dimension.
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
    /// Relevance in [0, 1].
    virtual double score_pair(std::string_view input_text, std::string_view candidate_text) = 0;
    virtual bool reachable() { return true; }
};

/// Deterministic, network-free implementations:
///   generate   - fills a question template from the labeled Source:/Context:/
///                Intent: lines of the prompt; `seed` picks the phrasing
///   embed      - L2-normalized hashed bag of words
///   score_pair - Jaccard overlap of token sets
class OfflineProvider final : public Provider {
  public:
    explicit OfflineProvider(std::size_t dimension = 256, std::string name = "offline");

    std::string name() const override { return name_; }
    bool offline() const override { return true; }
    Generation generate(const GenerationRequest& request) override;
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    double score_pair(std::string_view input_text, std::string_view candidate_text) override;

    std::size_t dimension() const noexcept { return dimension_; }

  private:
    std::size_t dimension_;
    std::string name_;
};

/// JSON-over-HTTP client:
///   POST {base}/v1/generate {prompt, max_tokens, temperature, stop[], seed?} -> {text}
///   POST {base}/v1/embed    {texts[]}                                       -> {vectors[[]]}
///   POST {base}/v1/score    {a, b}                                          -> {score}
/// Transport failures retry with exponential backoff; non-2xx replies fail
/// immediately with an excerpt of the body.
class HttpProvider final : public Provider {
  public:
    explicit HttpProvider(EndpointConfig config);
    ~HttpProvider() override;

    std::string name() const override { return config_.name; }
    std::string model_id() const override { return config_.model; }
    Generation generate(const GenerationRequest& request) override;
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    double score_pair(std::string_view input_text, std::string_view candidate_text) override;
    bool reachable() override;

    /// Scores outside [0, 1] seen so far (they are clamped).
    std::uint64_t clamped_scores() const noexcept { return clamped_.load(); }

  private:
    Json post(const std::string& path, const Json& body);

    EndpointConfig config_;
    std::string origin_;
    std::string path_prefix_;
    std::counting_semaphore<1024> slots_;
    std::atomic<std::uint64_t> clamped_{0};
};

/// Tries `primary`, answers from `fallback` when it raises ProviderError.
class FallbackProvider final : public Provider {
  public:
    FallbackProvider(std::shared_ptr<Provider> primary, std::shared_ptr<Provider> fallback);

    std::string name() const override { return primary_->name(); }
    std::string model_id() const override { return primary_->model_id(); }
    Generation generate(const GenerationRequest& request) override;
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    double score_pair(std::string_view input_text, std::string_view candidate_text) override;
    bool reachable() override { return primary_->reachable(); }

    std::uint64_t fallbacks_used() const noexcept { return fallbacks_.load(); }

  private:
    std::shared_ptr<Provider> primary_;
    std::shared_ptr<Provider> fallback_;
    std::atomic<std::uint64_t> fallbacks_{0};
};

std::shared_ptr<Provider> make_provider(const EndpointConfig& config);

/// Named providers; "offline" is always present.
class ProviderRegistry {
  public:
    ProviderRegistry();
    explicit ProviderRegistry(const std::vector<EndpointConfig>& configs);

    void add(const EndpointConfig& config);
    void add(std::string name, std::shared_ptr<Provider> provider);
    std::shared_ptr<Provider> get(const std::string& name) const;
    bool contains(const std::string& name) const { return providers_.contains(name); }
    const std::map<std::string, std::shared_ptr<Provider>>& all() const noexcept { return providers_; }

  private:
    std::map<std::string, std::shared_ptr<Provider>> providers_;
};

/// Cuts `text` at the earliest stop sequence and strips trailing whitespace.
std::string apply_stop_sequences(std::string_view text, const std::vector<std::string>& stop);

}  // namespace infoneed
