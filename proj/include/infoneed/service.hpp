#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "infoneed/corpus.hpp"
#include "infoneed/io.hpp"
#include "infoneed/prediction.hpp"
#include "infoneed/providers.hpp"

namespace httplib {
class Server;
}

namespace infoneed {

struct ServiceOptions {
    PipelineConfig pipeline;
    std::string generator = "offline";  // provider name
    std::string template_text;          // empty = default prompt
    int max_tokens = 64;
    std::size_t snippet_bytes = 200;
    std::string separator = "|";
    /// Logs request text at debug level. Off by default.
    bool log_content = false;
};

struct ApiResponse {
    int status = 200;
    Json body = Json::object();
};

/// Request handling independent of the HTTP layer. All methods are const
/// and safe to call concurrently.
class PredictionService {
  public:
    PredictionService(std::vector<Document> passages, ServiceOptions options, ProviderRegistry providers);

    /// POST /api/predict. Field presence (nonempty after trimming) picks the
    /// variant: context + intent -> ContextIntent; source + intent without
    /// context -> SourceIntent; context alone (source optional) -> Context;
    /// source alone -> Source. Anything else is a 400.
    ApiResponse predict(const Json& request) const;
    ApiResponse predict_body(const std::string& body) const;
    ApiResponse health() const;
    ApiResponse document(const std::string& doc_id) const;

    std::size_t corpus_size() const noexcept { return passages_.size(); }

  private:
    std::vector<Document> passages_;
    std::vector<const Document*> by_id_;
    ServiceOptions options_;
    ProviderRegistry providers_;
    PromptTemplate prompt_;
    std::unique_ptr<RetrievalPipeline> pipeline_;
};

/// Routing rule alone; nullopt means the request is rejected.
std::optional<VariantKind> route_variant(bool has_source, bool has_context, bool has_intent) noexcept;

ApiResponse api_error(int status, std::string code, std::string message);

/// httplib front end: /api/predict, /api/health, /api/document/{id}, CORS,
/// and an optional static directory mounted at /.
class HttpService {
  public:
    explicit HttpService(const PredictionService& service, std::string static_dir = {},
                         std::string cors_origin = "*");
    ~HttpService();

    /// Binds and returns the port (0 picks a free one).
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();
    httplib::Server& server() { return *server_; }

  private:
    const PredictionService& service_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace infoneed
