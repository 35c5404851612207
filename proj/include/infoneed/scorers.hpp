#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "infoneed/corpus.hpp"
#include "infoneed/index.hpp"
#include "infoneed/providers.hpp"
#include "infoneed/sample.hpp"

namespace infoneed {

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

struct LossSpec {
    double margin = 0.5;
};

/// Positive: 1 - cos(a, b). Negative: max(0, cos(a, b) - margin).
double cosine_embedding_loss(const EmbeddingVector& a, const EmbeddingVector& b, PairLabel label,
                             const LossSpec& spec = {});

/// (predicted - y)^2 with y = 1 for positive, 0 for negative.
double mse_label_loss(double predicted, PairLabel label) noexcept;

enum class ExportFormat { Jsonl, Tsv };

ExportFormat parse_export_format(std::string_view name);

/// Writes one row per pair: {sample_id, input_text, target_doc_id,
/// target_text, label} with label 1/0. Returns the row count.
std::size_t export_training_pairs(std::span<const TrainingPair> pairs, const Corpus& corpus,
                                  ExportFormat format, const std::filesystem::path& out);

enum class ScorerKind { Lexical, Embedding, Cross };

std::string_view to_string(ScorerKind kind) noexcept;
ScorerKind parse_scorer_kind(std::string_view name);

struct ScorerConfig {
    ScorerKind kind = ScorerKind::Lexical;
    std::string provider = "offline";  // Embedding and Cross
    Bm25Params bm25;                   // Lexical
};

struct ScoreDetail {
    double score = 0.0;  // in [0, 1] for Embedding and Cross
    double raw = 0.0;    // raw cosine for Embedding, same as score otherwise
};

/// Scores (input, candidate) pairs with one of the three families:
///   Lexical   - BM25 against the bound index
///   Embedding - (cos(embed(input), embed(doc)) + 1) / 2
///   Cross     - provider pair score
/// Document embeddings are cached by doc_id; the cache is internally
/// synchronized.
class Scorer {
  public:
    Scorer(ScorerKind kind, std::shared_ptr<Provider> provider,
           std::shared_ptr<const InvertedIndex> index);

    ScorerKind kind() const noexcept { return kind_; }

    ScoreDetail score(const std::string& input_text, const Document& doc) const;
    /// Batch form; results parallel to `docs`. Same values as per-doc scoring.
    std::vector<ScoreDetail> score_all(const std::string& input_text,
                                       std::span<const Document* const> docs) const;

    /// Embeds and caches every document up front (Embedding kind only).
    void warm(std::span<const Document* const> docs) const;

  private:
    const EmbeddingVector& doc_embedding(const Document& doc) const;

    ScorerKind kind_;
    std::shared_ptr<Provider> provider_;
    std::shared_ptr<const InvertedIndex> index_;
    mutable std::mutex cache_mutex_;
    mutable std::unordered_map<std::string, EmbeddingVector> cache_;
};

}  // namespace infoneed
