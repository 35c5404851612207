#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <unordered_map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "infoneed/corpus.hpp"
#include "infoneed/index.hpp"
#include "infoneed/providers.hpp"
#include "infoneed/ranking.hpp"
#include "infoneed/sample.hpp"
#include "infoneed/scorers.hpp"

namespace infoneed {

/// The five experiment inputs, in table order.
enum class VariantKind { Question, ContextIntent, SourceIntent, Context, Source };

inline constexpr VariantKind kAllVariants[] = {VariantKind::Question, VariantKind::ContextIntent,
                                               VariantKind::SourceIntent, VariantKind::Context,
                                               VariantKind::Source};

/// snake_case identifier: question, context_intent, source_intent, context, source.
std::string_view to_string(VariantKind kind) noexcept;
/// Table label: "Question", "Context + Intent", ...
std::string_view display_name(VariantKind kind) noexcept;
/// 1-based position in the experiment list.
int variant_number(VariantKind kind) noexcept;
VariantKind parse_variant(std::string_view name);

struct InputVariant {
    VariantKind kind = VariantKind::Question;
    std::string rendered_text;
    std::optional<std::string> sample_id;
    /// Exactly the sample fields this kind consumed, as (name, value).
    std::vector<std::pair<std::string, std::string>> fields;
};

struct VariantOptions {
    std::string separator = "|";
};

/// Question/Context/Source render the field verbatim; ContextIntent and
/// SourceIntent render "<field> <sep> <intent>".
InputVariant build_variant(const Sample& sample, VariantKind kind, const VariantOptions& options = {});

/// Prompt text with {source} {context} {intent} {question} placeholders.
/// Lines mentioning a placeholder the variant does not provide are dropped.
class PromptTemplate {
  public:
    explicit PromptTemplate(std::string text);
    static PromptTemplate from_file(const std::filesystem::path& path);
    /// Default: labeled Source:/Context:/Intent: lines.
    static PromptTemplate default_generation();

    /// Throws ValidationError if a field the variant uses has no placeholder.
    std::string render(const InputVariant& variant) const;
    const std::string& text() const noexcept { return text_; }

  private:
    std::string text_;
};

struct GenerationOptions {
    int max_tokens = 64;
    double temperature = 0.0;
    std::vector<std::string> stop = {"\n"};
    std::optional<std::uint64_t> seed;
};

/// One question, trailing whitespace stripped. Empty output raises ProviderError.
Generation generate_question(const InputVariant& variant, Provider& provider,
                             const PromptTemplate& prompt, const GenerationOptions& options = {});

struct PipelineConfig {
    ScorerConfig first_stage;
    std::optional<ScorerConfig> reranker;
    /// First-stage depth handed to the reranker; 0 means "pool size".
    std::size_t depth = 100;
    std::vector<Split> pool_splits = {Split::Train, Split::Validation};
};

PipelineConfig pipeline_from_json(const Json& j);
Json pipeline_to_json(const PipelineConfig& c);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// First stage over a fixed candidate pool plus an optional reranker.
/// Immutable after construction apart from the scorers' embedding caches.
class RetrievalPipeline {
  public:
    RetrievalPipeline(std::vector<Document> pool, const PipelineConfig& config,
                      const ProviderRegistry& providers);

    /// Top-k. With a reranker the first stage returns max(depth, k) candidates
    /// and the reranker reorders them; reranker ties keep first-stage order.
    /// A lexical first stage pads with non-matching pool documents in
    /// ascending doc_id order when too few documents match.
    RankedList retrieve(const InputVariant& variant, std::size_t k) const;
    RankedList retrieve_text(const std::string& text, std::size_t k, std::string query_ref = {}) const;

    const std::vector<Document>& pool() const noexcept { return pool_; }
    const Document* find(std::string_view doc_id) const;
    const PipelineConfig& config() const noexcept { return config_; }

  private:
    RankedList first_stage(const std::string& text, std::size_t depth) const;

    std::vector<Document> pool_;
    std::vector<const Document*> pool_ptrs_;
    std::vector<const Document*> by_id_;  // pool sorted by doc_id
    std::unordered_map<std::string, std::size_t> pos_;
    PipelineConfig config_;
    std::shared_ptr<const InvertedIndex> index_;
    std::unique_ptr<Scorer> first_;
    std::unique_ptr<Scorer> rerank_;
};

/// Distinct target_doc_ids of samples in `splits`, ascending.
std::vector<std::string> build_candidate_pool(std::span<const Sample> samples, const std::set<Split>& splits);

/// `query_id Q0 doc_id rank score run_tag`, one line per entry.
std::string format_trec_run(std::span<const RankedList> lists, std::string_view run_tag);
void write_trec_run(const std::filesystem::path& path, std::span<const RankedList> lists,
                    std::string_view run_tag);
/// Lists keyed by query id, entries ordered by rank.
std::map<std::string, RankedList> read_trec_run(const std::filesystem::path& path);

struct GeneratedQuestion {
    std::string sample_id;
    VariantKind variant = VariantKind::ContextIntent;
    std::string generated_question;
    std::string provider;
};

std::string format_generations(std::span<const GeneratedQuestion> rows);
void write_generations(const std::filesystem::path& path, std::span<const GeneratedQuestion> rows);
std::vector<GeneratedQuestion> read_generations(const std::filesystem::path& path);

}  // namespace infoneed
