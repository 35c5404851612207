#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "infoneed/corpus.hpp"
#include "infoneed/error.hpp"
#include "infoneed/index.hpp"
#include "infoneed/prediction.hpp"
#include "infoneed/providers.hpp"
#include "infoneed/sample.hpp"

namespace infoneed {

/// No non-answering passage matched the query; the sample is dropped.
class SampleSkipped : public Error {
  public:
    using Error::Error;
};

/// A reformulator produced an empty or unparseable context/intent.
class ReformulationRejected : public Error {
  public:
    using Error::Error;
};

struct SourceSimulation {
    std::string source_doc_id;
    RankedList candidates;  // the exclusion-filtered top-k
};

/// Best-matching passage for the query text among passages not judged
/// relevant. Throws SampleSkipped when none matches.
SourceSimulation simulate_source(const InvertedIndex& index, const Query& query,
                                 std::span<const Judgment> judgments, std::size_t k);

struct Reformulation {
    std::string context;
    std::string intent;
    /// Empty when the output looks sound; otherwise why it deserves review.
    std::string flag_reason;
};

/// Splits a question into what it is about (context) and what it asks
/// (intent). Implementations must be safe for concurrent use.
class Reformulator {
  public:
    virtual ~Reformulator() = default;
    virtual std::string name() const = 0;
    virtual std::string model_id() const { return {}; }
    virtual bool low_fidelity() const { return false; }

    virtual Reformulation reformulate(const std::string& question) = 0;
    /// Intent only, for datasets whose context span is given.
    virtual Reformulation extract_intent(const std::string& question, const std::string& context) = 0;
};

/// Deterministic local rules: the interrogative group ("when do", "how
/// many") becomes the intent and the remaining content words the context.
class RuleBasedReformulator final : public Reformulator {
  public:
    std::string name() const override { return "rule-based"; }
    bool low_fidelity() const override { return true; }
    Reformulation reformulate(const std::string& question) override;
    Reformulation extract_intent(const std::string& question, const std::string& context) override;
};

/// Prompts a generation provider. Split prompts must make the model answer
/// with "Context: ..." and "Intent: ..." lines; intent prompts answer with
/// the intent on the first line. Placeholders: {question} {context}.
class ProviderReformulator final : public Reformulator {
  public:
    ProviderReformulator(std::shared_ptr<Provider> provider, std::string split_prompt = default_split_prompt(),
                         std::string intent_prompt = default_intent_prompt());

    std::string name() const override { return "llm"; }
    std::string model_id() const override;
    Reformulation reformulate(const std::string& question) override;
    Reformulation extract_intent(const std::string& question, const std::string& context) override;

    static std::string default_split_prompt();
    static std::string default_intent_prompt();

  private:
    std::shared_ptr<Provider> provider_;
    std::string split_prompt_;
    std::string intent_prompt_;
};

/// Provider failures propagate (retryable); empty outputs raise
/// ReformulationRejected.
Reformulation reformulate(const std::string& question, Reformulator& reformulator);

struct AuditEntry {
    std::string sample_id;
    std::string question;
    std::string context;
    std::string intent;
    std::string flag_reason;
};

struct SkippedSample {
    std::string id;
    std::string reason;
};

struct AdaptationResult {
    std::vector<Sample> samples;  // sorted by sample_id
    std::vector<AuditEntry> audit;
    std::vector<SkippedSample> skipped;
};

struct MarcoOptions {
    std::size_t max_queries = 10000;
    std::uint64_t seed = 13;
    std::size_t source_depth = 100;
    SplitRatios ratios;
    std::size_t parallelism = 1;
    /// Candidate ids kept in each sample's metadata.
    std::size_t recorded_candidates = 10;
};

/// Retrieval-collection adaptation: question = query, target = its
/// best-graded relevant passage, source = simulated non-answering passage,
/// context/intent from the reformulator; seeded split assignment.
AdaptationResult adapt_marco(const Corpus& corpus, const InvertedIndex& index, Reformulator& reformulator,
                             const MarcoOptions& options = {});

struct InquisitiveRecord {
    std::string id;  // optional; derived from article/sentence when empty
    std::string article_id;
    std::string sentence_id;
    std::string sentence;
    std::string span;
    std::string question;
    std::string split;  // original label, preserved verbatim in metadata
};

/// JSONL rows {id?, article_id, sentence_id, sentence, span, question, split}.
std::vector<InquisitiveRecord> load_inquisitive(const std::filesystem::path& path);

/// source = sentence, context = span, question verbatim, no target, intent
/// from the reformulator.
AdaptationResult adapt_inquisitive(std::span<const InquisitiveRecord> records, Reformulator& reformulator,
                                   std::size_t parallelism = 1);

struct PairOptions {
    std::size_t negatives_per_positive = 10;
    std::uint64_t seed = 13;
    VariantKind variant = VariantKind::ContextIntent;
    VariantOptions variant_options;
};

/// One positive per sample with a target plus exactly
/// `negatives_per_positive` negatives drawn uniformly without replacement
/// from the other distinct targets of the same split.
std::vector<TrainingPair> assemble_pairs(std::span<const Sample> samples, const PairOptions& options = {});

void write_audit(const std::filesystem::path& path, std::span<const AuditEntry> audit);

}  // namespace infoneed
