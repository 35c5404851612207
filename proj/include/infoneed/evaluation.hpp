#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "infoneed/io.hpp"
#include "infoneed/ranking.hpp"
#include "infoneed/stats.hpp"
#include "infoneed/text.hpp"

namespace infoneed {

enum class BleuSmoothing { None, AddEpsilon };
inline constexpr double kBleuEpsilon = 1e-9;

/// Sentence BLEU against one reference:
///   BP * exp(mean_{i<=n} ln p_i),  BP = min(1, exp(1 - r / c))
/// with p_i the clipped i-gram precision. Unsmoothed, any p_i = 0 gives 0;
/// AddEpsilon adds 1e-9 to each p_i numerator and denominator.
/// An empty hypothesis scores 0.
double bleu_n(const TokenStream& hypothesis, const TokenStream& reference, int n,
              BleuSmoothing smoothing = BleuSmoothing::None);

/// Corpus BLEU: clipped counts and lengths summed over all pairs first.
double corpus_bleu(std::span<const std::pair<TokenStream, TokenStream>> pairs, int n,
                   BleuSmoothing smoothing = BleuSmoothing::None);

enum class RougeMode { F1, Recall };

/// n-gram overlap (clipped counts). F1 = 2PR / (P + R), 0 when P + R = 0.
double rouge_n(const TokenStream& hypothesis, const TokenStream& reference, int n,
               RougeMode mode = RougeMode::F1);
/// Token LCS by dynamic programming.
std::size_t lcs_length(const TokenStream& a, const TokenStream& b);
double rouge_l(const TokenStream& hypothesis, const TokenStream& reference, RougeMode mode = RougeMode::F1);

/// 1-based rank of the target, 0 if absent.
std::size_t rank_of(const RankedList& ranked, std::string_view target);
/// Best rank over a set of relevant ids, 0 if none present.
std::size_t rank_of(const RankedList& ranked, const std::set<std::string>& targets);

double recall_at_k(const RankedList& ranked, std::string_view target, std::size_t k);
double mrr(const RankedList& ranked, std::string_view target, std::size_t cutoff);
double recall_at_k(const RankedList& ranked, const std::set<std::string>& targets, std::size_t k);
double mrr(const RankedList& ranked, const std::set<std::string>& targets, std::size_t cutoff);

enum class Task { Generation, Retrieval };
std::string_view to_string(Task task) noexcept;
Task parse_task(std::string_view name);

struct SignificanceRow {
    std::string metric;
    std::string other_run_tag;
    double t = 0.0;
    double p = 1.0;
    bool degenerate_variance = false;

    bool operator==(const SignificanceRow&) const = default;
};

/// Per-run metrics. aggregate[m] is the arithmetic mean of per_sample[*][m]
/// for every per-sample metric; extra corpus-level entries are prefixed
/// "corpus_".
struct MetricReport {
    std::string run_tag;
    Task task = Task::Generation;
    Json settings = Json::object();
    std::map<std::string, std::map<std::string, double>> per_sample;
    std::map<std::string, double> aggregate;
    std::vector<SignificanceRow> significance;

    bool operator==(const MetricReport&) const = default;
};

struct GenerationEvalRecord {
    std::string sample_id;
    std::string hypothesis;
    std::string reference;
};

enum class BleuMode { Sentence, Corpus };

struct GenerationEvalOptions {
    BleuMode bleu_mode = BleuMode::Sentence;
    BleuSmoothing smoothing = BleuSmoothing::None;
    RougeMode rouge_mode = RougeMode::F1;
};

/// Metric names compared by significance tests for a task:
/// ROUGE-1/2/L for generation, MRR@cutoff for retrieval.
std::vector<std::string> significance_metrics(Task task, std::size_t cutoff = 10);

MetricReport build_generation_report(std::string run_tag, std::span<const GenerationEvalRecord> records,
                                     const GenerationEvalOptions& options = {},
                                     std::span<const MetricReport* const> baselines = {});

/// `runs` keyed by query id; `targets` the relevant ids per query. The key
/// sets must agree.
MetricReport build_retrieval_report(std::string run_tag, const std::map<std::string, RankedList>& runs,
                                    const std::map<std::string, std::set<std::string>>& targets,
                                    std::size_t cutoff = 10,
                                    std::span<const MetricReport* const> baselines = {});

/// t-tests of `a` against `b` on the task's significance metrics. Sample ids
/// must match exactly.
std::vector<SignificanceRow> compare_reports(const MetricReport& a, const MetricReport& b);

Json report_to_json(const MetricReport& r);
MetricReport report_from_json(const Json& j);
MetricReport load_report(const std::filesystem::path& path);
void save_report(const std::filesystem::path& path, const MetricReport& r);

struct TableRow {
    std::string model;
    std::string input;
    const MetricReport* report = nullptr;
};

/// Metric columns in table order for a task.
std::vector<std::string> table_columns(Task task, std::size_t cutoff = 10);

/// Aligned plain-text table: Model | Input | metric columns (4 decimals).
/// Blank separator rule between input groups.
std::string render_table(std::span<const TableRow> rows, const std::vector<std::string>& columns);

}  // namespace infoneed
