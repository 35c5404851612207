#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace infoneed {

struct Document {
    std::string doc_id;
    std::string text;
    std::optional<std::string> title;

    bool operator==(const Document&) const = default;
};

struct Query {
    std::string query_id;
    std::string text;

    bool operator==(const Query&) const = default;
};

/// grade 0 = not relevant, >= 1 relevant.
struct Judgment {
    std::string query_id;
    std::string doc_id;
    int grade = 0;

    bool operator==(const Judgment&) const = default;
};

enum class Split { Train, Validation, Test };

std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view name);

struct SplitAssignment {
    std::string query_id;
    Split split = Split::Train;

    bool operator==(const SplitAssignment&) const = default;
};

struct SplitRatios {
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;
};

/// Immutable, cross-referenced passage collection with queries and
/// judgments. Safe to share read-only between threads.
class Corpus {
  public:
    Corpus() = default;

    /// Validates ids (nonempty, unique), passage text (nonempty after trim),
    /// judgment uniqueness and referential integrity.
    static Corpus create(std::vector<Document> documents, std::vector<Query> queries = {},
                         std::vector<Judgment> judgments = {});

    const std::vector<Document>& documents() const noexcept { return documents_; }
    const std::vector<Query>& queries() const noexcept { return queries_; }
    const std::vector<Judgment>& judgments() const noexcept { return judgments_; }

    const Document* find_document(std::string_view doc_id) const;
    const Query* find_query(std::string_view query_id) const;

    /// Doc ids judged grade >= 1 for the query, ascending.
    std::vector<std::string> relevant_docs(std::string_view query_id) const;
    /// Judgments for one query, in file order.
    std::vector<Judgment> judgments_for(std::string_view query_id) const;

    bool operator==(const Corpus& other) const {
        return documents_ == other.documents_ && queries_ == other.queries_ &&
               judgments_ == other.judgments_;
    }

  private:
    std::vector<Document> documents_;
    std::vector<Query> queries_;
    std::vector<Judgment> judgments_;
    std::unordered_map<std::string, std::size_t> doc_pos_;
    std::unordered_map<std::string, std::size_t> query_pos_;
    std::unordered_map<std::string, std::vector<std::size_t>> judgments_by_query_;
};

/// `doc_id<TAB>text[<TAB>title]`.
std::vector<Document> load_passages(const std::filesystem::path& path);
/// `query_id<TAB>text`.
std::vector<Query> load_queries(const std::filesystem::path& path);
/// `query_id 0 doc_id grade`, whitespace separated.
std::vector<Judgment> load_judgments(const std::filesystem::path& path);

Corpus load_collection(const std::filesystem::path& passages_path,
                       const std::filesystem::path& queries_path,
                       const std::filesystem::path& judgments_path);

std::string format_passages(std::span<const Document> docs);
std::string format_queries(std::span<const Query> queries);
std::string format_judgments(std::span<const Judgment> judgments);

void save_collection(const Corpus& corpus, const std::filesystem::path& passages_path,
                     const std::filesystem::path& queries_path,
                     const std::filesystem::path& judgments_path);

/// Seeded random partition. Validation and test receive
/// floor(ratio * N) queries each, train receives the rest. Output is sorted
/// by query id and depends only on (ids, ratios, seed).
std::vector<SplitAssignment> assign_splits(std::span<const std::string> query_ids,
                                           const SplitRatios& ratios, std::uint64_t seed);

void write_splits(const std::filesystem::path& path, std::span<const SplitAssignment> splits);
std::vector<SplitAssignment> read_splits(const std::filesystem::path& path);

/// Deterministic subset of at most `max_count` ids (all of them if fewer), sorted.
std::vector<std::string> sample_ids(std::vector<std::string> ids, std::size_t max_count,
                                    std::uint64_t seed);

}  // namespace infoneed
