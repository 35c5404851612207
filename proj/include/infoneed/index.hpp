#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "infoneed/corpus.hpp"
#include "infoneed/ranking.hpp"
#include "infoneed/text.hpp"

namespace infoneed {

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
};

struct Posting {
    std::uint32_t doc = 0;  // dense document number, corpus order
    std::uint32_t tf = 0;

    bool operator==(const Posting&) const = default;
};

/// BM25 inverted index over a fixed passage set. Immutable after build;
/// concurrent reads need no synchronization.
///
/// score(q, d) = sum over query tokens t present in d of
///     idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(d) / avglen))
/// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
/// Repeated query tokens contribute once per occurrence.
class InvertedIndex {
  public:
    static constexpr std::uint32_t kFormatVersion = 1;

    InvertedIndex() = default;

    static InvertedIndex build(std::span<const Document> docs, Bm25Params params = {});

    double bm25_score(const TokenStream& query, std::string_view doc_id) const;

    /// Top-k documents sharing at least one term with the query, excluding
    /// `exclude`, ordered by `ranks_before`.
    RankedList search(std::string_view query_text, std::size_t k,
                      const std::unordered_set<std::string>& exclude = {}) const;
    RankedList search_tokens(const TokenStream& query, std::size_t k,
                             const std::unordered_set<std::string>& exclude = {}) const;

    std::size_t doc_count() const noexcept { return doc_ids_.size(); }
    double avg_doc_length() const noexcept { return avg_doc_length_; }
    const Bm25Params& params() const noexcept { return params_; }
    std::size_t term_count() const noexcept { return terms_.size(); }

    bool contains_doc(std::string_view doc_id) const;
    std::uint32_t doc_length(std::string_view doc_id) const;
    std::size_t document_frequency(std::string_view term) const;
    /// Empty span when the term is absent.
    std::span<const Posting> postings(std::string_view term) const;
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    const std::vector<std::string>& terms() const noexcept { return terms_; }
    double idf(std::string_view term) const;

    std::string serialize() const;
    static InvertedIndex deserialize(std::string_view bytes);
    void save(const std::filesystem::path& path) const;
    static InvertedIndex load(const std::filesystem::path& path);

  private:
    void finalize();
    double term_weight(std::size_t df, std::uint32_t tf, std::uint32_t len) const;

    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    std::vector<std::uint32_t> doc_order_;  // rank of doc_id in ascending id order
    std::vector<std::string> terms_;         // sorted
    std::vector<std::vector<Posting>> postings_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::unordered_map<std::string, std::uint32_t> doc_pos_;
    double avg_doc_length_ = 0.0;
};

}  // namespace infoneed
