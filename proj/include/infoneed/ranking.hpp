#pragma once

#include <string>
#include <vector>

namespace infoneed {

struct RankedEntry {
    std::string doc_id;
    double score = 0.0;

    bool operator==(const RankedEntry&) const = default;
};

/// Candidates in rank order: scores non-increasing, ties by ascending doc_id,
/// doc_ids distinct.
struct RankedList {
    std::string query_ref;
    std::vector<RankedEntry> entries;

    bool operator==(const RankedList&) const = default;
};

/// Ranking order used everywhere: higher score first, then ascending doc_id.
inline bool ranks_before(const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
}

}  // namespace infoneed
