#pragma once

#include <cstdint>
#include <filesystem>

#include "infoneed/corpus.hpp"

namespace infoneed {

struct SynthOptions {
    std::size_t passages = 1000;
    std::size_t queries = 100;
    /// Passages sharing part of a query's topic without answering it.
    std::size_t distractors_per_query = 3;
    std::uint64_t seed = 7;
};

/// Synthetic retrieval collection made of pseudo-words. Every query is a
/// question whose exact text appears as one sentence of its single relevant
/// passage; distractor passages reuse at most two of the query's three topic
/// words; the rest is filler vocabulary disjoint from every topic word.
/// Deterministic in `options`.
Corpus make_synthetic_corpus(const SynthOptions& options = {});

/// Writes passages.tsv, queries.tsv and qrels.txt under `dir`.
void write_synthetic_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace infoneed
