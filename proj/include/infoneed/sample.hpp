#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "infoneed/corpus.hpp"
#include "infoneed/io.hpp"

namespace infoneed {

/// Who produced a sample's context/intent fields.
struct Provenance {
    std::string reformulator;  // "rule-based", "llm", "dataset"
    std::string model;         // external model id, empty for local rules
    bool low_fidelity = false;

    bool operator==(const Provenance&) const = default;
};

/// The five-field record: the broader passage being read (source), the
/// selected span (context), what was asked about it (intent), the full
/// question, and the answering passage when one exists (target).
struct Sample {
    std::string sample_id;
    std::string source;
    std::string context;
    std::optional<std::string> intent;
    std::string question;
    std::optional<std::string> target_doc_id;
    Split split = Split::Train;
    std::optional<std::string> source_doc_id;
    Provenance provenance;
    /// Dataset-specific fields carried through untouched (article id, raw
    /// split label, ...).
    Json metadata = Json::object();

    bool operator==(const Sample&) const = default;
};

enum class PairLabel { Positive, Negative };

inline int label_value(PairLabel l) noexcept { return l == PairLabel::Positive ? 1 : 0; }

struct TrainingPair {
    std::string sample_id;
    std::string input_text;
    std::string target_doc_id;
    PairLabel label = PairLabel::Positive;
    Split split = Split::Train;

    bool operator==(const TrainingPair&) const = default;
};

Json sample_to_json(const Sample& s);
Sample sample_from_json(const Json& j);

std::vector<Sample> read_samples(const std::filesystem::path& path);
std::string format_samples(std::span<const Sample> samples);
void write_samples(const std::filesystem::path& path, std::span<const Sample> samples);

Json pair_to_json(const TrainingPair& p);
TrainingPair pair_from_json(const Json& j);
std::vector<TrainingPair> read_pairs(const std::filesystem::path& path);
void write_pairs(const std::filesystem::path& path, std::span<const TrainingPair> pairs);

}  // namespace infoneed
