#include "infoneed/sample.hpp"

#include "infoneed/error.hpp"

namespace infoneed {

Json sample_to_json(const Sample& s) {
    Json j;
    j["sample_id"] = s.sample_id;
    j["source"] = s.source;
    j["context"] = s.context;
    j["intent"] = s.intent ? Json(*s.intent) : Json(nullptr);
    j["question"] = s.question;
    j["target_doc_id"] = s.target_doc_id ? Json(*s.target_doc_id) : Json(nullptr);
    j["split"] = to_string(s.split);
    j["source_doc_id"] = s.source_doc_id ? Json(*s.source_doc_id) : Json(nullptr);
    j["provenance"] = {{"reformulator", s.provenance.reformulator},
                       {"model", s.provenance.model},
                       {"low_fidelity", s.provenance.low_fidelity}};
    j["metadata"] = s.metadata;
    return j;
}

namespace {

std::optional<std::string> optional_string(const Json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<std::string>();
}

}  // namespace

Sample sample_from_json(const Json& j) {
    Sample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.source = j.value("source", std::string());
    s.context = j.value("context", std::string());
    s.intent = optional_string(j, "intent");
    s.question = j.value("question", std::string());
    s.target_doc_id = optional_string(j, "target_doc_id");
    s.split = parse_split(j.value("split", std::string("train")));
    s.source_doc_id = optional_string(j, "source_doc_id");
    if (j.contains("provenance")) {
        const auto& p = j["provenance"];
        s.provenance.reformulator = p.value("reformulator", std::string());
        s.provenance.model = p.value("model", std::string());
        s.provenance.low_fidelity = p.value("low_fidelity", false);
    }
    if (j.contains("metadata")) s.metadata = j["metadata"];
    if (s.sample_id.empty()) throw ValidationError("sample with empty sample_id");
    if (s.question.empty()) throw ValidationError("sample \"" + s.sample_id + "\" has empty question");
    return s;
}

std::vector<Sample> read_samples(const std::filesystem::path& path) {
    std::vector<Sample> out;
    std::size_t line = 0;
    for (const auto& row : read_jsonl(path)) {
        ++line;
        try {
            out.push_back(sample_from_json(row));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string(), line, std::string("bad sample record: ") + e.what());
        } catch (const ValidationError& e) {
            throw ParseError(path.string(), line, e.what());
        }
    }
    return out;
}

std::string format_samples(std::span<const Sample> samples) {
    std::string out;
    for (const auto& s : samples) {
        out += sample_to_json(s).dump();
        out += '\n';
    }
    return out;
}

void write_samples(const std::filesystem::path& path, std::span<const Sample> samples) {
    write_file(path, format_samples(samples));
}

Json pair_to_json(const TrainingPair& p) {
    return Json{{"sample_id", p.sample_id},
                {"input_text", p.input_text},
                {"target_doc_id", p.target_doc_id},
                {"label", label_value(p.label)},
                {"split", to_string(p.split)}};
}

TrainingPair pair_from_json(const Json& j) {
    TrainingPair p;
    p.sample_id = j.at("sample_id").get<std::string>();
    p.input_text = j.at("input_text").get<std::string>();
    p.target_doc_id = j.at("target_doc_id").get<std::string>();
    p.label = j.at("label").get<int>() == 1 ? PairLabel::Positive : PairLabel::Negative;
    p.split = parse_split(j.value("split", std::string("train")));
    return p;
}

std::vector<TrainingPair> read_pairs(const std::filesystem::path& path) {
    std::vector<TrainingPair> out;
    for (const auto& row : read_jsonl(path)) out.push_back(pair_from_json(row));
    return out;
}

void write_pairs(const std::filesystem::path& path, std::span<const TrainingPair> pairs) {
    std::string out;
    for (const auto& p : pairs) {
        out += pair_to_json(p).dump();
        out += '\n';
    }
    write_file(path, out);
}

}  // namespace infoneed
