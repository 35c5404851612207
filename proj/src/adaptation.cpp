#include "infoneed/adaptation.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "infoneed/io.hpp"
#include "infoneed/parallel.hpp"
#include "infoneed/rng.hpp"
#include "infoneed/text.hpp"

namespace infoneed {

SourceSimulation simulate_source(const InvertedIndex& index, const Query& query,
                                 std::span<const Judgment> judgments, std::size_t k) {
    std::unordered_set<std::string> exclude;
    for (const auto& j : judgments)
        if (j.query_id == query.query_id && j.grade >= 1) exclude.insert(j.doc_id);
    SourceSimulation sim;
    sim.candidates = index.search(query.text, k, exclude);
    sim.candidates.query_ref = query.query_id;
    if (sim.candidates.entries.empty())
        throw SampleSkipped("query \"" + query.query_id + "\": no non-relevant passage matches the query");
    sim.source_doc_id = sim.candidates.entries.front().doc_id;
    return sim;
}

// ---------------------------------------------------------------------------
// Rule-based reformulation

namespace {

const std::set<std::string_view>& interrogative_followers() {
    static const std::set<std::string_view> words = {
        "do",   "does", "did",   "is",    "are",  "was", "were",  "am",   "can",  "could", "should",
        "would", "will", "shall", "may",  "might", "must", "has", "have", "had",  "much",  "many",
        "long", "far",  "old",   "often", "big",  "large", "tall", "kind", "type", "to"};
    return words;
}

const std::set<std::string_view>& stopwords() {
    static const std::set<std::string_view> words = {
        "a",    "an",   "the",  "of",   "to",   "in",    "on",   "at",   "for",  "by",  "with", "from",
        "and",  "or",   "is",   "are",  "was",  "were",  "be",   "been", "do",   "does", "did", "it",
        "its",  "this", "that", "these", "those", "there", "as",  "i",    "you",  "he",  "she", "they",
        "we",   "my",   "your", "his",  "her",  "their", "our",  "me",   "him",  "them", "us",  "so",
        "if",   "than", "then", "can",  "could", "would", "should", "will", "shall", "am", "has", "have",
        "had",  "about"};
    return words;
}

struct WhGroup {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive; begin == end when none found
};

WhGroup find_wh_group(const TokenStream& tokens) {
    constexpr std::size_t kMaxFollowers = 2;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!is_wh_word(tokens[i])) continue;
        std::size_t end = i + 1;
        while (end < tokens.size() && end - i - 1 < kMaxFollowers && interrogative_followers().contains(tokens[end]))
            ++end;
        return {i, end};
    }
    return {};
}

template <typename It>
std::string join_range(It begin, It end) {
    return join(std::vector<std::string>(begin, end), " ");
}

}  // namespace

Reformulation RuleBasedReformulator::reformulate(const std::string& question) {
    const auto tokens = tokenize(question);
    if (tokens.empty()) throw ReformulationRejected("question has no words: \"" + question + "\"");
    Reformulation r;
    const auto group = find_wh_group(tokens);
    std::vector<std::string> residue;
    if (group.end > group.begin) {
        r.intent = join_range(tokens.begin() + static_cast<std::ptrdiff_t>(group.begin),
                              tokens.begin() + static_cast<std::ptrdiff_t>(group.end));
        if (group.begin != 0) r.flag_reason = "interrogative word not leading";
        for (std::size_t i = 0; i < tokens.size(); ++i)
            if ((i < group.begin || i >= group.end) && !stopwords().contains(tokens[i])) residue.push_back(tokens[i]);
    } else {
        r.intent = "what";
        r.flag_reason = "no interrogative word; intent defaulted to \"what\"";
        for (const auto& t : tokens)
            if (!stopwords().contains(t)) residue.push_back(t);
    }
    if (residue.empty()) {
        residue = tokens;
        r.flag_reason = "no content words left for the context";
    }
    r.context = join(residue, " ");
    return r;
}

Reformulation RuleBasedReformulator::extract_intent(const std::string& question, const std::string&) {
    const auto tokens = tokenize(question);
    if (tokens.empty()) throw ReformulationRejected("question has no words: \"" + question + "\"");
    Reformulation r;
    const auto group = find_wh_group(tokens);
    if (group.end > group.begin) {
        r.intent = join_range(tokens.begin() + static_cast<std::ptrdiff_t>(group.begin),
                              tokens.begin() + static_cast<std::ptrdiff_t>(group.end));
    } else {
        r.intent = "what";
        r.flag_reason = "no interrogative word; intent defaulted to \"what\"";
    }
    return r;
}

// ---------------------------------------------------------------------------
// Provider-backed reformulation

ProviderReformulator::ProviderReformulator(std::shared_ptr<Provider> provider, std::string split_prompt,
                                           std::string intent_prompt)
    : provider_(std::move(provider)), split_prompt_(std::move(split_prompt)), intent_prompt_(std::move(intent_prompt)) {
    if (!provider_) throw ValidationError("provider reformulator needs a provider");
}

std::string ProviderReformulator::model_id() const {
    return provider_->model_id().empty() ? provider_->name() : provider_->model_id();
}

std::string ProviderReformulator::default_split_prompt() {
    return "Rewrite the search query as two parts.\n"
           "Context: what the query is about, a short noun phrase taken from the query.\n"
           "Intent: what the query asks about that context, a short word or phrase.\n"
           "Answer with exactly two lines starting with 'Context:' and 'Intent:'.\n"
           "Query: {question}\n";
}

std::string ProviderReformulator::default_intent_prompt() {
    return "Name what this question asks for in one to three words (for example: who, why, how many, "
           "examples, source).\n"
           "Selected text: {context}\n"
           "Question: {question}\n"
           "Answer with the intent only.\n";
}

namespace {

std::string substitute(std::string text, std::string_view key, std::string_view value) {
    const std::string needle = "{" + std::string(key) + "}";
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + value.size()))
        text.replace(pos, needle.size(), value);
    return text;
}

std::string labeled_value(std::string_view output, std::string_view label) {
    for (const auto raw : split(output, '\n')) {
        std::string line = trim(raw);
        if (line.size() < label.size()) continue;
        bool match = true;
        for (std::size_t i = 0; i < label.size() && match; ++i)
            match = std::tolower(static_cast<unsigned char>(line[i])) == label[i];
        if (match) return trim(std::string_view(line).substr(label.size()));
    }
    return {};
}

std::string clean_intent(std::string s) {
    s = trim(s);
    while (!s.empty() && (s.front() == '"' || s.front() == '\'')) s.erase(s.begin());
    while (!s.empty() && (s.back() == '"' || s.back() == '\'' || s.back() == '.')) s.pop_back();
    return trim(s);
}

}  // namespace

Reformulation ProviderReformulator::reformulate(const std::string& question) {
    GenerationRequest req;
    req.prompt = substitute(split_prompt_, "question", question);
    req.max_tokens = 64;
    const auto out = provider_->generate(req);
    Reformulation r;
    r.context = clean_intent(labeled_value(out.text, "context:"));
    r.intent = clean_intent(labeled_value(out.text, "intent:"));
    if (r.context.empty() || r.intent.empty())
        throw ReformulationRejected("unparseable reformulation for \"" + question + "\": " + out.text.substr(0, 120));
    if (out.provider != provider_->name()) r.flag_reason = "answered by fallback provider " + out.provider;
    return r;
}

Reformulation ProviderReformulator::extract_intent(const std::string& question, const std::string& context) {
    GenerationRequest req;
    req.prompt = substitute(substitute(intent_prompt_, "question", question), "context", context);
    req.max_tokens = 16;
    const auto out = provider_->generate(req);
    Reformulation r;
    std::string first;
    for (const auto line : split(out.text, '\n'))
        if (!trim(line).empty()) {
            first = std::string(line);
            break;
        }
    const std::string labeled = labeled_value(first, "intent:");
    r.intent = clean_intent(labeled.empty() ? first : labeled);
    if (r.intent.empty()) throw ReformulationRejected("empty intent for \"" + question + "\"");
    if (out.provider != provider_->name()) r.flag_reason = "answered by fallback provider " + out.provider;
    return r;
}

Reformulation reformulate(const std::string& question, Reformulator& reformulator) {
    if (trim(question).empty()) throw ValidationError("reformulate: empty question");
    auto r = reformulator.reformulate(question);
    r.context = trim(r.context);
    r.intent = trim(r.intent);
    if (r.context.empty() || r.intent.empty())
        throw ReformulationRejected(reformulator.name() + " produced an empty context or intent for \"" + question + "\"");
    return r;
}

// ---------------------------------------------------------------------------
// Dataset adaptation

namespace {

Provenance provenance_of(const Reformulator& r) {
    return {r.name(), r.model_id(), r.low_fidelity()};
}

std::string best_target(const std::vector<Judgment>& judgments) {
    const Judgment* best = nullptr;
    for (const auto& j : judgments) {
        if (j.grade < 1) continue;
        if (!best || j.grade > best->grade || (j.grade == best->grade && j.doc_id < best->doc_id)) best = &j;
    }
    return best ? best->doc_id : std::string();
}

void sort_result(AdaptationResult& result) {
    std::sort(result.samples.begin(), result.samples.end(),
              [](const Sample& a, const Sample& b) { return a.sample_id < b.sample_id; });
    std::sort(result.audit.begin(), result.audit.end(),
              [](const AuditEntry& a, const AuditEntry& b) { return a.sample_id < b.sample_id; });
    std::sort(result.skipped.begin(), result.skipped.end(),
              [](const SkippedSample& a, const SkippedSample& b) { return a.id < b.id; });
}

}  // namespace

AdaptationResult adapt_marco(const Corpus& corpus, const InvertedIndex& index, Reformulator& reformulator,
                             const MarcoOptions& options) {
    std::vector<std::string> candidates;
    for (const auto& q : corpus.queries())
        if (!corpus.relevant_docs(q.query_id).empty()) candidates.push_back(q.query_id);
    const auto chosen = sample_ids(std::move(candidates), options.max_queries, options.seed);

    struct Slot {
        std::optional<Sample> sample;
        std::optional<AuditEntry> audit;
        std::optional<SkippedSample> skipped;
    };
    std::vector<Slot> slots(chosen.size());

    parallel_for(chosen.size(), options.parallelism, [&](std::size_t i) {
        const Query& q = *corpus.find_query(chosen[i]);
        const auto judgments = corpus.judgments_for(q.query_id);
        SourceSimulation sim;
        try {
            sim = simulate_source(index, q, judgments, options.source_depth);
        } catch (const SampleSkipped& e) {
            slots[i].skipped = SkippedSample{q.query_id, e.what()};
            return;
        }
        Reformulation r;
        try {
            r = reformulate(q.text, reformulator);
        } catch (const ReformulationRejected& e) {
            slots[i].skipped = SkippedSample{q.query_id, e.what()};
            slots[i].audit = AuditEntry{q.query_id, q.text, "", "", e.what()};
            return;
        }
        const Document* source = corpus.find_document(sim.source_doc_id);
        Sample s;
        s.sample_id = q.query_id;
        s.source = source->text;
        s.context = r.context;
        s.intent = r.intent;
        s.question = q.text;
        s.target_doc_id = best_target(judgments);
        s.source_doc_id = sim.source_doc_id;
        s.provenance = provenance_of(reformulator);
        Json ids = Json::array();
        for (std::size_t c = 0; c < sim.candidates.entries.size() && c < options.recorded_candidates; ++c)
            ids.push_back(sim.candidates.entries[c].doc_id);
        s.metadata = {{"source_candidates", ids}, {"source_score", sim.candidates.entries.front().score}};
        if (!r.flag_reason.empty()) slots[i].audit = AuditEntry{s.sample_id, s.question, s.context, *s.intent, r.flag_reason};
        slots[i].sample = std::move(s);
    });

    AdaptationResult result;
    for (auto& slot : slots) {
        if (slot.sample) result.samples.push_back(std::move(*slot.sample));
        if (slot.audit) result.audit.push_back(std::move(*slot.audit));
        if (slot.skipped) {
            spdlog::info("skipped {}: {}", slot.skipped->id, slot.skipped->reason);
            result.skipped.push_back(std::move(*slot.skipped));
        }
    }
    std::vector<std::string> ids;
    for (const auto& s : result.samples) ids.push_back(s.sample_id);
    const auto splits = assign_splits(ids, options.ratios, options.seed);
    std::map<std::string, Split> split_of;
    for (const auto& a : splits) split_of.emplace(a.query_id, a.split);
    for (auto& s : result.samples) s.split = split_of.at(s.sample_id);
    sort_result(result);
    return result;
}

std::vector<InquisitiveRecord> load_inquisitive(const std::filesystem::path& path) {
    std::vector<InquisitiveRecord> out;
    std::size_t line = 0;
    for (const auto& j : read_jsonl(path)) {
        ++line;
        try {
            InquisitiveRecord r;
            const auto as_string = [&](const char* key) {
                if (!j.contains(key) || j[key].is_null()) return std::string();
                return j[key].is_string() ? j[key].get<std::string>() : j[key].dump();
            };
            r.id = as_string("id");
            r.article_id = as_string("article_id");
            r.sentence_id = as_string("sentence_id");
            r.sentence = j.at("sentence").get<std::string>();
            r.span = j.at("span").get<std::string>();
            r.question = j.at("question").get<std::string>();
            r.split = j.at("split").get<std::string>();
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string(), line, std::string("bad inquisitive record: ") + e.what());
        }
    }
    return out;
}

AdaptationResult adapt_inquisitive(std::span<const InquisitiveRecord> records, Reformulator& reformulator,
                                   std::size_t parallelism) {
    std::vector<std::string> ids(records.size());
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        std::string base = r.id.empty() ? r.article_id + "_" + r.sentence_id : r.id;
        const auto n = seen[base]++;
        ids[i] = r.id.empty() ? base + "_" + std::to_string(n) : (n == 0 ? base : base + "_" + std::to_string(n));
    }

    struct Slot {
        std::optional<Sample> sample;
        std::optional<AuditEntry> audit;
        std::optional<SkippedSample> skipped;
    };
    std::vector<Slot> slots(records.size());

    parallel_for(records.size(), parallelism, [&](std::size_t i) {
        const auto& rec = records[i];
        if (trim(rec.sentence).empty() || trim(rec.span).empty() || trim(rec.question).empty()) {
            slots[i].skipped = SkippedSample{ids[i], "missing sentence, span or question"};
            return;
        }
        std::string flag;
        if (rec.sentence.find(rec.span) == std::string::npos) {
            spdlog::warn("{}: span is not a substring of its sentence; keeping the span as given", ids[i]);
            flag = "span not found in sentence";
        }
        Reformulation r;
        try {
            r = reformulator.extract_intent(rec.question, rec.span);
            r.intent = trim(r.intent);
            if (r.intent.empty()) throw ReformulationRejected("empty intent");
        } catch (const ReformulationRejected& e) {
            slots[i].skipped = SkippedSample{ids[i], e.what()};
            slots[i].audit = AuditEntry{ids[i], rec.question, rec.span, "", e.what()};
            return;
        }
        if (!r.flag_reason.empty()) flag = flag.empty() ? r.flag_reason : flag + "; " + r.flag_reason;
        Sample s;
        s.sample_id = ids[i];
        s.source = rec.sentence;
        s.context = rec.span;
        s.intent = r.intent;
        s.question = rec.question;
        s.split = parse_split(rec.split);
        s.provenance = provenance_of(reformulator);
        s.metadata = {{"article_id", rec.article_id}, {"sentence_id", rec.sentence_id}, {"split_label", rec.split}};
        if (!flag.empty()) slots[i].audit = AuditEntry{s.sample_id, s.question, s.context, *s.intent, flag};
        slots[i].sample = std::move(s);
    });

    AdaptationResult result;
    for (auto& slot : slots) {
        if (slot.sample) result.samples.push_back(std::move(*slot.sample));
        if (slot.audit) result.audit.push_back(std::move(*slot.audit));
        if (slot.skipped) result.skipped.push_back(std::move(*slot.skipped));
    }
    sort_result(result);
    return result;
}

std::vector<TrainingPair> assemble_pairs(std::span<const Sample> samples, const PairOptions& options) {
    std::vector<const Sample*> ordered;
    for (const auto& s : samples)
        if (s.target_doc_id) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](const Sample* a, const Sample* b) { return a->sample_id < b->sample_id; });

    std::map<Split, std::vector<std::string>> targets;
    {
        std::map<Split, std::set<std::string>> distinct;
        for (const auto* s : ordered) distinct[s->split].insert(*s->target_doc_id);
        for (auto& [split, ids] : distinct) targets[split] = {ids.begin(), ids.end()};
    }

    DeterministicRng rng(options.seed);
    std::vector<TrainingPair> pairs;
    for (const auto* s : ordered) {
        const auto input = build_variant(*s, options.variant, options.variant_options).rendered_text;
        pairs.push_back({s->sample_id, input, *s->target_doc_id, PairLabel::Positive, s->split});
        if (options.negatives_per_positive == 0) continue;

        std::vector<std::string> pool;
        for (const auto& t : targets[s->split])
            if (t != *s->target_doc_id) pool.push_back(t);
        if (pool.size() < options.negatives_per_positive)
            throw ValidationError("split " + std::string(to_string(s->split)) + " has " + std::to_string(pool.size()) +
                                  " distinct non-target passages for sample \"" + s->sample_id + "\" but " +
                                  std::to_string(options.negatives_per_positive) + " negatives were requested (short by " +
                                  std::to_string(options.negatives_per_positive - pool.size()) + ")");
        for (const auto i : rng.sample_without_replacement(pool.size(), options.negatives_per_positive))
            pairs.push_back({s->sample_id, input, pool[i], PairLabel::Negative, s->split});
    }
    return pairs;
}

void write_audit(const std::filesystem::path& path, std::span<const AuditEntry> audit) {
    std::string out;
    for (const auto& a : audit) {
        Json j{{"sample_id", a.sample_id},
               {"question", a.question},
               {"context", a.context},
               {"intent", a.intent},
               {"flag_reason", a.flag_reason}};
        out += j.dump();
        out += '\n';
    }
    write_file(path, out);
}

}  // namespace infoneed
