#include "infoneed/prediction.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <numeric>
#include <regex>

#include "infoneed/error.hpp"
#include "infoneed/io.hpp"
#include "infoneed/text.hpp"

namespace infoneed {

std::string_view to_string(VariantKind kind) noexcept {
    switch (kind) {
        case VariantKind::Question: return "question";
        case VariantKind::ContextIntent: return "context_intent";
        case VariantKind::SourceIntent: return "source_intent";
        case VariantKind::Context: return "context";
        case VariantKind::Source: return "source";
    }
    return "question";
}

std::string_view display_name(VariantKind kind) noexcept {
    switch (kind) {
        case VariantKind::Question: return "Question";
        case VariantKind::ContextIntent: return "Context + Intent";
        case VariantKind::SourceIntent: return "Source + Intent";
        case VariantKind::Context: return "Context";
        case VariantKind::Source: return "Source";
    }
    return "Question";
}

int variant_number(VariantKind kind) noexcept { return static_cast<int>(kind) + 1; }

VariantKind parse_variant(std::string_view name) {
    for (const auto k : kAllVariants)
        if (name == to_string(k) || name == display_name(k)) return k;
    if (name == "context+intent" || name == "ci") return VariantKind::ContextIntent;
    if (name == "source+intent" || name == "si") return VariantKind::SourceIntent;
    throw ValidationError("unknown input variant '" + std::string(name) + "'");
}

namespace {

const std::string& require(const std::string& value, std::string_view field, const Sample& s,
                           VariantKind kind) {
    if (trim(value).empty())
        throw ValidationError("sample \"" + s.sample_id + "\" lacks field '" + std::string(field) +
                              "' required by variant " + std::string(to_string(kind)));
    return value;
}

const std::string& require_intent(const Sample& s, VariantKind kind) {
    static const std::string empty;
    return require(s.intent ? *s.intent : empty, "intent", s, kind);
}

}  // namespace

InputVariant build_variant(const Sample& sample, VariantKind kind, const VariantOptions& options) {
    InputVariant v;
    v.kind = kind;
    v.sample_id = sample.sample_id;
    const std::string sep = " " + options.separator + " ";
    switch (kind) {
        case VariantKind::Question:
            v.fields = {{"question", require(sample.question, "question", sample, kind)}};
            v.rendered_text = sample.question;
            break;
        case VariantKind::Context:
            v.fields = {{"context", require(sample.context, "context", sample, kind)}};
            v.rendered_text = sample.context;
            break;
        case VariantKind::Source:
            v.fields = {{"source", require(sample.source, "source", sample, kind)}};
            v.rendered_text = sample.source;
            break;
        case VariantKind::ContextIntent: {
            const auto& c = require(sample.context, "context", sample, kind);
            const auto& i = require_intent(sample, kind);
            v.fields = {{"context", c}, {"intent", i}};
            v.rendered_text = c + sep + i;
            break;
        }
        case VariantKind::SourceIntent: {
            const auto& s = require(sample.source, "source", sample, kind);
            const auto& i = require_intent(sample, kind);
            v.fields = {{"source", s}, {"intent", i}};
            v.rendered_text = s + sep + i;
            break;
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Prompt templates

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
    if (trim(text_).empty()) throw ValidationError("empty prompt template");
}

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
    return PromptTemplate(read_file(path));
}

PromptTemplate PromptTemplate::default_generation() {
    return PromptTemplate(
        "Predict the full question a reader has about the highlighted text.\n"
        "Source: {source}\n"
        "Context: {context}\n"
        "Intent: {intent}\n"
        "Question:");
}

std::string PromptTemplate::render(const InputVariant& variant) const {
    static const std::regex placeholder(R"(\{(source|context|intent|question)\})");
    std::map<std::string, std::string> values(variant.fields.begin(), variant.fields.end());
    std::set<std::string> used;

    std::string out;
    bool first = true;
    for (const auto line_view : split(text_, '\n')) {
        const std::string line(line_view);
        bool keep = true;
        for (auto it = std::sregex_iterator(line.begin(), line.end(), placeholder); it != std::sregex_iterator(); ++it)
            if (!values.contains((*it)[1].str())) keep = false;
        if (!keep) continue;
        std::string rendered;
        std::size_t last = 0;
        for (auto it = std::sregex_iterator(line.begin(), line.end(), placeholder); it != std::sregex_iterator(); ++it) {
            rendered.append(line, last, static_cast<std::size_t>(it->position()) - last);
            const auto name = (*it)[1].str();
            rendered += values.at(name);
            used.insert(name);
            last = static_cast<std::size_t>(it->position() + it->length());
        }
        rendered.append(line, last);
        if (!first) out += '\n';
        out += rendered;
        first = false;
    }
    for (const auto& [name, value] : values)
        if (!used.contains(name))
            throw ValidationError("prompt template has no {" + name + "} placeholder required by variant " +
                                  std::string(to_string(variant.kind)));
    return out;
}

Generation generate_question(const InputVariant& variant, Provider& provider, const PromptTemplate& prompt,
                             const GenerationOptions& options) {
    GenerationRequest req;
    req.prompt = prompt.render(variant);
    req.max_tokens = options.max_tokens;
    req.temperature = options.temperature;
    req.stop = options.stop;
    req.seed = options.seed;
    Generation g = provider.generate(req);
    g.text = trim(g.text);
    if (g.text.empty()) throw ProviderError(provider.name() + ": empty question", false);
    return g;
}

// ---------------------------------------------------------------------------
// Retrieval

namespace {

ScorerConfig scorer_from_json(const Json& j) {
    ScorerConfig c;
    c.kind = parse_scorer_kind(j.value("kind", std::string("lexical")));
    c.provider = j.value("provider", c.provider);
    c.bm25.k1 = j.value("k1", c.bm25.k1);
    c.bm25.b = j.value("b", c.bm25.b);
    return c;
}

Json scorer_to_json(const ScorerConfig& c) {
    Json j{{"kind", to_string(c.kind)}};
    if (c.kind == ScorerKind::Lexical) {
        j["k1"] = c.bm25.k1;
        j["b"] = c.bm25.b;
    } else {
        j["provider"] = c.provider;
    }
    return j;
}

}  // namespace

PipelineConfig pipeline_from_json(const Json& j) {
    PipelineConfig c;
    if (j.contains("first_stage")) c.first_stage = scorer_from_json(j["first_stage"]);
    if (j.contains("reranker") && !j["reranker"].is_null()) c.reranker = scorer_from_json(j["reranker"]);
    c.depth = j.value("depth", c.depth);
    if (j.contains("pool_splits")) {
        c.pool_splits.clear();
        for (const auto& s : j["pool_splits"]) c.pool_splits.push_back(parse_split(s.get<std::string>()));
    }
    return c;
}

Json pipeline_to_json(const PipelineConfig& c) {
    Json j{{"first_stage", scorer_to_json(c.first_stage)},
           {"reranker", c.reranker ? scorer_to_json(*c.reranker) : Json(nullptr)},
           {"depth", c.depth}};
    Json splits = Json::array();
    for (const auto s : c.pool_splits) splits.push_back(to_string(s));
    j["pool_splits"] = splits;
    return j;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    try {
        return pipeline_from_json(Json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 0, e.what());
    }
}

namespace {

std::unique_ptr<Scorer> make_scorer(const ScorerConfig& c, const ProviderRegistry& providers,
                                    const std::shared_ptr<const InvertedIndex>& index) {
    if (c.kind == ScorerKind::Lexical) return std::make_unique<Scorer>(c.kind, nullptr, index);
    return std::make_unique<Scorer>(c.kind, providers.get(c.provider), nullptr);
}

}  // namespace

RetrievalPipeline::RetrievalPipeline(std::vector<Document> pool, const PipelineConfig& config,
                                     const ProviderRegistry& providers)
    : pool_(std::move(pool)), config_(config) {
    if (pool_.empty()) throw ValidationError("retrieval pipeline: empty candidate pool");
    for (std::size_t i = 0; i < pool_.size(); ++i) {
        if (!pos_.emplace(pool_[i].doc_id, i).second)
            throw ValidationError("retrieval pipeline: duplicate doc_id \"" + pool_[i].doc_id + "\"");
        pool_ptrs_.push_back(&pool_[i]);
    }
    by_id_ = pool_ptrs_;
    std::sort(by_id_.begin(), by_id_.end(), [](const Document* a, const Document* b) { return a->doc_id < b->doc_id; });

    const bool needs_index = config_.first_stage.kind == ScorerKind::Lexical ||
                             (config_.reranker && config_.reranker->kind == ScorerKind::Lexical);
    if (needs_index) {
        const Bm25Params params = config_.first_stage.kind == ScorerKind::Lexical ? config_.first_stage.bm25
                                                                                 : config_.reranker->bm25;
        index_ = std::make_shared<const InvertedIndex>(InvertedIndex::build(pool_, params));
    }
    first_ = make_scorer(config_.first_stage, providers, index_);
    if (config_.reranker) rerank_ = make_scorer(*config_.reranker, providers, index_);
}

const Document* RetrievalPipeline::find(std::string_view doc_id) const {
    const auto it = pos_.find(std::string(doc_id));
    return it == pos_.end() ? nullptr : &pool_[it->second];
}

RankedList RetrievalPipeline::first_stage(const std::string& text, std::size_t depth) const {
    RankedList list;
    if (first_->kind() == ScorerKind::Lexical) {
        list = index_->search(text, depth);
        if (list.entries.size() < depth) {
            std::unordered_set<std::string> present;
            for (const auto& e : list.entries) present.insert(e.doc_id);
            for (const auto* d : by_id_) {
                if (list.entries.size() >= depth) break;
                if (!present.contains(d->doc_id)) list.entries.push_back({d->doc_id, 0.0});
            }
        }
        return list;
    }
    const auto scores = first_->score_all(text, pool_ptrs_);
    std::vector<RankedEntry> all;
    all.reserve(pool_.size());
    for (std::size_t i = 0; i < pool_.size(); ++i) all.push_back({pool_[i].doc_id, scores[i].score});
    const std::size_t take = std::min(depth, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), ranks_before);
    all.resize(take);
    list.entries = std::move(all);
    return list;
}

RankedList RetrievalPipeline::retrieve_text(const std::string& text, std::size_t k, std::string query_ref) const {
    if (k == 0) throw ValidationError("retrieve: k must be >= 1");
    const std::size_t depth_cfg = config_.depth == 0 ? pool_.size() : config_.depth;
    const std::size_t depth = rerank_ ? std::max(depth_cfg, k) : k;
    RankedList list = first_stage(text, depth);
    list.query_ref = std::move(query_ref);
    if (rerank_) {
        std::vector<const Document*> docs;
        for (const auto& e : list.entries) docs.push_back(find(e.doc_id));
        const auto scores = rerank_->score_all(text, docs);
        std::vector<std::size_t> order(docs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return scores[a].score > scores[b].score; });
        std::vector<RankedEntry> reranked;
        reranked.reserve(order.size());
        for (const auto i : order) reranked.push_back({list.entries[i].doc_id, scores[i].score});
        list.entries = std::move(reranked);
    }
    if (list.entries.size() > k) list.entries.resize(k);
    return list;
}

RankedList RetrievalPipeline::retrieve(const InputVariant& variant, std::size_t k) const {
    return retrieve_text(variant.rendered_text, k, variant.sample_id.value_or(""));
}

std::vector<std::string> build_candidate_pool(std::span<const Sample> samples, const std::set<Split>& splits) {
    std::set<std::string> ids;
    for (const auto& s : samples)
        if (s.target_doc_id && splits.contains(s.split)) ids.insert(*s.target_doc_id);
    return {ids.begin(), ids.end()};
}

// ---------------------------------------------------------------------------
// Run files

std::string format_trec_run(std::span<const RankedList> lists, std::string_view run_tag) {
    std::string out;
    char buf[64];
    for (const auto& list : lists) {
        for (std::size_t r = 0; r < list.entries.size(); ++r) {
            std::snprintf(buf, sizeof buf, "%.8f", list.entries[r].score);
            out += list.query_ref + " Q0 " + list.entries[r].doc_id + ' ' + std::to_string(r + 1) + ' ' + buf + ' ' +
                   std::string(run_tag) + '\n';
        }
    }
    return out;
}

void write_trec_run(const std::filesystem::path& path, std::span<const RankedList> lists, std::string_view run_tag) {
    write_file(path, format_trec_run(lists, run_tag));
}

std::map<std::string, RankedList> read_trec_run(const std::filesystem::path& path) {
    std::map<std::string, std::vector<std::pair<long, RankedEntry>>> rows;
    for_each_line(path, [&](std::string_view line, std::size_t number) {
        const auto f = split_whitespace(line);
        if (f.empty()) return;
        if (f.size() != 6) throw ParseError(path.string(), number, "expected 6 columns in TREC run line");
        long rank = 0;
        if (std::from_chars(f[3].data(), f[3].data() + f[3].size(), rank).ec != std::errc{})
            throw ParseError(path.string(), number, "rank is not an integer");
        double score = 0;
        try {
            score = std::stod(std::string(f[4]));
        } catch (const std::exception&) {
            throw ParseError(path.string(), number, "score is not a number");
        }
        rows[std::string(f[0])].push_back({rank, {std::string(f[2]), score}});
    });
    std::map<std::string, RankedList> out;
    for (auto& [qid, entries] : rows) {
        std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        RankedList list;
        list.query_ref = qid;
        for (auto& e : entries) list.entries.push_back(std::move(e.second));
        out.emplace(qid, std::move(list));
    }
    return out;
}

std::string format_generations(std::span<const GeneratedQuestion> rows) {
    std::string out;
    for (const auto& r : rows) {
        Json j{{"sample_id", r.sample_id},
               {"variant", to_string(r.variant)},
               {"generated_question", r.generated_question},
               {"provider", r.provider}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

void write_generations(const std::filesystem::path& path, std::span<const GeneratedQuestion> rows) {
    write_file(path, format_generations(rows));
}

std::vector<GeneratedQuestion> read_generations(const std::filesystem::path& path) {
    std::vector<GeneratedQuestion> out;
    for (const auto& j : read_jsonl(path)) {
        GeneratedQuestion g;
        g.sample_id = j.at("sample_id").get<std::string>();
        g.variant = parse_variant(j.value("variant", std::string("context_intent")));
        g.generated_question = j.at("generated_question").get<std::string>();
        g.provider = j.value("provider", std::string());
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace infoneed
