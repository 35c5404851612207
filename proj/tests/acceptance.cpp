// Acceptance checks. Prints one PASS/FAIL (or SKIP) line per criterion and
// exits nonzero when a gating criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <thread>
#include <unordered_set>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "infoneed/adaptation.hpp"
#include "infoneed/evaluation.hpp"
#include "infoneed/experiment.hpp"
#include "infoneed/hash.hpp"
#include "infoneed/index.hpp"
#include "infoneed/scorers.hpp"
#include "infoneed/service.hpp"
#include "infoneed/stats.hpp"
#include "infoneed/synth.hpp"

using namespace infoneed;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s  %s  (%s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

fs::path fixture(const std::string& name) { return fs::path(INFONEED_FIXTURES_DIR) / name; }

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("infoneed_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::map<std::string, std::string> tree_hashes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = sha256_file(e.path());
    return out;
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
    const auto start = Clock::now();
    const auto cases = Json::parse(read_file(fixture("metric_cases.json")));
    std::size_t checked = 0, bad = 0;
    auto near = [&](double got, double want) {
        ++checked;
        if (!(std::fabs(got - want) <= 1e-9)) ++bad;
    };
    // hand fixtures
    near(bleu_n(tokenize("the the the"), tokenize("the cat sat"), 1), 1.0 / 3.0);
    near(bleu_n(tokenize("robin eggs"), tokenize("robin eggs hatch"), 1), std::exp(-0.5));
    near(rouge_n(tokenize("robin eggs hatch quickly"), tokenize("when do robin eggs hatch"), 1), 2.0 / 3.0);
    near(rouge_l(tokenize("robin eggs hatch quickly"), tokenize("when do robin eggs hatch")), 2.0 / 3.0);
    near(rouge_l({}, tokenize("when do robin eggs hatch")), 0.0);
    for (int n = 1; n <= 4; ++n) near(bleu_n(tokenize("a b c d"), tokenize("a b c d"), n), 1.0);

    const auto& gen = cases.at("generation");
    const auto& ret = cases.at("ranking");
    for (const auto& c : gen) {
        const auto h = tokenize(c["hyp"].get<std::string>());
        const auto r = tokenize(c["ref"].get<std::string>());
        for (int n = 1; n <= 4; ++n) {
            near(bleu_n(h, r, n), c["bleu" + std::to_string(n)].get<double>());
            near(bleu_n(h, r, n, BleuSmoothing::AddEpsilon), c["bleu" + std::to_string(n) + "_smoothed"].get<double>());
        }
        near(rouge_n(h, r, 1), c["rouge1"].get<double>());
        near(rouge_n(h, r, 2), c["rouge2"].get<double>());
        near(rouge_l(h, r), c["rougeL"].get<double>());
    }
    for (const auto& c : ret) {
        RankedList list;
        double s = 100;
        for (const auto& id : c["ranked"]) list.entries.push_back({id.get<std::string>(), s--});
        const auto target = c["target"].get<std::string>();
        const auto k = c["k"].get<std::size_t>();
        near(recall_at_k(list, target, k), c["recall"].get<double>());
        near(mrr(list, target, k), c["mrr"].get<double>());
    }
    const double secs = seconds_since(start);
    const bool enough = gen.size() >= 24 && ret.size() >= 20;
    return {bad == 0 && enough && secs < 5.0,
            std::to_string(gen.size()) + " generation + " + std::to_string(ret.size()) + " ranking oracle cases, " +
                std::to_string(checked) + " values, " + std::to_string(bad) + " off by >1e-9, " + fmt("%.3f s", secs)};
}

// Exhaustive scorer written from the formula; shares nothing with the index.
double brute_bm25(const std::vector<TokenStream>& docs, const TokenStream& q, std::size_t i) {
    const double n = static_cast<double>(docs.size());
    double avg = 0;
    for (const auto& d : docs) avg += static_cast<double>(d.size());
    avg /= n;
    double s = 0;
    for (const auto& t : q) {
        double df = 0;
        for (const auto& d : docs) df += std::find(d.begin(), d.end(), t) != d.end();
        const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), t));
        if (tf == 0) continue;
        const double idf = std::log(1 + (n - df + 0.5) / (df + 0.5));
        s += idf * tf * 1.9 / (tf + 0.9 * (0.6 + 0.4 * static_cast<double>(docs[i].size()) / avg));
    }
    return s;
}

Outcome bm25_oracle() {
    const auto start = Clock::now();
    std::mt19937_64 rng(2024);
    std::vector<std::string> vocab;
    for (int i = 0; i < 30; ++i) vocab.push_back("w" + std::to_string(i));
    std::size_t queries = 0, mismatches = 0;
    for (int corpus = 0; corpus < 200; ++corpus) {
        const std::size_t n = 1 + rng() % 50;
        std::vector<Document> docs;
        std::vector<TokenStream> toks;
        for (std::size_t i = 0; i < n; ++i) {
            std::string text;
            const std::size_t len = 1 + rng() % 20;
            // skewed draw so some terms are common and ties happen
            for (std::size_t w = 0; w < len; ++w) text += vocab[std::min(rng() % 30, rng() % 30)] + " ";
            docs.push_back({"doc" + std::to_string(rng() % 100000) + "_" + std::to_string(i), text, {}});
            toks.push_back(tokenize(text));
        }
        // duplicate a document now and then to force exact ties
        if (n > 2 && rng() % 3 == 0) {
            docs.back().text = docs.front().text;
            toks.back() = toks.front();
        }
        const auto idx = InvertedIndex::build(docs);
        for (int qi = 0; qi < 10; ++qi, ++queries) {
            TokenStream q;
            for (std::size_t w = 0, m = 1 + rng() % 5; w < m; ++w) q.push_back(vocab[rng() % 30]);
            std::unordered_set<std::string> exclude;
            if (rng() % 4 == 0) exclude.insert(docs[rng() % n].doc_id);
            const std::size_t k = 1 + rng() % 60;
            std::vector<RankedEntry> want;
            for (std::size_t i = 0; i < n; ++i) {
                if (exclude.contains(docs[i].doc_id)) continue;
                bool hit = false;
                for (const auto& t : q) hit |= std::find(toks[i].begin(), toks[i].end(), t) != toks[i].end();
                if (hit) want.push_back({docs[i].doc_id, brute_bm25(toks, q, i)});
            }
            // exact-score order: sort by score then id, treating 1e-12 noise as ties is not needed
            // because both sides sum in query-token order
            std::sort(want.begin(), want.end(), ranks_before);
            if (want.size() > k) want.resize(k);
            const auto got = idx.search_tokens(q, k, exclude).entries;
            bool ok = got.size() == want.size();
            for (std::size_t i = 0; ok && i < got.size(); ++i)
                ok = got[i].doc_id == want[i].doc_id && std::fabs(got[i].score - want[i].score) <= 1e-9;
            mismatches += !ok;
        }
    }
    const double secs = seconds_since(start);
    return {mismatches == 0 && secs < 30.0, "200 corpora, " + std::to_string(queries) + " queries, " +
                                                std::to_string(mismatches) + " mismatches, " + fmt("%.3f s", secs)};
}

Outcome ttest_fixtures() {
    const auto cases = Json::parse(read_file(fixture("ttest_cases.json")));
    double worst = 0;
    for (const auto& c : cases) {
        const auto a = c["a"].get<std::vector<double>>();
        const auto b = c["b"].get<std::vector<double>>();
        const auto r = t_test_independent(a, b);
        worst = std::max(worst, std::fabs(r.p - c["p"].get<double>()));
        worst = std::max(worst, std::fabs(r.t - c["t"].get<double>()) > 1e-9 ? 1.0 : 0.0);
    }
    const std::vector<double> x = {1, 2, 3, 4, 5}, y = {2, 3, 4, 5, 6};
    const auto ref = t_test_independent(x, y);
    const bool ref_ok = ref.t == -1.0 && std::fabs(ref.p - 0.3466) <= 1e-4;
    return {cases.size() == 10 && worst <= 1e-4 && ref_ok,
            std::to_string(cases.size()) + " pairs, max |dp| = " + fmt("%.2e", worst) + ", [1..5] vs [2..6]: t=" +
                fmt("%.4f", ref.t) + " p=" + fmt("%.6f", ref.p)};
}

Outcome adaptation_soundness() {
    const auto corpus = make_synthetic_corpus();  // 1000 passages, 100 queries
    const auto idx = InvertedIndex::build(corpus.documents());
    auto run = [&] {
        RuleBasedReformulator rule;
        const auto result = adapt_marco(corpus, idx, rule);
        // 100 queries at 80/10/10 leave 10 targets in the smaller splits, so 9 is the
        // largest negatives-per-positive that every split can supply
        PairOptions po;
        po.negatives_per_positive = 9;
        const auto pairs = assemble_pairs(result.samples, po);
        std::string pair_text;
        for (const auto& p : pairs) pair_text += pair_to_json(p).dump() + "\n";
        return std::tuple{result, pairs, format_samples(result.samples), pair_text};
    };
    const auto [result, pairs, samples_a, pairs_a] = run();
    const auto [result_b, pairs_b, samples_b, pairs_b_text] = run();

    std::size_t excluded_ok = 0;
    for (const auto& s : result.samples) {
        bool ok = s.source_doc_id.has_value();
        for (const auto& rel : corpus.relevant_docs(s.sample_id)) ok = ok && *s.source_doc_id != rel;
        excluded_ok += ok;
    }
    std::map<std::string, Split> split_of_target;
    for (const auto& s : result.samples) split_of_target[*s.target_doc_id] = s.split;
    std::size_t negatives = 0, hygienic = 0;
    for (const auto& p : pairs) {
        if (p.label != PairLabel::Negative) continue;
        ++negatives;
        const auto it = split_of_target.find(p.target_doc_id);
        hygienic += it != split_of_target.end() && it->second == p.split;
    }
    const bool identical = samples_a == samples_b && pairs_a == pairs_b_text;
    const bool pass = !result.samples.empty() && excluded_ok == result.samples.size() && negatives > 0 &&
                      hygienic == negatives && identical;
    return {pass, std::to_string(excluded_ok) + "/" + std::to_string(result.samples.size()) +
                      " samples pass answer exclusion (" + std::to_string(result.skipped.size()) + " skipped), " +
                      std::to_string(hygienic) + "/" + std::to_string(negatives) + " negatives split-hygienic, rerun " +
                      (identical ? "byte-identical" : "DIFFERS")};
}

Outcome self_retrieval() {
    const auto corpus = make_synthetic_corpus();
    const auto idx = InvertedIndex::build(corpus.documents());
    RuleBasedReformulator rule;
    const auto samples = adapt_marco(corpus, idx, rule).samples;
    // pool = the whole 1,000-passage collection, every split evaluated
    const RetrievalPipeline pipeline(corpus.documents(), PipelineConfig{}, ProviderRegistry());
    std::map<std::string, RankedList> runs;
    std::map<std::string, std::set<std::string>> targets;
    for (const auto& s : samples) {
        runs[s.sample_id] = pipeline.retrieve(build_variant(s, VariantKind::Question), 10);
        targets[s.sample_id] = {*s.target_doc_id};
    }
    const auto r = build_retrieval_report("self", runs, targets, 10);
    const double m = r.aggregate.at("mrr@10");
    return {m >= 0.95 && samples.size() >= 90, "MRR@10 = " + fmt("%.4f", m) + " over " + std::to_string(samples.size()) +
                                                   " questions, pool of " + std::to_string(corpus.documents().size())};
}

Outcome loss_functions() {
    std::size_t fixtures_ok = 0;
    const EmbeddingVector a{{0.3, 0.4}}, u{{1, 0}}, v08{{0.8, 0.6}}, v02{{0.2, std::sqrt(0.96)}};
    fixtures_ok += cosine_embedding_loss(a, a, PairLabel::Positive) == 0.0;
    fixtures_ok += std::fabs(cosine_embedding_loss(u, v08, PairLabel::Negative, {0.5}) - 0.3) < 1e-12;
    fixtures_ok += cosine_embedding_loss(u, v02, PairLabel::Negative, {0.5}) == 0.0;
    fixtures_ok += mse_label_loss(1.0, PairLabel::Positive) == 0.0;
    fixtures_ok += mse_label_loss(0.0, PairLabel::Positive) == 1.0;
    fixtures_ok += std::fabs(mse_label_loss(0.3, PairLabel::Negative) - 0.09) < 1e-15;
    fixtures_ok += std::fabs(cosine_similarity(EmbeddingVector{{1, 1}}, u) - 1 / std::sqrt(2.0)) < 1e-15;

    std::mt19937_64 rng(77);
    std::normal_distribution<double> n(0, 1);
    std::uniform_real_distribution<double> m(0, 1);
    std::size_t monotone = 0;
    for (int i = 0; i < 1000; ++i) {
        EmbeddingVector x, y;
        for (int d = 0; d < 16; ++d) {
            x.values.push_back(n(rng));
            y.values.push_back(n(rng));
        }
        double lo = m(rng), hi = m(rng);
        if (lo > hi) std::swap(lo, hi);
        monotone += cosine_embedding_loss(x, y, PairLabel::Negative, {lo}) >=
                    cosine_embedding_loss(x, y, PairLabel::Negative, {hi});
    }
    return {fixtures_ok == 7 && monotone == 1000,
            std::to_string(fixtures_ok) + "/7 fixtures exact, margin monotone on " + std::to_string(monotone) + "/1000 pairs"};
}

ExperimentConfig grid_config(const fs::path& dir) {
    SynthOptions so;
    so.passages = 400;
    so.queries = 80;
    const auto corpus = make_synthetic_corpus(so);
    write_synthetic_corpus(corpus, dir);
    RuleBasedReformulator rule;
    write_samples(dir / "samples.jsonl", adapt_marco(corpus, InvertedIndex::build(corpus.documents()), rule).samples);
    return experiment_from_json(Json::parse(R"({
      "dataset": {"samples": "samples.jsonl", "passages": "passages.tsv"},
      "tasks": ["gen", "ret"],
      "variants": ["question", "context_intent", "source_intent", "context", "source"],
      "generators": {"offline": {"provider": "offline"}},
      "pipelines": {"bm25": {"first_stage": {"kind": "lexical"}},
                    "bi-encoder": {"first_stage": {"kind": "embedding"}},
                    "bm25+cross": {"first_stage": {"kind": "lexical"}, "reranker": {"kind": "cross"}, "depth": 20}},
      "eval_split": "train", "output_dir": "grid"})"),
                                dir);
}

Outcome grid_reproducibility() {
    const auto dir = scratch("grid");
    const auto cfg = grid_config(dir);
    const auto m1 = run_grid(cfg);
    const auto first = tree_hashes(cfg.output_dir);
    fs::remove_all(cfg.output_dir);
    run_grid(cfg);
    const auto second = tree_hashes(cfg.output_dir);
    const bool identical = first == second && !first.empty();

    auto pairs_of = [&](ResearchQuestion rq) {
        std::set<std::pair<int, int>> out;
        for (const auto& c : compare_research_question(m1, rq))
            out.emplace(variant_number(m1.cell(c.cell_a).variant), variant_number(m1.cell(c.cell_b).variant));
        return out;
    };
    const auto rq1 = pairs_of(ResearchQuestion::Rq1);
    const auto rq2 = pairs_of(ResearchQuestion::Rq2);
    const bool rq_ok = rq1 == std::set<std::pair<int, int>>{{2, 3}, {4, 5}} &&
                       rq2 == std::set<std::pair<int, int>>{{2, 4}, {3, 5}};
    fs::remove_all(dir);
    std::string detail = std::to_string(first.size()) + " files " + (identical ? "byte-identical" : "DIFFER") +
                         " across two runs; rq1 pairs";
    for (const auto& [a, b] : rq1) detail += " (" + std::to_string(a) + ")v(" + std::to_string(b) + ")";
    detail += ", rq2 pairs";
    for (const auto& [a, b] : rq2) detail += " (" + std::to_string(a) + ")v(" + std::to_string(b) + ")";
    return {identical && rq_ok, detail};
}

Outcome service_contract() {
    const auto corpus = make_synthetic_corpus();
    // Fallback-only: no live endpoint anywhere, every provider is the offline fallback.
    ServiceOptions opts;
    const PredictionService svc(corpus.documents(), opts, ProviderRegistry());
    HttpService http(svc);
    const int port = http.bind("127.0.0.1", 0);
    std::thread t([&] { http.listen(); });
    http.server().wait_until_ready();
    httplib::Client client("127.0.0.1", port);
    client.set_keep_alive(true);
    client.set_tcp_nodelay(true);

    const char* expected[8] = {nullptr, "source", "context", "context", nullptr, "source_intent", "context_intent",
                               "context_intent"};
    int routing_ok = 0;
    const auto& q0 = corpus.queries().front().text;
    for (int mask = 0; mask < 8; ++mask) {
        Json req = Json::object();
        if (mask & 1) req["source"] = corpus.documents()[5].text;
        if (mask & 2) req["context"] = q0;
        if (mask & 4) req["intent"] = "when";
        const auto res = client.Post("/api/predict", req.dump(), "application/json");
        if (!res) continue;
        const auto body = Json::parse(res->body);
        if (expected[mask] == nullptr) routing_ok += res->status == 400 && body.contains("code");
        else routing_ok += res->status == 200 && body["variant_used"] == expected[mask];
    }

    std::vector<double> ms;
    for (int i = 0; i < 300; ++i) {
        const auto& q = corpus.queries()[static_cast<std::size_t>(i) % corpus.queries().size()];
        const Json req = {{"context", q.text}, {"intent", "when"}, {"source", corpus.documents()[i % 1000].text}};
        const auto start = Clock::now();
        const auto res = client.Post("/api/predict", req.dump(), "application/json");
        ms.push_back(seconds_since(start) * 1000.0);
        if (!res || res->status != 200) ms.back() = 1e9;
    }
    http.stop();
    t.join();
    std::sort(ms.begin(), ms.end());
    const double p99 = ms[static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(ms.size()))) - 1];
    return {routing_ok == 8 && p99 < 150.0, std::to_string(routing_ok) + "/8 routing combinations, p99 = " +
                                                fmt("%.2f ms", p99) + " over 300 requests, 1000 passages"};
}

void directional_replication() {
    const char* path = std::getenv("INFONEED_LIVE_GRID");
    if (!path || !*path) {
        std::printf("SKIP  directional replication with live providers  (set INFONEED_LIVE_GRID to an experiment "
                    "config that uses real endpoints)\n");
        return;
    }
    try {
        const auto cfg = load_experiment_config(path);
        const auto m = run_grid(cfg);
        std::string detail;
        bool all = true;
        for (const auto& c : m.cells) {
            if (c.status != "done" || c.variant != VariantKind::ContextIntent) continue;
            const std::string metric = c.task == Task::Generation ? "rougeL" : "mrr@" + std::to_string(cfg.cutoff);
            for (const auto other : {VariantKind::Context, VariantKind::SourceIntent}) {
                for (const auto& o : m.cells) {
                    if (o.task != c.task || o.model != c.model || o.variant != other || o.status != "done") continue;
                    const bool ge = c.aggregate.at(metric) >= o.aggregate.at(metric);
                    all = all && ge;
                    detail += c.model + " " + metric + " ContextIntent " + fmt("%.4f", c.aggregate.at(metric)) +
                              (ge ? " >= " : " < ") + std::string(display_name(other)) + " " +
                              fmt("%.4f", o.aggregate.at(metric)) + "; ";
                }
            }
        }
        std::printf("%s  directional replication with live providers  (reported, not gating: %s)\n",
                    all ? "PASS" : "FAIL", detail.c_str());
    } catch (const std::exception& e) {
        std::printf("FAIL  directional replication with live providers  (reported, not gating: %s)\n", e.what());
    }
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    report("metric oracle suite: BLEU-1..4, ROUGE-1/2/L, R@10, MRR within 1e-9, < 5 s", metric_oracle);
    report("BM25 oracle equivalence: 200 random corpora, order and scores within 1e-9, < 30 s", bm25_oracle);
    report("t-test fixtures: 10 pairs within |dp| <= 1e-4", ttest_fixtures);
    report("adaptation soundness: answer exclusion, split hygiene, byte-identical rerun", adaptation_soundness);
    report("self-retrieval: lexical pipeline, Question variant, MRR@10 >= 0.95", self_retrieval);
    report("loss functions: fixtures exact, margin monotonicity over 1000 pairs", loss_functions);
    report("grid reproducibility: identical reruns, RQ1/RQ2 comparison pairs", grid_reproducibility);
    report("service contract: routing over HTTP on a fallback-only server, p99 predict < 150 ms", service_contract);
    directional_replication();
    return failures == 0 ? 0 : 1;
}
