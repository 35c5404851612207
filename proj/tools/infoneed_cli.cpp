// Command-line front end for the library: corpus tools, adaptation,
// prediction, evaluation, grid runs and the HTTP service.
#include <csignal>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "infoneed/adaptation.hpp"
#include "infoneed/error.hpp"
#include "infoneed/evaluation.hpp"
#include "infoneed/experiment.hpp"
#include "infoneed/index.hpp"
#include "infoneed/parallel.hpp"
#include "infoneed/prediction.hpp"
#include "infoneed/scorers.hpp"
#include "infoneed/service.hpp"
#include "infoneed/synth.hpp"

using namespace infoneed;
namespace fs = std::filesystem;

namespace {

ProviderRegistry registry_from(const std::string& config_path) {
    if (config_path.empty()) return ProviderRegistry();
    return ProviderRegistry(load_provider_config(config_path));
}

std::unique_ptr<Reformulator> make_reformulator(const std::string& kind, const ProviderRegistry& reg,
                                                const std::string& provider) {
    if (kind == "rule") return std::make_unique<RuleBasedReformulator>();
    if (kind == "llm") return std::make_unique<ProviderReformulator>(reg.get(provider));
    throw ValidationError("unknown reformulator '" + kind + "' (expected rule or llm)");
}

void report_adaptation(const AdaptationResult& r, const std::string& out, const std::string& audit) {
    write_samples(out, r.samples);
    if (!audit.empty()) write_audit(audit, r.audit);
    for (const auto& s : r.skipped) spdlog::warn("skipped {}: {}", s.id, s.reason);
    std::printf("%zu samples written, %zu flagged, %zu skipped\n", r.samples.size(), r.audit.size(), r.skipped.size());
}

std::map<std::string, std::set<std::string>> targets_of(const std::vector<Sample>& samples,
                                                        const std::set<std::string>& wanted) {
    std::map<std::string, std::set<std::string>> out;
    for (const auto& s : samples)
        if (s.target_doc_id && wanted.contains(s.sample_id)) out[s.sample_id] = {*s.target_doc_id};
    return out;
}

HttpService* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"infoneed: information-need prediction toolkit"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");
    app.parse_complete_callback([&] { spdlog::set_level(spdlog::level::from_str(log_level)); });

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic passage/query/judgment collection");
    SynthOptions so;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--passages", so.passages);
    synth->add_option("--queries", so.queries);
    synth->add_option("--seed", so.seed);
    synth->callback([&] {
        write_synthetic_corpus(make_synthetic_corpus(so), synth_out);
        std::printf("wrote %s/{passages.tsv,queries.tsv,qrels.txt}\n", synth_out.c_str());
    });

    // index
    auto* index = app.add_subcommand("index", "Build or query a BM25 index");
    index->require_subcommand(1);
    auto* ib = index->add_subcommand("build", "Index a passages TSV");
    std::string ib_passages, ib_out;
    Bm25Params params;
    ib->add_option("--passages", ib_passages)->required();
    ib->add_option("--out", ib_out)->required();
    ib->add_option("--k1", params.k1);
    ib->add_option("--b", params.b);
    ib->callback([&] {
        const auto idx = InvertedIndex::build(load_passages(ib_passages), params);
        idx.save(ib_out);
        std::printf("%zu docs, %zu terms\n", idx.doc_count(), idx.term_count());
    });
    auto* is = index->add_subcommand("search", "Top-k search");
    std::string is_index, is_query;
    std::size_t is_k = 10;
    is->add_option("--index", is_index)->required();
    is->add_option("--query", is_query)->required();
    is->add_option("-k", is_k);
    is->callback([&] {
        const auto idx = InvertedIndex::load(is_index);
        std::size_t rank = 1;
        for (const auto& e : idx.search(is_query, is_k).entries)
            std::printf("%zu\t%s\t%.6f\n", rank++, e.doc_id.c_str(), e.score);
    });

    // splits
    auto* splits = app.add_subcommand("splits", "Assign train/validation/test splits to query ids");
    std::string sp_queries, sp_out;
    std::uint64_t sp_seed = 13;
    SplitRatios ratios;
    splits->add_option("--queries", sp_queries)->required();
    splits->add_option("--out", sp_out)->required();
    splits->add_option("--seed", sp_seed);
    splits->add_option("--validation", ratios.validation);
    splits->add_option("--test", ratios.test);
    splits->callback([&] {
        ratios.train = 1.0 - ratios.validation - ratios.test;
        std::vector<std::string> ids;
        for (const auto& q : load_queries(sp_queries)) ids.push_back(q.query_id);
        write_splits(sp_out, assign_splits(ids, ratios, sp_seed));
    });

    // adapt
    auto* adapt = app.add_subcommand("adapt", "Convert a dataset into five-field samples");
    adapt->require_subcommand(1);
    std::string reform = "rule", provider_config, reform_provider = "offline", ad_out, ad_audit;
    std::size_t parallelism = 1;
    auto* am = adapt->add_subcommand("marco", "Retrieval collection (passages/queries/qrels)");
    std::string am_passages, am_queries, am_qrels;
    MarcoOptions mo;
    am->add_option("--passages", am_passages)->required();
    am->add_option("--queries", am_queries)->required();
    am->add_option("--qrels", am_qrels)->required();
    am->add_option("--max-queries", mo.max_queries);
    am->add_option("--seed", mo.seed);
    am->add_option("--source-depth", mo.source_depth);
    auto* ai = adapt->add_subcommand("inquisitive", "Span/question JSONL");
    std::string ai_input;
    ai->add_option("--input", ai_input)->required();
    for (auto* sc : {am, ai}) {
        sc->add_option("--out", ad_out)->required();
        sc->add_option("--audit", ad_audit, "Flagged reformulations (JSONL)");
        sc->add_option("--reformulator", reform, "rule|llm");
        sc->add_option("--provider-config", provider_config);
        sc->add_option("--provider", reform_provider, "Provider name for the llm reformulator");
        sc->add_option("--parallelism", parallelism);
    }
    am->callback([&] {
        const auto corpus = load_collection(am_passages, am_queries, am_qrels);
        const auto idx = InvertedIndex::build(corpus.documents());
        const auto reg = registry_from(provider_config);
        auto r = make_reformulator(reform, reg, reform_provider);
        mo.parallelism = parallelism;
        report_adaptation(adapt_marco(corpus, idx, *r, mo), ad_out, ad_audit);
    });
    ai->callback([&] {
        const auto reg = registry_from(provider_config);
        auto r = make_reformulator(reform, reg, reform_provider);
        const auto records = load_inquisitive(ai_input);
        report_adaptation(adapt_inquisitive(records, *r, parallelism), ad_out, ad_audit);
    });

    // pairs
    auto* pairs = app.add_subcommand("pairs", "Training pairs for input/passage scorers");
    pairs->require_subcommand(1);
    auto* pb = pairs->add_subcommand("build", "Positives plus sampled negatives");
    std::string pb_samples, pb_out, pb_variant = "context_intent";
    PairOptions po;
    pb->add_option("--samples", pb_samples)->required();
    pb->add_option("--out", pb_out)->required();
    pb->add_option("--negatives", po.negatives_per_positive);
    pb->add_option("--seed", po.seed);
    pb->add_option("--variant", pb_variant);
    pb->callback([&] {
        po.variant = parse_variant(pb_variant);
        const auto p = assemble_pairs(read_samples(pb_samples), po);
        write_pairs(pb_out, p);
        std::printf("%zu pairs\n", p.size());
    });
    auto* pe = pairs->add_subcommand("export", "Join pairs with passage text");
    std::string pe_pairs, pe_passages, pe_out, pe_format = "jsonl";
    pe->add_option("--pairs", pe_pairs)->required();
    pe->add_option("--passages", pe_passages)->required();
    pe->add_option("--out", pe_out)->required();
    pe->add_option("--format", pe_format, "jsonl|tsv");
    pe->callback([&] {
        const auto corpus = Corpus::create(load_passages(pe_passages));
        const auto n = export_training_pairs(read_pairs(pe_pairs), corpus, parse_export_format(pe_format), pe_out);
        std::printf("%zu rows\n", n);
    });

    // predict
    auto* predict = app.add_subcommand("predict", "Run one prediction path over samples");
    predict->require_subcommand(1);
    std::string pr_samples, pr_out, pr_variant = "context_intent", pr_split = "validation", pr_sep = "|";
    auto* pg = predict->add_subcommand("generate", "Question generation");
    std::string pg_template, pg_provider = "offline";
    int pg_max_tokens = 64;
    double pg_temperature = 0.0;
    pg->add_option("--template", pg_template, "Prompt template file");
    pg->add_option("--provider", pg_provider);
    pg->add_option("--max-tokens", pg_max_tokens);
    pg->add_option("--temperature", pg_temperature);
    auto* prr = predict->add_subcommand("retrieve", "Passage retrieval (TREC run output)");
    std::string prr_passages, prr_pipeline;
    std::size_t prr_k = 10;
    prr->add_option("--passages", prr_passages)->required();
    prr->add_option("--pipeline", prr_pipeline, "Pipeline config JSON (default: lexical)");
    prr->add_option("-k", prr_k);
    for (auto* sc : {pg, prr}) {
        sc->add_option("--samples", pr_samples)->required();
        sc->add_option("--out", pr_out)->required();
        sc->add_option("--variant", pr_variant);
        sc->add_option("--split", pr_split);
        sc->add_option("--separator", pr_sep);
        sc->add_option("--provider-config", provider_config);
        sc->add_option("--parallelism", parallelism);
    }
    auto selected = [&] {
        const auto split = parse_split(pr_split);
        std::vector<Sample> out;
        for (auto& s : read_samples(pr_samples))
            if (s.split == split) out.push_back(std::move(s));
        return out;
    };
    pg->callback([&] {
        const auto reg = registry_from(provider_config);
        auto provider = reg.get(pg_provider);
        const auto prompt = pg_template.empty() ? PromptTemplate::default_generation() : PromptTemplate::from_file(pg_template);
        const auto variant = parse_variant(pr_variant);
        if (const auto why = invalid_cell_reason(Task::Generation, variant)) throw ValidationError(*why);
        const auto samples = selected();
        GenerationOptions go;
        go.max_tokens = pg_max_tokens;
        go.temperature = pg_temperature;
        std::vector<GeneratedQuestion> rows(samples.size());
        parallel_for(samples.size(), parallelism, [&](std::size_t i) {
            const auto g = generate_question(build_variant(samples[i], variant, {pr_sep}), *provider, prompt, go);
            rows[i] = {samples[i].sample_id, variant, g.text, g.provider};
        });
        write_generations(pr_out, rows);
    });
    prr->callback([&] {
        const auto reg = registry_from(provider_config);
        const auto pc = prr_pipeline.empty() ? PipelineConfig{} : load_pipeline_config(prr_pipeline);
        const auto all = read_samples(pr_samples);
        const auto ids = build_candidate_pool(all, std::set<Split>(pc.pool_splits.begin(), pc.pool_splits.end()));
        std::map<std::string, Document> by_id;
        for (auto& d : load_passages(prr_passages)) by_id.emplace(d.doc_id, std::move(d));
        std::vector<Document> pool;
        for (const auto& id : ids) {
            const auto it = by_id.find(id);
            if (it == by_id.end()) throw ValidationError("target \"" + id + "\" missing from passages file");
            pool.push_back(it->second);
        }
        const RetrievalPipeline pipeline(std::move(pool), pc, reg);
        const auto variant = parse_variant(pr_variant);
        const auto samples = selected();
        std::vector<RankedList> lists(samples.size());
        parallel_for(samples.size(), parallelism, [&](std::size_t i) {
            lists[i] = pipeline.retrieve(build_variant(samples[i], variant, {pr_sep}), prr_k);
        });
        write_trec_run(pr_out, lists, to_string(variant));
    });

    // eval
    auto* eval = app.add_subcommand("eval", "Metric reports and significance tests");
    eval->require_subcommand(1);
    std::string ev_samples, ev_out, ev_tag;
    auto* eg = eval->add_subcommand("gen", "BLEU/ROUGE over generated questions");
    std::string eg_gen, eg_bleu = "sentence";
    bool eg_smooth = false, eg_recall = false;
    eg->add_option("--generations", eg_gen)->required();
    eg->add_option("--bleu", eg_bleu, "sentence|corpus");
    eg->add_flag("--smooth", eg_smooth, "Add-epsilon smoothing");
    eg->add_flag("--rouge-recall", eg_recall, "ROUGE recall instead of F1");
    auto* er = eval->add_subcommand("ret", "Recall@k/MRR@k over a TREC run");
    std::string er_run;
    std::size_t er_cutoff = 10;
    er->add_option("--run", er_run)->required();
    er->add_option("--cutoff", er_cutoff);
    for (auto* sc : {eg, er}) {
        sc->add_option("--samples", ev_samples)->required();
        sc->add_option("--out", ev_out, "Report JSON path");
        sc->add_option("--tag", ev_tag, "Run tag");
    }
    auto emit = [&](const MetricReport& r) {
        if (!ev_out.empty()) save_report(ev_out, r);
        for (const auto& [k, v] : r.aggregate) std::printf("%-12s %.4f\n", k.c_str(), v);
    };
    eg->callback([&] {
        std::map<std::string, std::string> refs;
        for (const auto& s : read_samples(ev_samples)) refs[s.sample_id] = s.question;
        std::vector<GenerationEvalRecord> recs;
        for (const auto& g : read_generations(eg_gen)) {
            const auto it = refs.find(g.sample_id);
            if (it == refs.end()) throw ValidationError("generation for unknown sample '" + g.sample_id + "'");
            recs.push_back({g.sample_id, g.generated_question, it->second});
        }
        GenerationEvalOptions go;
        go.bleu_mode = eg_bleu == "corpus" ? BleuMode::Corpus : BleuMode::Sentence;
        go.smoothing = eg_smooth ? BleuSmoothing::AddEpsilon : BleuSmoothing::None;
        go.rouge_mode = eg_recall ? RougeMode::Recall : RougeMode::F1;
        emit(build_generation_report(ev_tag.empty() ? eg_gen : ev_tag, recs, go));
    });
    er->callback([&] {
        const auto runs = read_trec_run(er_run);
        std::set<std::string> wanted;
        for (const auto& [q, _] : runs) wanted.insert(q);
        emit(build_retrieval_report(ev_tag.empty() ? er_run : ev_tag, runs, targets_of(read_samples(ev_samples), wanted),
                                    er_cutoff));
    });
    auto* ec = eval->add_subcommand("compare", "Paired-by-id t-tests between two reports");
    std::string ec_a, ec_b;
    ec->add_option("a", ec_a)->required();
    ec->add_option("b", ec_b)->required();
    ec->callback([&] {
        for (const auto& r : compare_reports(load_report(ec_a), load_report(ec_b)))
            std::printf("%-10s t=%+.4f p=%.4g%s\n", r.metric.c_str(), r.t, r.p,
                        r.degenerate_variance ? " (degenerate variance)" : "");
    });

    // grid
    auto* grid = app.add_subcommand("grid", "Experiment grid");
    grid->require_subcommand(1);
    auto* gr = grid->add_subcommand("run", "Run all missing cells");
    std::string gr_config;
    gr->add_option("config,--config", gr_config, "Experiment config JSON")->required();
    gr->callback([&] {
        GridStats st;
        const auto m = run_grid(load_experiment_config(gr_config), &st);
        std::printf("%zu cells: %zu executed, %zu reused, %zu skipped\n", m.cells.size(), st.executed, st.reused,
                    st.skipped);
    });
    std::string g_manifest;
    auto* gt = grid->add_subcommand("table", "Render result tables");
    std::string gt_task;
    gt->add_option("manifest,--manifest", g_manifest)->required();
    gt->add_option("--task", gt_task, "generation|retrieval (default both)");
    gt->callback([&] {
        const auto m = load_manifest(g_manifest);
        std::set<Task> tasks;
        for (const auto& c : m.cells) tasks.insert(c.task);
        for (const auto t : tasks) {
            if (!gt_task.empty() && parse_task(gt_task) != t) continue;
            std::cout << render_grid_table(m, t) << "\n";
        }
    });
    auto* gc = grid->add_subcommand("compare", "Research-question significance tests");
    bool rq1 = false, rq2 = false;
    gc->add_option("manifest,--manifest", g_manifest)->required();
    auto* rq1_flag = gc->add_flag("--rq1", rq1, "Context comparisons: (2) vs (3), (4) vs (5)");
    gc->add_flag("--rq2", rq2, "Intent comparisons: (2) vs (4), (3) vs (5)")->excludes(rq1_flag);
    gc->callback([&] {
        if (!rq1 && !rq2) throw CLI::ValidationError("--rq1 or --rq2 is required");
        const auto m = load_manifest(g_manifest);
        std::cout << render_comparisons(compare_research_question(m, rq1 ? ResearchQuestion::Rq1 : ResearchQuestion::Rq2));
    });
    auto* gv = grid->add_subcommand("verify", "Check artifact hashes");
    gv->add_option("manifest,--manifest", g_manifest)->required();
    gv->callback([&] {
        const auto problems = verify_manifest(load_manifest(g_manifest));
        for (const auto& p : problems) std::printf("%s\n", p.c_str());
        if (!problems.empty()) throw Error(std::to_string(problems.size()) + " problem(s)");
    });

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP prediction service");
    std::string sv_host = "127.0.0.1", sv_passages, sv_pipeline, sv_static, sv_generator = "offline";
    int sv_port = 8080;
    bool sv_debug = false;
    serve->add_option("--host", sv_host);
    serve->add_option("--port", sv_port);
    serve->add_option("--passages", sv_passages, "Passages TSV (optional)");
    serve->add_option("--pipeline", sv_pipeline);
    serve->add_option("--provider-config", provider_config);
    serve->add_option("--generator", sv_generator);
    serve->add_option("--static", sv_static, "Directory served at /");
    serve->add_flag("--log-content", sv_debug, "Log request text at debug level");
    serve->callback([&] {
        ServiceOptions opts;
        if (!sv_pipeline.empty()) opts.pipeline = load_pipeline_config(sv_pipeline);
        opts.generator = sv_generator;
        opts.log_content = sv_debug;
        PredictionService svc(sv_passages.empty() ? std::vector<Document>{} : load_passages(sv_passages), opts,
                              registry_from(provider_config));
        HttpService http(svc, sv_static);
        const int port = http.bind(sv_host, sv_port);
        g_server = &http;
        std::signal(SIGINT, [](int) {
            if (g_server) g_server->stop();
        });
        spdlog::info("listening on {}:{} ({} passages)", sv_host, port, svc.corpus_size());
        http.listen();
        g_server = nullptr;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ParseError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
