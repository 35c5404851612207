#include "infoneed/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <set>

#include <spdlog/spdlog.h>

#include "infoneed/error.hpp"
#include "infoneed/hash.hpp"
#include "infoneed/parallel.hpp"

namespace infoneed {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

Json generator_to_json(const GeneratorConfig& g) {
    return Json{{"provider", g.provider},
                {"template", g.template_text},
                {"max_tokens", g.max_tokens},
                {"temperature", g.temperature}};
}

}  // namespace

ExperimentConfig experiment_from_json(const Json& j, const fs::path& base_dir) {
    ExperimentConfig c;
    const auto& ds = j.at("dataset");
    c.samples = resolve(base_dir, ds.at("samples").get<std::string>());
    if (ds.contains("passages")) c.passages = resolve(base_dir, ds.at("passages").get<std::string>());
    for (const auto& t : j.at("tasks")) c.tasks.push_back(parse_task(t.get<std::string>()));
    for (const auto& v : j.at("variants")) c.variants.push_back(parse_variant(v.get<std::string>()));
    if (j.contains("generators")) {
        for (const auto& [name, g] : j["generators"].items()) {
            GeneratorConfig gc;
            gc.provider = g.value("provider", gc.provider);
            if (g.contains("template_file"))
                gc.template_text = read_file(resolve(base_dir, g["template_file"].get<std::string>()));
            gc.template_text = g.value("template", gc.template_text);
            gc.max_tokens = g.value("max_tokens", gc.max_tokens);
            gc.temperature = g.value("temperature", gc.temperature);
            c.generators.emplace(name, gc);
        }
    }
    if (j.contains("pipelines"))
        for (const auto& [name, p] : j["pipelines"].items()) c.pipelines.emplace(name, pipeline_from_json(p));
    if (j.contains("providers"))
        for (const auto& p : j["providers"]) c.providers.push_back(endpoint_from_json(p));
    if (j.contains("providers_file")) {
        const auto more = load_provider_config(resolve(base_dir, j["providers_file"].get<std::string>()));
        c.providers.insert(c.providers.end(), more.begin(), more.end());
    }
    c.eval_split = parse_split(j.value("eval_split", std::string("validation")));
    c.cutoff = j.value("cutoff", c.cutoff);
    c.seed = j.value("seed", c.seed);
    c.output_dir = resolve(base_dir, j.value("output_dir", std::string("grid")));
    c.parallelism = j.value("parallelism", c.parallelism);
    c.separator = j.value("separator", c.separator);

    if (c.tasks.empty()) throw ValidationError("experiment config: at least one task is required");
    if (c.variants.empty()) throw ValidationError("experiment config: at least one variant is required");
    for (const auto t : c.tasks) {
        if (t == Task::Generation && c.generators.empty())
            throw ValidationError("experiment config: generation task needs at least one generator");
        if (t == Task::Retrieval && c.pipelines.empty())
            throw ValidationError("experiment config: retrieval task needs at least one pipeline");
        if (t == Task::Retrieval && c.passages.empty())
            throw ValidationError("experiment config: retrieval task needs dataset.passages");
    }
    if (c.cutoff == 0) throw ValidationError("experiment config: cutoff must be >= 1");
    return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    return experiment_from_json(j, path.parent_path());
}

std::optional<std::string> invalid_cell_reason(Task task, VariantKind variant) {
    if (task == Task::Generation && variant == VariantKind::Question)
        return "the Question input is only valid for retrieval; it is the generation target";
    return std::nullopt;
}

const CellRecord& RunManifest::cell(const std::string& id) const {
    for (const auto& c : cells)
        if (c.id == id) return c;
    throw ValidationError("manifest has no cell '" + id + "'");
}

namespace {

Json cell_to_json(const CellRecord& c) {
    Json j{{"id", c.id},
           {"task", to_string(c.task)},
           {"variant", to_string(c.variant)},
           {"model", c.model},
           {"key", c.key},
           {"status", c.status}};
    if (!c.reason.empty()) j["reason"] = c.reason;
    Json artifacts = Json::object();
    for (const auto& [name, a] : c.artifacts) artifacts[name] = {{"path", a.path}, {"sha256", a.sha256}};
    j["artifacts"] = artifacts;
    Json agg = Json::object();
    for (const auto& [k, v] : c.aggregate) agg[k] = v;
    j["aggregate"] = agg;
    return j;
}

CellRecord cell_from_json(const Json& j) {
    CellRecord c;
    c.id = j.at("id").get<std::string>();
    c.task = parse_task(j.at("task").get<std::string>());
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.model = j.at("model").get<std::string>();
    c.key = j.at("key").get<std::string>();
    c.status = j.at("status").get<std::string>();
    c.reason = j.value("reason", std::string());
    const Json artifacts = j.value("artifacts", Json::object());
    for (const auto& [name, a] : artifacts.items())
        c.artifacts[name] = {a.at("path").get<std::string>(), a.at("sha256").get<std::string>()};
    const Json aggregate = j.value("aggregate", Json::object());
    for (const auto& [k, v] : aggregate.items()) c.aggregate[k] = v.get<double>();
    return c;
}

}  // namespace

Json manifest_to_json(const RunManifest& m) {
    Json j;
    j["config_hash"] = m.config_hash;
    Json inputs = Json::object();
    for (const auto& [k, v] : m.inputs) inputs[k] = v;
    j["inputs"] = inputs;
    j["cells"] = Json::array();
    for (const auto& c : m.cells) j["cells"].push_back(cell_to_json(c));
    return j;
}

RunManifest load_manifest(const fs::path& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    RunManifest m;
    m.dir = path.parent_path();
    m.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& [k, v] : j.at("inputs").items()) m.inputs[k] = v.get<std::string>();
    for (const auto& c : j.at("cells")) m.cells.push_back(cell_from_json(c));
    return m;
}

std::vector<std::string> verify_manifest(const RunManifest& manifest) {
    std::vector<std::string> problems;
    for (const auto& c : manifest.cells) {
        for (const auto& [name, a] : c.artifacts) {
            const auto path = manifest.dir / a.path;
            if (!fs::exists(path)) {
                problems.push_back(c.id + ": missing " + name + " " + a.path);
            } else if (sha256_file(path) != a.sha256) {
                problems.push_back(c.id + ": hash mismatch for " + name + " " + a.path);
            }
        }
    }
    return problems;
}

namespace {

struct GridContext {
    const ExperimentConfig& config;
    ProviderRegistry providers;
    std::vector<Sample> samples;
    std::vector<Document> passages;
    std::vector<const Sample*> gen_samples;
    std::vector<const Sample*> ret_samples;
    std::map<std::string, std::string> inputs;
};

bool has_all_variants(const Sample& s, const std::vector<VariantKind>& variants, Task task, const VariantOptions& vo) {
    for (const auto v : variants) {
        if (invalid_cell_reason(task, v)) continue;
        try {
            build_variant(s, v, vo);
        } catch (const ValidationError&) {
            return false;
        }
    }
    return true;
}

Json provider_json(const ProviderRegistry&, const ExperimentConfig& cfg, const std::string& name) {
    for (const auto& p : cfg.providers)
        if (p.name == name) return endpoint_to_json(p);
    return Json{{"name", name}, {"kind", "offline"}};
}

std::string cell_key(const GridContext& ctx, Task task, VariantKind variant, const std::string& model) {
    const auto& cfg = ctx.config;
    Json j;
    j["task"] = to_string(task);
    j["variant"] = to_string(variant);
    j["model"] = model;
    if (task == Task::Generation) {
        const auto& g = cfg.generators.at(model);
        j["generator"] = generator_to_json(g);
        j["provider"] = provider_json(ctx.providers, cfg, g.provider);
    } else {
        const auto& p = cfg.pipelines.at(model);
        j["pipeline"] = pipeline_to_json(p);
        Json provs = Json::array();
        if (p.first_stage.kind != ScorerKind::Lexical) provs.push_back(provider_json(ctx.providers, cfg, p.first_stage.provider));
        if (p.reranker && p.reranker->kind != ScorerKind::Lexical)
            provs.push_back(provider_json(ctx.providers, cfg, p.reranker->provider));
        j["providers"] = provs;
    }
    Json inputs = Json::object();
    for (const auto& [k, v] : ctx.inputs) inputs[k] = v;
    j["inputs"] = inputs;
    j["cutoff"] = cfg.cutoff;
    j["seed"] = cfg.seed;
    j["separator"] = cfg.separator;
    j["eval_split"] = to_string(cfg.eval_split);
    return sha256_hex(j.dump());
}

bool cell_is_complete(const fs::path& out, const CellRecord& expected, CellRecord& found) {
    const auto meta = out / "cells" / expected.key.substr(0, 16) / "cell.json";
    if (!fs::exists(meta)) return false;
    try {
        found = cell_from_json(Json::parse(read_file(meta)));
    } catch (const std::exception&) {
        return false;
    }
    if (found.key != expected.key || found.status != "done") return false;
    for (const auto& [name, a] : found.artifacts) {
        const auto p = out / a.path;
        if (!fs::exists(p) || sha256_file(p) != a.sha256) return false;
    }
    return !found.artifacts.empty();
}

void run_generation_cell(const GridContext& ctx, CellRecord& cell, const fs::path& cell_dir, const fs::path& out) {
    const auto& cfg = ctx.config;
    const auto& g = cfg.generators.at(cell.model);
    auto provider = ctx.providers.get(g.provider);
    const PromptTemplate prompt = g.template_text.empty() ? PromptTemplate::default_generation()
                                                          : PromptTemplate(g.template_text);
    const VariantOptions vo{cfg.separator};
    GenerationOptions go;
    go.max_tokens = g.max_tokens;
    go.temperature = g.temperature;
    go.seed = cfg.seed;

    std::vector<GeneratedQuestion> rows(ctx.gen_samples.size());
    parallel_for(rows.size(), cfg.parallelism, [&](std::size_t i) {
        const Sample& s = *ctx.gen_samples[i];
        const auto variant = build_variant(s, cell.variant, vo);
        const auto gen = generate_question(variant, *provider, prompt, go);
        rows[i] = {s.sample_id, cell.variant, gen.text, gen.provider};
    });
    std::vector<GenerationEvalRecord> records;
    for (std::size_t i = 0; i < rows.size(); ++i)
        records.push_back({rows[i].sample_id, rows[i].generated_question, ctx.gen_samples[i]->question});
    const auto report = build_generation_report(cell.id, records);

    const auto pred = cell_dir / "generations.jsonl";
    write_generations(pred, rows);
    save_report(cell_dir / "report.json", report);
    cell.artifacts["predictions"] = {fs::relative(pred, out).generic_string(), sha256_file(pred)};
    cell.artifacts["report"] = {fs::relative(cell_dir / "report.json", out).generic_string(),
                                sha256_file(cell_dir / "report.json")};
    cell.aggregate = report.aggregate;
}

void run_retrieval_cell(const GridContext& ctx, CellRecord& cell, const fs::path& cell_dir, const fs::path& out) {
    const auto& cfg = ctx.config;
    const auto& pc = cfg.pipelines.at(cell.model);
    std::vector<Sample> all(ctx.samples.begin(), ctx.samples.end());
    const auto pool_ids = build_candidate_pool(all, std::set<Split>(pc.pool_splits.begin(), pc.pool_splits.end()));
    std::map<std::string, const Document*> by_id;
    for (const auto& d : ctx.passages) by_id.emplace(d.doc_id, &d);
    std::vector<Document> pool;
    for (const auto& id : pool_ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw ValidationError("target \"" + id + "\" missing from passages file");
        pool.push_back(*it->second);
    }
    const RetrievalPipeline pipeline(std::move(pool), pc, ctx.providers);
    const VariantOptions vo{cfg.separator};

    std::vector<RankedList> lists(ctx.ret_samples.size());
    parallel_for(lists.size(), cfg.parallelism, [&](std::size_t i) {
        lists[i] = pipeline.retrieve(build_variant(*ctx.ret_samples[i], cell.variant, vo), cfg.cutoff);
    });
    std::map<std::string, RankedList> runs;
    std::map<std::string, std::set<std::string>> targets;
    for (std::size_t i = 0; i < lists.size(); ++i) {
        runs.emplace(ctx.ret_samples[i]->sample_id, lists[i]);
        targets[ctx.ret_samples[i]->sample_id] = {*ctx.ret_samples[i]->target_doc_id};
    }
    const auto report = build_retrieval_report(cell.id, runs, targets, cfg.cutoff);

    const auto pred = cell_dir / "run.trec";
    std::string tag = cell.model + "." + std::string(to_string(cell.variant));
    std::replace(tag.begin(), tag.end(), ' ', '_');
    write_trec_run(pred, lists, tag);
    save_report(cell_dir / "report.json", report);
    cell.artifacts["predictions"] = {fs::relative(pred, out).generic_string(), sha256_file(pred)};
    cell.artifacts["report"] = {fs::relative(cell_dir / "report.json", out).generic_string(),
                                sha256_file(cell_dir / "report.json")};
    cell.aggregate = report.aggregate;
}

}  // namespace

RunManifest run_grid(const ExperimentConfig& config, GridStats* stats) {
    GridContext ctx{config, ProviderRegistry(config.providers), read_samples(config.samples), {}, {}, {}, {}};
    ctx.inputs["samples"] = sha256_file(config.samples);
    const bool retrieval = std::find(config.tasks.begin(), config.tasks.end(), Task::Retrieval) != config.tasks.end();
    if (retrieval) {
        ctx.passages = load_passages(config.passages);
        ctx.inputs["passages"] = sha256_file(config.passages);
    }
    std::sort(ctx.samples.begin(), ctx.samples.end(),
              [](const Sample& a, const Sample& b) { return a.sample_id < b.sample_id; });
    const VariantOptions vo{config.separator};
    for (const auto& s : ctx.samples) {
        if (s.split != config.eval_split) continue;
        if (has_all_variants(s, config.variants, Task::Generation, vo)) ctx.gen_samples.push_back(&s);
        if (s.target_doc_id && has_all_variants(s, config.variants, Task::Retrieval, vo)) ctx.ret_samples.push_back(&s);
    }

    // Cell order: task, variant (table order), model name.
    std::vector<VariantKind> variants;
    for (const auto k : kAllVariants)
        if (std::find(config.variants.begin(), config.variants.end(), k) != config.variants.end()) variants.push_back(k);
    std::vector<Task> tasks;
    for (const auto t : {Task::Generation, Task::Retrieval})
        if (std::find(config.tasks.begin(), config.tasks.end(), t) != config.tasks.end()) tasks.push_back(t);

    RunManifest manifest;
    manifest.dir = config.output_dir;
    manifest.inputs = ctx.inputs;
    for (const auto t : tasks) {
        std::vector<std::string> models;
        if (t == Task::Generation)
            for (const auto& [name, _] : config.generators) models.push_back(name);
        else
            for (const auto& [name, _] : config.pipelines) models.push_back(name);
        for (const auto v : variants) {
            for (const auto& m : models) {
                CellRecord c;
                c.task = t;
                c.variant = v;
                c.model = m;
                c.id = std::string(to_string(t)) + "/" + std::string(to_string(v)) + "/" + m;
                c.key = cell_key(ctx, t, v, m);
                if (const auto reason = invalid_cell_reason(t, v)) {
                    c.status = "skipped";
                    c.reason = *reason;
                }
                manifest.cells.push_back(std::move(c));
            }
        }
    }
    {
        Json h = Json::array();
        for (const auto& c : manifest.cells) h.push_back(c.key);
        manifest.config_hash = sha256_hex(h.dump());
    }

    const fs::path out = config.output_dir;
    fs::create_directories(out);
    GridStats local;
    std::mutex stats_mutex;
    // Cells run concurrently; each cell parallelizes its samples too, so the
    // cell-level fan-out is capped separately.
    parallel_for(manifest.cells.size(), std::max<std::size_t>(1, config.parallelism / 2), [&](std::size_t i) {
        CellRecord& cell = manifest.cells[i];
        if (cell.status == "skipped") {
            std::lock_guard lock(stats_mutex);
            ++local.skipped;
            return;
        }
        CellRecord found;
        if (cell_is_complete(out, cell, found)) {
            cell = found;
            std::lock_guard lock(stats_mutex);
            ++local.reused;
            return;
        }
        const auto cell_dir = out / "cells" / cell.key.substr(0, 16);
        fs::create_directories(cell_dir);
        spdlog::info("running cell {}", cell.id);
        if (cell.task == Task::Generation) run_generation_cell(ctx, cell, cell_dir, out);
        else run_retrieval_cell(ctx, cell, cell_dir, out);
        cell.status = "done";
        write_file(cell_dir / "cell.json", cell_to_json(cell).dump(1) + "\n");
        std::lock_guard lock(stats_mutex);
        ++local.executed;
    });
    write_file(out / "manifest.json", manifest_to_json(manifest).dump(1) + "\n");
    if (stats) *stats = local;
    return manifest;
}

namespace {

MetricReport cell_report(const RunManifest& m, const CellRecord& c) {
    if (c.status != "done") throw ValidationError("cell '" + c.id + "' has no results (" + c.status + ")");
    return load_report(m.dir / c.artifacts.at("report").path);
}

}  // namespace

std::vector<SignificanceRow> compare_cells(const RunManifest& manifest, const std::string& cell_a,
                                           const std::string& cell_b) {
    return compare_reports(cell_report(manifest, manifest.cell(cell_a)), cell_report(manifest, manifest.cell(cell_b)));
}

std::vector<std::pair<VariantKind, VariantKind>> comparison_pairs(ResearchQuestion rq) {
    if (rq == ResearchQuestion::Rq1)
        return {{VariantKind::ContextIntent, VariantKind::SourceIntent}, {VariantKind::Context, VariantKind::Source}};
    return {{VariantKind::ContextIntent, VariantKind::Context}, {VariantKind::SourceIntent, VariantKind::Source}};
}

std::vector<CellComparison> compare_research_question(const RunManifest& manifest, ResearchQuestion rq) {
    std::vector<CellComparison> out;
    std::set<std::pair<Task, std::string>> models;
    for (const auto& c : manifest.cells) models.emplace(c.task, c.model);
    for (const auto& [task, model] : models) {
        for (const auto& [va, vb] : comparison_pairs(rq)) {
            const CellRecord* a = nullptr;
            const CellRecord* b = nullptr;
            for (const auto& c : manifest.cells) {
                if (c.task != task || c.model != model || c.status != "done") continue;
                if (c.variant == va) a = &c;
                if (c.variant == vb) b = &c;
            }
            if (!a || !b) continue;
            out.push_back({a->id, b->id, compare_cells(manifest, a->id, b->id)});
        }
    }
    return out;
}

std::string render_comparisons(const std::vector<CellComparison>& comparisons) {
    std::string out;
    char buf[256];
    for (const auto& c : comparisons) {
        for (const auto& r : c.rows) {
            std::snprintf(buf, sizeof buf, "%-40s vs %-40s %-10s t=%+.4f p=%.4g%s\n", c.cell_a.c_str(), c.cell_b.c_str(),
                          r.metric.c_str(), r.t, r.p, r.degenerate_variance ? " (degenerate variance)" : "");
            out += buf;
        }
    }
    return out;
}

std::string render_grid_table(const RunManifest& manifest, Task task) {
    std::vector<MetricReport> reports;
    std::vector<const CellRecord*> cells;
    for (const auto v : kAllVariants)
        for (const auto& c : manifest.cells)
            if (c.task == task && c.variant == v && c.status == "done") cells.push_back(&c);
    reports.reserve(cells.size());
    std::size_t cutoff = 10;
    for (const auto* c : cells) {
        reports.push_back(cell_report(manifest, *c));
        if (task == Task::Retrieval) cutoff = reports.back().settings.value("cutoff", cutoff);
    }
    std::vector<TableRow> rows;
    for (std::size_t i = 0; i < cells.size(); ++i)
        rows.push_back({cells[i]->model, std::string(display_name(cells[i]->variant)), &reports[i]});
    return render_table(rows, table_columns(task, cutoff));
}

}  // namespace infoneed
