#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "infoneed/evaluation.hpp"
#include "infoneed/io.hpp"
#include "infoneed/prediction.hpp"
#include "infoneed/providers.hpp"

namespace infoneed {

struct GeneratorConfig {
    std::string provider = "offline";
    /// Prompt template text; empty = PromptTemplate::default_generation().
    std::string template_text;
    int max_tokens = 64;
    double temperature = 0.0;
};

/// One experiment grid: (task) x (input variant) x (generator or pipeline).
struct ExperimentConfig {
    std::filesystem::path samples;
    std::filesystem::path passages;  // required for retrieval
    std::vector<Task> tasks;
    std::vector<VariantKind> variants;
    std::map<std::string, GeneratorConfig> generators;
    std::map<std::string, PipelineConfig> pipelines;
    std::vector<EndpointConfig> providers;
    Split eval_split = Split::Validation;
    std::size_t cutoff = 10;
    std::uint64_t seed = 13;
    std::filesystem::path output_dir = "grid";
    std::size_t parallelism = 1;
    std::string separator = "|";
};

/// Relative paths resolve against `base_dir` (the config file's directory).
ExperimentConfig experiment_from_json(const Json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Generation with the Question input is invalid (it is the target output).
std::optional<std::string> invalid_cell_reason(Task task, VariantKind variant);

struct Artifact {
    std::string path;  // relative to the manifest's directory
    std::string sha256;
};

struct CellRecord {
    std::string id;  // "<task>/<variant>/<model>"
    Task task = Task::Retrieval;
    VariantKind variant = VariantKind::Question;
    std::string model;
    std::string key;     // content hash of everything the cell depends on
    std::string status;  // "done" or "skipped"
    std::string reason;
    std::map<std::string, Artifact> artifacts;  // "predictions", "report"
    std::map<std::string, double> aggregate;
};

struct RunManifest {
    std::string config_hash;
    std::map<std::string, std::string> inputs;  // dataset file -> sha256
    std::vector<CellRecord> cells;              // task, then variant order, then model name
    std::filesystem::path dir;                  // not serialized

    const CellRecord& cell(const std::string& id) const;
};

Json manifest_to_json(const RunManifest& m);
RunManifest load_manifest(const std::filesystem::path& path);

struct GridStats {
    std::size_t executed = 0;
    std::size_t reused = 0;
    std::size_t skipped = 0;
};

/// Executes every cell not already present with matching hashes, writes
/// predictions and reports under output_dir/cells/<key>/, and rewrites
/// output_dir/manifest.json. Re-running with an unchanged config reuses all
/// cells and rewrites byte-identical files.
RunManifest run_grid(const ExperimentConfig& config, GridStats* stats = nullptr);

/// Checks that every artifact exists and matches its recorded hash;
/// returns the problems found.
std::vector<std::string> verify_manifest(const RunManifest& manifest);

std::vector<SignificanceRow> compare_cells(const RunManifest& manifest, const std::string& cell_a,
                                           const std::string& cell_b);

enum class ResearchQuestion { Rq1, Rq2 };

/// RQ1 varies the context: (2) vs (3), (4) vs (5). RQ2 varies the intent:
/// (2) vs (4), (3) vs (5).
std::vector<std::pair<VariantKind, VariantKind>> comparison_pairs(ResearchQuestion rq);

struct CellComparison {
    std::string cell_a;
    std::string cell_b;
    std::vector<SignificanceRow> rows;
};

/// All RQ comparisons available in the manifest, per task and model.
std::vector<CellComparison> compare_research_question(const RunManifest& manifest, ResearchQuestion rq);

std::string render_comparisons(const std::vector<CellComparison>& comparisons);

/// Results table for one task: rows variant-major, model-minor.
std::string render_grid_table(const RunManifest& manifest, Task task);

}  // namespace infoneed
