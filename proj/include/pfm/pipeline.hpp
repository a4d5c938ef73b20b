#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pfm/config.hpp"
#include "pfm/error.hpp"
#include "pfm/eval.hpp"

namespace pfm {

// Failure inside a pipeline stage; what() is "<stage>: <cause>".
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error(stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Output layout under one run directory.
struct Workspace {
  std::filesystem::path root;

  std::filesystem::path sweep(const std::string& trace) const { return root / "sweep" / (trace + ".csv"); }
  std::filesystem::path ipc_table() const { return root / "sweep" / "ipc_table.csv"; }
  std::filesystem::path deployment() const { return root / "deployment.txt"; }
  std::filesystem::path train_set() const { return root / "dataset" / "train.csv"; }
  std::filesystem::path test_set() const { return root / "dataset" / "test.csv"; }
  std::filesystem::path held_out() const { return root / "dataset" / "held_out.txt"; }
  std::filesystem::path suite() const { return root / "model" / "suite.json"; }
  std::filesystem::path variants() const { return root / "model" / "variants.json"; }
  std::filesystem::path image() const { return root / "model" / "suite.pmem"; }
  std::filesystem::path size_report() const { return root / "model" / "size.txt"; }
  std::filesystem::path decisions(const std::string& trace, const std::string& manager) const {
    return root / "runs" / trace / (manager + ".csv");
  }
  std::filesystem::path totals() const { return root / "runs" / "totals.csv"; }
  std::filesystem::path metrics() const { return root / "metrics.csv"; }
  std::filesystem::path summary() const { return root / "summary.csv"; }
  std::filesystem::path bounds() const { return root / "bounds.csv"; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
};

// Command-line overrides; the effective values are what the manifest records.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> window_size;
  std::optional<std::vector<std::string>> managers;
  std::optional<std::pair<std::size_t, std::size_t>> trial;  // trial, exploit windows
};
void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

// Loads (or generates) the trace of one source.
Trace load_trace(const TraceSource& source);

// PSCs swept in the sweep stage: the deployment, or the prune candidates.
std::vector<Psc> sweep_set(const ExperimentConfig& config);

void stage_sweep(const ExperimentConfig& config, const Workspace& ws);
void stage_prune(const ExperimentConfig& config, const Workspace& ws);
void stage_dataset(const ExperimentConfig& config, const Workspace& ws);
void stage_train(const ExperimentConfig& config, const Workspace& ws);
void stage_quantize(const ExperimentConfig& config, const Workspace& ws);
void stage_run(const ExperimentConfig& config, const Workspace& ws);
void stage_report(const ExperimentConfig& config, const Workspace& ws);

// Runs one stage by name, tagging failures with it, then refreshes the manifest.
void run_stage(std::string_view stage, const ExperimentConfig& config, const Workspace& ws);
inline constexpr std::string_view kStages[] = {"sweep", "prune", "dataset", "train",
                                               "quantize", "run", "report"};
void run_pipeline(const ExperimentConfig& config, const Workspace& ws);

// deployment.txt: one "<psc id>,<label>" line per deployment index.
void write_deployment(const std::filesystem::path& path, const std::vector<Psc>& deployment,
                      const PrefetcherRegistry& registry);
std::vector<Psc> read_deployment(const std::filesystem::path& path,
                                 const PrefetcherRegistry& registry);

// runs/totals.csv: one row per (trace, run); includes "baseline" and
// "no-prefetch" reference runs.
struct TotalsRow {
  std::string trace_id;
  std::string manager;
  RunTotals totals;
};
void write_totals_csv(const std::filesystem::path& path, const std::vector<TotalsRow>& rows);
std::vector<TotalsRow> read_totals_csv(const std::filesystem::path& path);

struct Manifest {
  std::string config_text;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t window_size = 0;
  std::vector<std::string> managers;
  std::size_t trial_windows = 0;
  std::size_t exploit_windows = 0;
  std::map<std::string, std::string> outputs;  // relative path -> content hash

  std::string to_json() const;
  static Manifest from_json(const std::string& text);
};

// Hashes every file under the workspace (except the manifest itself).
Manifest make_manifest(const ExperimentConfig& config, const Workspace& ws);
void write_manifest(const ExperimentConfig& config, const Workspace& ws);
ExperimentConfig config_from_manifest(const std::filesystem::path& manifest_path);

// Hex FNV-1a 64 of a file's bytes.
std::string file_hash(const std::filesystem::path& path);

struct SensitivityRow {
  std::string knob;    // "llc_bytes" or "model_nodes"
  std::uint64_t value = 0;
  std::size_t entries = 0;  // node-memory entries of the trained suite
  MetricsSummary summary;
};

// Full pipeline per LLC size, each under <root>/llc_<bytes>.
std::vector<SensitivityRow> cache_size_sweep(const ExperimentConfig& config, const Workspace& ws,
                                             const std::vector<std::uint64_t>& llc_bytes);
// Shares sweep/prune/dataset with <root>; reruns train..report per total node
// budget under <root>/nodes_<budget>.
std::vector<SensitivityRow> model_size_sweep(const ExperimentConfig& config, const Workspace& ws,
                                             const std::vector<std::size_t>& node_budgets);
void write_sensitivity_csv(const std::filesystem::path& path,
                           const std::vector<SensitivityRow>& rows);

// Per-tree node cap that spreads a suite-wide budget over every tree.
std::size_t nodes_per_tree_for_budget(std::size_t total_nodes, std::size_t num_pscs,
                                      std::size_t trees_per_forest);

}  // namespace pfm
