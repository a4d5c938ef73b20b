#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pfm/dataset.hpp"
#include "pfm/managers.hpp"
#include "pfm/simulator.hpp"

namespace pfm {

struct SweepOptions {
  std::size_t carrier = 0;  // index whose run advances the committed state
  bool debug = false;       // also keep the feature vector seen under every PSC
  bool collect_events = false;
};

// Per-window IPC of every PSC, each run from the same start-of-window snapshot.
struct SweepResult {
  std::vector<std::size_t> psc_ids;
  std::vector<std::uint64_t> instructions;          // [window]
  std::vector<FeatureVector> features;              // [window]
  std::vector<std::vector<double>> ipc;             // [window][psc]
  std::vector<std::vector<FeatureVector>> per_psc;  // [window][psc], debug only
  std::vector<std::vector<double>> event_means;     // [event][psc], collect_events only

  std::size_t windows() const { return ipc.size(); }
  double cycles(std::size_t window, std::size_t psc) const;
  // Whole-trace IPC if PSC p ran every window from the carrier's snapshots.
  double branched_ipc(std::size_t psc) const;
  // Best PSC chosen independently in every window.
  double oracle_ipc() const;
  OracleRun as_oracle_run(const std::string& trace_id, const std::string& benchmark) const;
  // Keeps only the listed PSC columns, in the given order.
  SweepResult select(std::span<const std::size_t> columns) const;
};

SweepResult oracle_sweep(std::span<const TraceRecord> trace, const HierarchyConfig& config,
                         const PrefetcherRegistry& registry, const std::vector<Psc>& pscs,
                         std::size_t window_size, const SweepOptions& options = {});

// window,instructions,<6 features>,ipc_<psc id>...
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& sweep);
SweepResult read_sweep_csv(const std::filesystem::path& path);

RunTotals run_static(std::span<const TraceRecord> trace, const HierarchyConfig& config,
                     const PrefetcherRegistry& registry, const Psc& psc, std::size_t window_size);

inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

struct MetricsRow {
  std::string trace_id;
  std::string manager;
  double ipc = 0.0;
  double normalized = 0.0;
  bool outlier = false;
  // NaN where the denominator is zero.
  std::array<double, kNumLevels> scope{};
  std::array<double, kNumLevels> accuracy{};
  std::array<double, kNumLevels> accuracy_variant{};  // misses removed / misses caused
};

MetricsRow compute_metrics(const std::string& trace_id, const std::string& manager,
                           const RunTotals& run, const RunTotals& baseline,
                           const RunTotals& no_prefetch, double outlier_threshold = 1.0);

struct MetricsSummary {
  std::string manager;
  std::size_t traces = 0;
  double geomean_normalized = 0.0;
  double mean_normalized = 0.0;
  double worst_normalized = 0.0;
  std::size_t outliers = 0;
  std::array<double, kNumLevels> mean_scope{};
  std::array<double, kNumLevels> mean_accuracy{};
};

// One summary per manager, in first-appearance order.
std::vector<MetricsSummary> summarize(const std::vector<MetricsRow>& rows);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
void write_summary_csv(const std::filesystem::path& path,
                       const std::vector<MetricsSummary>& summary);

}  // namespace pfm
