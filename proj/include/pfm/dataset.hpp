#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pfm/features.hpp"
#include "pfm/simulator.hpp"

namespace pfm {

// Full per-window event catalogue exposed by the simulator. The first six
// entries are the model features (unsaturated); the rest include
// PSC-dependent counters that the invariance filter is expected to reject.
const std::vector<std::string_view>& event_names();
std::vector<double> extract_events(const WindowStats& stats);

FeatureVector extract_features(const WindowStats& stats);

// event_by_psc[e][p]: mean value of event e under PSC p. Keeps e iff its
// largest relative deviation from the across-PSC mean is below tol (exactly
// constant events are always kept). Events with a nonpositive mean are
// dropped as degenerate.
std::vector<std::size_t> select_invariant_events(
    const std::vector<std::vector<double>>& event_by_psc, double tol = 0.10);

struct CorrelationFilter {
  std::vector<std::size_t> kept;
  // Kept without a correlation test because their variance is zero.
  std::vector<std::size_t> zero_variance;
};

// rows[s][e]: value of event e in sample s. Walks event_ids in order and drops
// an event whose |Pearson r| with an already-kept event exceeds the threshold.
CorrelationFilter drop_correlated(const std::vector<std::vector<double>>& rows,
                                  std::span<const std::size_t> event_ids,
                                  double corr_threshold = 0.95);

double pearson(std::span<const double> a, std::span<const double> b);

struct Sample {
  FeatureVector features;
  std::vector<double> labels;  // IPC per deployment PSC
  std::string trace_id;
  std::string benchmark;
  std::size_t window_index = 0;
};

// Per-window oracle output of one trace.
struct OracleRun {
  std::string trace_id;
  std::string benchmark;
  std::vector<std::size_t> psc_ids;
  std::vector<FeatureVector> features;   // [window]
  std::vector<std::vector<double>> ipc;  // [window][psc]
};

enum class LabelAlignment {
  same_window,  // features and IPC from the same window
  next_window,  // features of window w labelled with the IPC of window w+1
};

std::vector<Sample> samples_from(const std::vector<OracleRun>& runs,
                                 LabelAlignment alignment = LabelAlignment::same_window);

enum class Approach { a1_random_windows, a2_leave_traces_out, a3_leave_benchmarks_out };

std::string_view approach_name(Approach a);
Approach parse_approach(std::string_view text);

struct DatasetSpec {
  Approach approach = Approach::a1_random_windows;
  std::uint64_t seed = 1;
  double a1_train_fraction = 0.10;
  double holdout_fraction = 0.20;
  double window_train_fraction = 0.60;
};

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::vector<std::string> held_out;  // trace or benchmark ids (A2/A3)
};

Dataset build_dataset(const std::vector<Sample>& samples, const DatasetSpec& spec);

// trace_id,benchmark,window_index,<6 features>,ipc_<psc id>...
void write_dataset_csv(const std::filesystem::path& path, const std::vector<Sample>& samples,
                       const std::vector<std::size_t>& psc_ids);
std::vector<Sample> read_dataset_csv(const std::filesystem::path& path,
                                     std::vector<std::size_t>* psc_ids = nullptr);

}  // namespace pfm
