#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pfm/dataset.hpp"
#include "pfm/forest.hpp"
#include "pfm/hierarchy.hpp"
#include "pfm/nodemem.hpp"
#include "pfm/prefetch.hpp"
#include "pfm/workload.hpp"

namespace pfm {

struct TraceSource {
  std::string id;
  std::string benchmark;
  std::optional<std::filesystem::path> file;  // otherwise synthetic
  WorkloadSpec workload;
};

// Parsed experiment description. The source text is kept verbatim so a run
// can be reproduced from its manifest.
struct ExperimentConfig {
  std::string text;
  std::uint64_t seed = 1;
  std::size_t window_size = 100000;
  HierarchyConfig hierarchy;
  std::string registry_name = "standard";
  PrefetcherRegistry registry = PrefetcherRegistry::standard();
  std::vector<TraceSource> traces;
  std::vector<Psc> deployment;
  std::optional<std::size_t> prune_top_k;
  std::vector<Psc> candidates;  // sweep set when pruning; empty = whole catalog
  Psc baseline{};               // normalization target, all-none by default
  std::size_t carrier = 0;
  std::size_t first_psc = 0;
  std::vector<std::string> managers;
  std::size_t trial_windows = 1;
  std::size_t exploit_windows = 20;
  DatasetSpec dataset;
  LabelAlignment label_alignment = LabelAlignment::same_window;
  double label_threshold = 0.005;
  double outlier_threshold = 1.0;
  TrainConfig train;
  QuantSpec quant;

  void validate() const;
  // FNV-1a 64 of the source text, as 16 hex digits.
  std::string hash() const;
};

// key = value lines; sections [hierarchy] and [trace NAME]; '#' comments.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Pattern grammar: strided(stride[,span]) | chase(ws[,node]) | stream(region)
// | loop(footprint) | mix(w*pattern + w*pattern ...). Sizes accept K/M/G.
Pattern parse_pattern(std::string_view text);
// "<length> <pattern> key=value..." with keys cond, ret, other, loads, mem,
// code, stores, data_base, code_base.
PhaseSpec parse_phase(std::string_view text);
// Byte sizes take binary suffixes (4K = 4096); counts take decimal ones
// (200K = 200000).
std::uint64_t parse_size(std::string_view text);
std::uint64_t parse_count(std::string_view text);

inline constexpr std::string_view kManagerNames[] = {
    "static", "puppeteer", "puppeteer-nodemem", "bt-classifier",
    "single-regressor", "suite-classifiers", "trial"};

std::uint64_t fnv1a64(std::string_view data);

}  // namespace pfm
