#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "pfm/forest.hpp"
#include "pfm/nodemem.hpp"
#include "pfm/simulator.hpp"

namespace pfm {

// Chooses the deployment-set index for the next window from the statistics of
// the window that just finished (nullptr before the first window).
class Manager {
 public:
  virtual ~Manager() = default;
  virtual std::string name() const = 0;
  virtual std::size_t decide(const WindowStats* last) = 0;
  // Node comparisons spent by the most recent decision.
  virtual std::uint32_t last_comparisons() const { return 0; }
};

class StaticManager final : public Manager {
 public:
  explicit StaticManager(std::size_t index) : index_(index) {}
  std::string name() const override { return "static-" + std::to_string(index_); }
  std::size_t decide(const WindowStats*) override { return index_; }

 private:
  std::size_t index_;
};

// Per-PSC regression forests, evaluated either in floating point or by
// walking the packed node memory.
class PuppeteerManager final : public Manager {
 public:
  PuppeteerManager(SuiteModel model, std::size_t num_pscs, std::size_t first = 0);
  PuppeteerManager(NodeMemImage image, std::size_t num_pscs, std::size_t first = 0);

  std::string name() const override { return image_ ? "puppeteer-nodemem" : "puppeteer"; }
  std::size_t decide(const WindowStats* last) override;
  std::uint32_t last_comparisons() const override { return comparisons_; }

 private:
  std::unique_ptr<SuiteModel> model_;
  std::unique_ptr<NodeMemImage> image_;
  std::size_t first_;
  std::uint32_t comparisons_ = 0;
};

// Single classification tree predicting the best PSC index.
class BtClassifierManager final : public Manager {
 public:
  BtClassifierManager(Tree tree, std::size_t num_pscs, std::size_t first = 0);
  std::string name() const override { return "bt-classifier"; }
  std::size_t decide(const WindowStats* last) override;

 private:
  Tree tree_;
  std::size_t num_pscs_;
  std::size_t first_;
};

// One forest over features plus a one-hot PSC encoding.
class SingleRegressorManager final : public Manager {
 public:
  SingleRegressorManager(Forest forest, std::size_t num_pscs, std::size_t first = 0);
  std::string name() const override { return "single-regressor"; }
  std::size_t decide(const WindowStats* last) override;

 private:
  Forest forest_;
  std::size_t num_pscs_;
  std::size_t first_;
};

// Per-PSC trees predicting membership in the near-best set.
class SuiteClassifiersManager final : public Manager {
 public:
  SuiteClassifiersManager(std::vector<Tree> trees, std::size_t num_pscs, std::size_t first = 0);
  std::string name() const override { return "suite-classifiers"; }
  std::size_t decide(const WindowStats* last) override;

 private:
  std::vector<Tree> trees_;
  std::size_t first_;
};

// Tries each PSC for `trial` windows, then runs the best observed for
// `exploit` windows, and repeats.
class TrialManager final : public Manager {
 public:
  TrialManager(std::size_t num_pscs, std::size_t trial = 1, std::size_t exploit = 20);
  std::string name() const override { return "trial"; }
  std::size_t decide(const WindowStats* last) override;

 private:
  std::size_t num_pscs_;
  std::size_t trial_;
  std::size_t exploit_;
  std::size_t step_ = 0;
  std::size_t last_choice_ = 0;
  bool last_was_trial_ = false;
  std::size_t best_ = 0;
  std::vector<double> sum_;
  std::vector<std::size_t> count_;
};

struct DecisionRow {
  std::size_t window = 0;
  std::size_t psc_index = 0;
  std::size_t psc_id = 0;
  std::uint64_t instructions = 0;
  double cycles = 0.0;
  double ipc = 0.0;
  std::uint32_t comparisons = 0;
  FeatureVector features;
};

using DecisionLog = std::vector<DecisionRow>;

// window,psc_index,psc_id,instructions,cycles,ipc,comparisons,<6 features>
void write_decision_log(const std::filesystem::path& path, const DecisionLog& log);
DecisionLog read_decision_log(const std::filesystem::path& path);

struct RunTotals {
  std::uint64_t instructions = 0;
  double cycles = 0.0;
  double ipc = 0.0;
  HierarchyCounters levels{};
  std::vector<double> usage;  // fraction of windows per deployment index
};

struct ManagedRun {
  std::string manager;
  DecisionLog log;
  RunTotals totals;
};

// Replays the trace window by window, letting the manager pick the PSC of each
// window from the previous window's counters.
ManagedRun run_managed(std::span<const TraceRecord> trace, const HierarchyConfig& config,
                       const PrefetcherRegistry& registry, const std::vector<Psc>& deployment,
                       Manager& manager, std::size_t window_size);

}  // namespace pfm
