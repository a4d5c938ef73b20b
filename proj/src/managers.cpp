#include "pfm/managers.hpp"

#include <sstream>

#include "pfm/error.hpp"
#include "text.hpp"

namespace pfm {
namespace {

void check_first(std::size_t first, std::size_t num_pscs) {
  if (num_pscs == 0) throw Error("manager needs a non-empty deployment set");
  if (first >= num_pscs) throw Error("manager default PSC index out of range");
}

}  // namespace

PuppeteerManager::PuppeteerManager(SuiteModel model, std::size_t num_pscs, std::size_t first)
    : model_(std::make_unique<SuiteModel>(std::move(model))), first_(first) {
  check_first(first, num_pscs);
  if (model_->forests.size() != num_pscs) {
    throw Error("model has " + std::to_string(model_->forests.size()) +
                " forests but the deployment set has " + std::to_string(num_pscs) + " PSCs");
  }
}

PuppeteerManager::PuppeteerManager(NodeMemImage image, std::size_t num_pscs, std::size_t first)
    : image_(std::make_unique<NodeMemImage>(std::move(image))), first_(first) {
  check_first(first, num_pscs);
  validate_image(*image_);
  if (image_->rit.num_pscs != num_pscs) {
    throw Error("node memory holds " + std::to_string(image_->rit.num_pscs) +
                " forests but the deployment set has " + std::to_string(num_pscs) + " PSCs");
  }
}

std::size_t PuppeteerManager::decide(const WindowStats* last) {
  comparisons_ = 0;
  if (!last) return first_;
  if (image_) {
    const auto best = select_best_psc(*image_, last->hpc);
    comparisons_ = best.comparisons;
    return best.psc;
  }
  return model_->best(last->hpc);
}

BtClassifierManager::BtClassifierManager(Tree tree, std::size_t num_pscs, std::size_t first)
    : tree_(std::move(tree)), num_pscs_(num_pscs), first_(first) {
  check_first(first, num_pscs);
}

std::size_t BtClassifierManager::decide(const WindowStats* last) {
  if (!last) return first_;
  const double c = tree_.predict(last->hpc);
  const auto idx = static_cast<std::size_t>(c);
  if (c < 0 || idx >= num_pscs_) throw Error("classifier predicted an unknown PSC");
  return idx;
}

SingleRegressorManager::SingleRegressorManager(Forest forest, std::size_t num_pscs,
                                               std::size_t first)
    : forest_(std::move(forest)), num_pscs_(num_pscs), first_(first) {
  check_first(first, num_pscs);
}

std::size_t SingleRegressorManager::decide(const WindowStats* last) {
  if (!last) return first_;
  std::vector<double> pred;
  for (std::size_t p = 0; p < num_pscs_; ++p) {
    pred.push_back(forest_.predict(one_hot_row(last->hpc, p, num_pscs_)));
  }
  return argmax_label(pred);
}

SuiteClassifiersManager::SuiteClassifiersManager(std::vector<Tree> trees, std::size_t num_pscs,
                                                 std::size_t first)
    : trees_(std::move(trees)), first_(first) {
  check_first(first, num_pscs);
  if (trees_.size() != num_pscs) throw Error("classifier count differs from deployment size");
}

std::size_t SuiteClassifiersManager::decide(const WindowStats* last) {
  if (!last) return first_;
  std::vector<double> score;
  for (const auto& t : trees_) score.push_back(t.predict(last->hpc));
  return argmax_label(score);
}

TrialManager::TrialManager(std::size_t num_pscs, std::size_t trial, std::size_t exploit)
    : num_pscs_(num_pscs), trial_(trial), exploit_(exploit), sum_(num_pscs), count_(num_pscs) {
  if (num_pscs == 0) throw Error("trial manager needs a non-empty deployment set");
  if (trial == 0) throw Error("trial length must be positive");
}

std::size_t TrialManager::decide(const WindowStats* last) {
  if (last && last_was_trial_) {
    sum_[last_choice_] += last->ipc;
    ++count_[last_choice_];
  }
  const std::size_t trial_windows = num_pscs_ * trial_;
  const std::size_t pos = step_ % (trial_windows + exploit_);
  ++step_;
  if (pos == 0) {
    std::fill(sum_.begin(), sum_.end(), 0.0);
    std::fill(count_.begin(), count_.end(), 0);
  }
  if (pos < trial_windows) {
    last_choice_ = pos / trial_;
    last_was_trial_ = true;
    return last_choice_;
  }
  if (pos == trial_windows) {
    std::vector<double> mean(num_pscs_, 0.0);
    for (std::size_t p = 0; p < num_pscs_; ++p) {
      if (count_[p]) mean[p] = sum_[p] / static_cast<double>(count_[p]);
    }
    best_ = argmax_label(mean);
  }
  last_choice_ = best_;
  last_was_trial_ = false;
  return best_;
}

void write_decision_log(const std::filesystem::path& path, const DecisionLog& log) {
  std::ostringstream out;
  out << "window,psc_index,psc_id,instructions,cycles,ipc,comparisons";
  for (auto n : kFeatureNames) out << ',' << n;
  out << '\n';
  for (const auto& r : log) {
    out << r.window << ',' << r.psc_index << ',' << r.psc_id << ',' << r.instructions << ','
        << text::format_double(r.cycles) << ',' << text::format_double(r.ipc) << ','
        << r.comparisons;
    for (auto v : r.features.values) out << ',' << v;
    out << '\n';
  }
  text::write_file(path, out.str());
}

DecisionLog read_decision_log(const std::filesystem::path& path) {
  const auto rows = text::lines(text::read_file(path));
  if (rows.empty()) throw ParseError(0, "missing header");
  DecisionLog log;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    const auto c = text::split(rows[r]);
    if (c.size() != 7 + kNumFeatures) throw ParseError(r, "wrong field count");
    DecisionRow row;
    row.window = text::to_u64(c[0], r);
    row.psc_index = text::to_u64(c[1], r);
    row.psc_id = text::to_u64(c[2], r);
    row.instructions = text::to_u64(c[3], r);
    row.cycles = text::to_double(c[4], r);
    row.ipc = text::to_double(c[5], r);
    row.comparisons = static_cast<std::uint32_t>(text::to_u64(c[6], r));
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      const auto v = text::to_u64(c[7 + f], r);
      if (v > 0xFFFF) throw ParseError(r, "feature exceeds 16 bits");
      row.features.values[f] = static_cast<std::uint16_t>(v);
    }
    log.push_back(row);
  }
  return log;
}

ManagedRun run_managed(std::span<const TraceRecord> trace, const HierarchyConfig& config,
                       const PrefetcherRegistry& registry, const std::vector<Psc>& deployment,
                       Manager& manager, std::size_t window_size) {
  if (deployment.empty()) throw Error("run_managed: empty deployment set");
  if (trace.empty()) throw Error("run_managed: empty trace");
  const auto sizes = registry.sizes();
  std::vector<std::size_t> ids;
  for (const auto& p : deployment) ids.push_back(psc_id(p, sizes));

  Simulator sim(config, registry);
  ManagedRun run;
  run.manager = manager.name();
  run.totals.usage.assign(deployment.size(), 0.0);
  WindowStats last;
  bool have_last = false;
  const auto windows = slice_windows(trace.size(), window_size);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const std::size_t choice = manager.decide(have_last ? &last : nullptr);
    if (choice >= deployment.size()) throw Error("manager chose an index outside the deployment set");
    const auto& win = windows[w];
    last = sim.run_window(trace.subspan(win.begin, win.size()), deployment[choice]);
    have_last = true;
    run.log.push_back({w, choice, ids[choice], last.instructions, last.cycles, last.ipc,
                       manager.last_comparisons(), last.hpc});
    run.totals.instructions += last.instructions;
    run.totals.cycles += last.cycles;
    run.totals.usage[choice] += 1.0;
    for (std::size_t l = 0; l < kNumLevels; ++l) {
      auto& t = run.totals.levels[l];
      const auto& c = last.levels[l];
      t.demand_accesses += c.demand_accesses;
      t.demand_misses += c.demand_misses;
      t.prefetch_issued += c.prefetch_issued;
      t.prefetch_useful += c.prefetch_useful;
      t.prefetch_unused_evicted += c.prefetch_unused_evicted;
      t.misses_caused_by_prefetch += c.misses_caused_by_prefetch;
    }
  }
  run.totals.ipc = static_cast<double>(run.totals.instructions) / run.totals.cycles;
  for (auto& u : run.totals.usage) u /= static_cast<double>(windows.size());
  return run;
}

}  // namespace pfm
