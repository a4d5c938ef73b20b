#include <gtest/gtest.h>

#include <filesystem>

#include "pfm/error.hpp"
#include "pfm/eval.hpp"
#include "pfm/managers.hpp"
#include "pfm/workload.hpp"

namespace pfm {
namespace {

Forest constant_forest(double v, std::size_t trees = 1) {
  return Forest{std::vector<Tree>(trees, Tree{{TreeNode{-1, 0, -1, -1, v, 1}}})};
}

SuiteModel constant_suite(const std::vector<double>& values) {
  SuiteModel m;
  for (std::size_t p = 0; p < values.size(); ++p) {
    m.psc_ids.push_back(p);
    m.forests.push_back(constant_forest(values[p]));
  }
  return m;
}

WindowStats stats_with_ipc(double ipc) {
  WindowStats s;
  s.instructions = 1000;
  s.cycles = 1000 / ipc;
  s.ipc = ipc;
  return s;
}

TEST(Managers, StaticIgnoresInput) {
  StaticManager m(2);
  EXPECT_EQ(m.decide(nullptr), 2u);
  const auto s = stats_with_ipc(3.0);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(m.decide(&s), 2u);
  EXPECT_EQ(m.name(), "static-2");
}

TEST(Managers, PuppeteerPicksLargestPrediction) {
  PuppeteerManager m(constant_suite({1.1, 1.3, 0.9, 1.0, 1.2}), 5, 3);
  EXPECT_EQ(m.decide(nullptr), 3u);  // nothing observed yet
  const auto s = stats_with_ipc(1.0);
  EXPECT_EQ(m.decide(&s), 1u);
}

TEST(Managers, PuppeteerNodeMemBackend) {
  const auto q = quantize(constant_suite({1.1, 1.3, 0.9, 1.0, 1.2}));
  PuppeteerManager m(q.image, 5);
  const auto s = stats_with_ipc(1.0);
  EXPECT_EQ(m.decide(&s), 1u);
  EXPECT_EQ(m.last_comparisons(), 5u);
  EXPECT_EQ(m.name(), "puppeteer-nodemem");
}

TEST(Managers, PuppeteerRejectsShapeMismatch) {
  EXPECT_THROW(PuppeteerManager(constant_suite({1.0, 2.0}), 3), Error);
}

TEST(Managers, TrialScheduleLatchesBestObserved) {
  const std::vector<double> ipc = {1.0, 2.0, 1.5};
  TrialManager m(3, 1, 10);
  std::vector<std::size_t> choices;
  std::optional<WindowStats> last;
  for (int w = 0; w < 27; ++w) {
    const auto c = m.decide(last ? &*last : nullptr);
    choices.push_back(c);
    last = stats_with_ipc(ipc[c]);
  }
  const std::vector<std::size_t> cycle = {0, 1, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  for (std::size_t w = 0; w < choices.size(); ++w) EXPECT_EQ(choices[w], cycle[w % 13]) << w;
}

TEST(Managers, TrialAveragesRepeatedTrials) {
  // PSC 0 looks best on its first trial window only.
  TrialManager m(2, 2, 3);
  const std::vector<std::vector<double>> seen = {{3.0, 0.1}, {1.0, 1.0}};
  std::vector<std::size_t> visits(2, 0);
  std::optional<WindowStats> last;
  std::vector<std::size_t> choices;
  for (int w = 0; w < 7; ++w) {
    const auto c = m.decide(last ? &*last : nullptr);
    choices.push_back(c);
    last = stats_with_ipc(seen[c][visits[c]++ % 2]);
  }
  // Means: PSC 0 = 1.55, PSC 1 = 1.0.
  EXPECT_EQ(choices, (std::vector<std::size_t>{0, 0, 1, 1, 0, 0, 0}));
}

TEST(Managers, ClassifierVariantsRejectUnknownPsc) {
  Tree t{{TreeNode{-1, 0, -1, -1, 7.0, 1}}};  // out-of-range class
  BtClassifierManager bt(t, 3);
  const auto s = stats_with_ipc(1.0);
  EXPECT_THROW(bt.decide(&s), Error);

  std::vector<Tree> members = {Tree{{TreeNode{-1, 0, -1, -1, 0.0, 1}}},
                               Tree{{TreeNode{-1, 0, -1, -1, 1.0, 1}}}};
  SuiteClassifiersManager sc(members, 2);
  EXPECT_EQ(sc.decide(&s), 1u);
}

Trace streaming_trace() {
  PhaseSpec p;
  p.length = 200000;
  p.pattern = Streaming{1 << 24};
  p.mem_fraction = 0.5;
  p.load_store_ratio = 0.9;
  p.branch_mix = {0.1, 0.02, 0.02};
  return generate_synthetic(make_workload({p}, 23));
}

std::vector<Psc> two_psc_deployment(const PrefetcherRegistry& reg) {
  return {parse_psc_label("none/none/none/none", reg),
          parse_psc_label("none/stream/none/none", reg)};
}

TEST(RunManaged, StaticMatchesPlainRun) {
  const auto reg = PrefetcherRegistry::standard();
  const auto trace = streaming_trace();
  const auto dep = two_psc_deployment(reg);
  StaticManager m(1);
  const auto run = run_managed(trace, HierarchyConfig{}, reg, dep, m, 10000);
  const auto plain = run_static(trace, HierarchyConfig{}, reg, dep[1], 10000);
  EXPECT_EQ(run.totals.cycles, plain.cycles);
  EXPECT_EQ(run.totals.instructions, trace.size());
  EXPECT_EQ(run.totals.levels, plain.levels);
  EXPECT_EQ(run.log.size(), 20u);
  EXPECT_EQ(run.totals.usage, (std::vector<double>{0.0, 1.0}));
}

TEST(RunManaged, TrainedSuiteFollowsDominantPsc) {
  const auto reg = PrefetcherRegistry::standard();
  const auto trace = streaming_trace();
  const auto dep = two_psc_deployment(reg);
  const auto sweep = oracle_sweep(trace, HierarchyConfig{}, reg, dep, 5000);
  for (const auto& row : sweep.ipc) ASSERT_GT(row[1], row[0]);  // precondition

  TrainConfig cfg;
  cfg.trees_per_forest = 3;
  const auto samples = samples_from({sweep.as_oracle_run("s", "s")});
  const auto suite = fit_suite(samples, sweep.psc_ids, cfg);
  PuppeteerManager m(suite, 2);
  const auto run = run_managed(trace, HierarchyConfig{}, reg, dep, m, 5000);
  std::size_t picks = 0;
  for (std::size_t w = 1; w < run.log.size(); ++w) picks += run.log[w].psc_index == 1;
  EXPECT_GE(static_cast<double>(picks), 0.99 * (run.log.size() - 1));
}

TEST(RunManaged, SinglePscDegeneratesToStatic) {
  const auto reg = PrefetcherRegistry::standard();
  const auto trace = streaming_trace();
  const std::vector<Psc> dep = {parse_psc_label("next_line/stream/none/none", reg)};
  StaticManager ref(0);
  const auto base = run_managed(trace, HierarchyConfig{}, reg, dep, ref, 20000);

  std::vector<std::unique_ptr<Manager>> managers;
  managers.push_back(std::make_unique<PuppeteerManager>(constant_suite({1.0}), 1));
  managers.push_back(std::make_unique<TrialManager>(1, 1, 5));
  managers.push_back(std::make_unique<BtClassifierManager>(Tree{{TreeNode{}}}, 1));
  for (auto& m : managers) {
    const auto run = run_managed(trace, HierarchyConfig{}, reg, dep, *m, 20000);
    EXPECT_EQ(run.totals.cycles, base.totals.cycles) << m->name();
    EXPECT_EQ(run.totals.levels, base.totals.levels) << m->name();
  }
}

TEST(RunManaged, FloatAndNodeMemAgree) {
  const auto reg = PrefetcherRegistry::standard();
  PhaseSpec a;
  a.length = 100000;
  a.pattern = Strided{64, 0};
  a.mem_fraction = 0.4;
  a.load_store_ratio = 0.8;
  a.branch_mix = {0.1, 0.02, 0.02};
  PhaseSpec b = a;
  b.pattern = PointerChase{1 << 16, 64};
  b.code_footprint = 48 * 1024;
  const auto trace = generate_synthetic(make_workload({a, b, a, b}, 3));
  const std::vector<Psc> dep = {parse_psc_label("none/none/none/none", reg),
                                parse_psc_label("next_line/none/none/none", reg),
                                parse_psc_label("none/ip_stride/none/none", reg)};
  const auto sweep = oracle_sweep(trace, HierarchyConfig{}, reg, dep, 5000);
  TrainConfig cfg;
  cfg.trees_per_forest = 3;
  const auto suite = fit_suite(samples_from({sweep.as_oracle_run("t", "t")}), sweep.psc_ids, cfg);

  PuppeteerManager fl(suite, 3);
  PuppeteerManager nm(quantize(suite).image, 3);
  const auto rf = run_managed(trace, HierarchyConfig{}, reg, dep, fl, 5000);
  const auto rn = run_managed(trace, HierarchyConfig{}, reg, dep, nm, 5000);
  ASSERT_EQ(rf.log.size(), rn.log.size());
  std::size_t agree = 0;
  for (std::size_t w = 0; w < rf.log.size(); ++w) agree += rf.log[w].psc_index == rn.log[w].psc_index;
  EXPECT_GE(static_cast<double>(agree), 0.99 * rf.log.size());
  for (const auto& r : rn.log) EXPECT_LE(r.comparisons, 3u * 3 * 10);
}

TEST(DecisionLog, CsvRoundTrip) {
  DecisionLog log;
  for (std::size_t w = 0; w < 4; ++w) {
    DecisionRow r;
    r.window = w;
    r.psc_index = w % 2;
    r.psc_id = 17 + w;
    r.instructions = 1000;
    r.cycles = 333.3333333333333 + w;
    r.ipc = 1000 / r.cycles;
    r.comparisons = static_cast<std::uint32_t>(w * 3);
    r.features.values = {1, 2, 3, 4, 65535, static_cast<std::uint16_t>(w)};
    log.push_back(r);
  }
  const auto path = std::filesystem::temp_directory_path() / "pfm_decisions.csv";
  write_decision_log(path, log);
  const auto back = read_decision_log(path);
  ASSERT_EQ(back.size(), log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(back[i].window, log[i].window);
    EXPECT_EQ(back[i].psc_index, log[i].psc_index);
    EXPECT_EQ(back[i].psc_id, log[i].psc_id);
    EXPECT_EQ(back[i].cycles, log[i].cycles);
    EXPECT_EQ(back[i].ipc, log[i].ipc);
    EXPECT_EQ(back[i].comparisons, log[i].comparisons);
    EXPECT_EQ(back[i].features, log[i].features);
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace pfm
