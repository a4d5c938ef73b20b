#include <gtest/gtest.h>

#include "pfm/error.hpp"
#include "pfm/simulator.hpp"
#include "pfm/workload.hpp"

namespace pfm {
namespace {

constexpr std::uint64_t kIp = 0x400000;

Trace repeated_other(std::size_t n) { return Trace(n, TraceRecord{kIp, Kind::other, 0}); }

PrefetcherRegistry none_only() {
  PrefetcherRegistry r;
  for (auto& level : r.levels) level = {NoPrefetch{}};
  return r;
}

Trace phased_trace() {
  PhaseSpec a;
  a.length = 30000;
  a.pattern = Strided{64, 0};
  a.branch_mix = {0.1, 0.02, 0.02};
  a.mem_fraction = 0.4;
  a.load_store_ratio = 0.8;
  PhaseSpec b = a;
  b.pattern = PointerChase{1 << 20, 64};
  PhaseSpec c = a;
  c.pattern = Streaming{1 << 22};
  c.code_footprint = 64 * 1024;
  return generate_synthetic(make_workload({a, b, c}, 17));
}

TEST(ProxyCycles, Formula) {
  const HierarchyConfig cfg;
  EXPECT_DOUBLE_EQ(proxy_cycles(100000, 0, cfg), 25000.0);
  EXPECT_DOUBLE_EQ(proxy_cycles(100000, 1000 * 195, cfg), 83500.0);
  EXPECT_DOUBLE_EQ(proxy_cycles(5, 0, cfg), 2.0);  // ceil(5/4)
  EXPECT_LT(proxy_cycles(1000, 10, cfg), proxy_cycles(1000, 11, cfg));
}

TEST(Simulator, AllL1HitsGiveIssueWidthIpc) {
  Simulator sim(HierarchyConfig{}, PrefetcherRegistry::standard());
  const auto t = repeated_other(100000);
  sim.run_window(t, Psc{});  // warms the single code line
  const auto s = sim.run_window(t, Psc{});
  EXPECT_EQ(s.instructions, 100000u);
  EXPECT_DOUBLE_EQ(s.cycles, 25000.0);
  EXPECT_DOUBLE_EQ(s.ipc, 4.0);
}

TEST(Simulator, DramMissesAddExposedLatency) {
  Simulator sim(HierarchyConfig{}, PrefetcherRegistry::standard());
  sim.run_window(repeated_other(10), Psc{});
  Trace t = repeated_other(99000);
  for (std::uint64_t i = 0; i < 1000; ++i) t.push_back({kIp, Kind::load, (1ULL << 32) + i * 8192});
  const auto s = sim.run_window(t, Psc{});
  EXPECT_EQ(s.at(Level::l1d).demand_misses, 1000u);
  EXPECT_EQ(s.at(Level::llc).demand_misses, 1000u);
  EXPECT_DOUBLE_EQ(s.cycles, 83500.0);
  EXPECT_NEAR(s.ipc, 1.1976, 1e-4);
}

TEST(Simulator, DeterministicFromIdenticalState) {
  Simulator a(HierarchyConfig{}, PrefetcherRegistry::standard());
  const auto t = phased_trace();
  const auto psc = parse_psc_label("next_line/stream/ip_stride/next_line", a.registry());
  a.run_window(std::span(t).first(10000), psc);
  Simulator b = a;
  const auto sa = a.run_window(std::span(t).subspan(10000, 20000), psc);
  const auto sb = b.run_window(std::span(t).subspan(10000, 20000), psc);
  EXPECT_EQ(sa.cycles, sb.cycles);
  EXPECT_EQ(sa.levels, sb.levels);
  EXPECT_EQ(sa.hpc, sb.hpc);
  EXPECT_EQ(sa.events, sb.events);
}

TEST(Simulator, HpcCountersArePscInvariant) {
  const auto reg = PrefetcherRegistry::standard();
  const auto t = phased_trace();
  const auto catalog = PscCatalog::enumerate(reg.sizes());
  Simulator carrier(HierarchyConfig{}, reg);
  const auto windows = slice_windows(t.size(), 10000);
  for (const auto& w : windows) {
    const auto slice = std::span(t).subspan(w.begin, w.size());
    std::optional<FeatureVector> first;
    std::optional<EventCounts> first_events;
    for (std::size_t id = 0; id < catalog.size(); id += 7) {
      Simulator branch = carrier;
      const auto s = branch.run_window(slice, catalog.at(id));
      if (!first) {
        first = s.hpc;
        first_events = s.events;
      }
      EXPECT_EQ(s.hpc, *first);
      EXPECT_EQ(s.events, *first_events);
    }
    carrier.run_window(slice, catalog.at(0));
  }
}

TEST(Simulator, AllGatedEqualsNoPrefetchers) {
  const auto t = phased_trace();
  Simulator gated(HierarchyConfig{}, PrefetcherRegistry::standard());
  Simulator bare(HierarchyConfig{}, none_only());
  for (const auto& w : slice_windows(t.size(), 25000)) {
    const auto slice = std::span(t).subspan(w.begin, w.size());
    const auto a = gated.run_window(slice, Psc{});
    const auto b = bare.run_window(slice, Psc{});
    EXPECT_EQ(a.cycles, b.cycles);
    EXPECT_EQ(a.levels, b.levels);
    EXPECT_EQ(a.hpc, b.hpc);
  }
}

TEST(Simulator, CounterInvariants) {
  const auto reg = PrefetcherRegistry::standard();
  const auto t = phased_trace();
  Simulator sim(HierarchyConfig{}, reg);
  const auto psc = parse_psc_label("next_line/stream/region/next_line", reg);
  std::array<std::uint64_t, kNumLevels> issued{}, useful{};
  for (const auto& w : slice_windows(t.size(), 10000)) {
    const auto s = sim.run_window(std::span(t).subspan(w.begin, w.size()), psc);
    for (std::size_t l = 0; l < kNumLevels; ++l) {
      issued[l] += s.levels[l].prefetch_issued;
      useful[l] += s.levels[l].prefetch_useful;
    }
    EXPECT_GT(s.ipc, 0.0);
    EXPECT_LE(s.ipc, 4.0);
    EXPECT_DOUBLE_EQ(s.ipc, static_cast<double>(s.instructions) / s.cycles);
    EXPECT_EQ(s.at(Level::l2).demand_accesses,
              s.at(Level::l1i).demand_misses + s.at(Level::l1d).demand_misses);
    for (const auto& l : s.levels) EXPECT_LE(l.demand_misses, l.demand_accesses);
  }
  // A line prefetched in one window may pay off in the next.
  for (std::size_t l = 0; l < kNumLevels; ++l) EXPECT_LE(useful[l], issued[l]);
}

TEST(Simulator, FeatureCounts) {
  Simulator sim(HierarchyConfig{}, PrefetcherRegistry::standard());
  Trace t;
  for (std::uint64_t i = 0; i < 10; ++i) t.push_back({kIp + 4 * i, Kind::load, 0x10000 + i * 64});
  t.push_back({kIp, Kind::store, 0x90000});
  t.push_back({kIp, Kind::branch_conditional, 0});
  t.push_back({kIp, Kind::branch_return, 0});
  t.push_back({kIp + 0x1000, Kind::branch_other, 0});
  const auto s = sim.run_window(t, Psc{});
  EXPECT_EQ(s.hpc[Feature::l1d_pages_read_load], 1);
  EXPECT_EQ(s.hpc[Feature::l1i_pages_read_load], 2);
  EXPECT_EQ(s.hpc[Feature::l1d_rfo_access], 1);
  EXPECT_EQ(s.hpc[Feature::branch_conditional], 1);
  EXPECT_EQ(s.hpc[Feature::branch_return], 1);
  EXPECT_EQ(s.hpc[Feature::not_branch], 11);
  EXPECT_EQ(s.events.branch_other, 1u);
}

TEST(Simulator, FeatureSaturation) {
  Simulator sim(HierarchyConfig{}, PrefetcherRegistry::standard());
  const auto s = sim.run_window(repeated_other(70000), Psc{});
  EXPECT_EQ(s.hpc[Feature::not_branch], 65535);
  EXPECT_EQ(s.events.not_branch, 70000u);
}

TEST(Simulator, Errors) {
  Simulator sim(HierarchyConfig{}, PrefetcherRegistry::standard());
  EXPECT_THROW(sim.run_window({}, Psc{}), Error);
  Psc bad;
  bad.slot = {0, 9, 0, 0};
  const auto t = repeated_other(4);
  EXPECT_THROW(sim.run_window(t, bad), Error);
}

}  // namespace
}  // namespace pfm
