#include <gtest/gtest.h>

#include <set>

#include "pfm/error.hpp"
#include "pfm/workload.hpp"

namespace pfm {
namespace {

std::size_t count_kind(const Trace& t, Kind k) {
  std::size_t n = 0;
  for (const auto& r : t) n += r.kind == k;
  return n;
}

TEST(Workload, PureStridedLoads) {
  PhaseSpec p;
  p.length = 1000;
  p.pattern = Strided{64, 0};
  const auto t = generate_synthetic(make_workload({p}, 1));
  ASSERT_EQ(t.size(), 1000u);
  EXPECT_EQ(count_kind(t, Kind::load), 1000u);
  for (std::size_t i = 1; i < t.size(); ++i) {
    EXPECT_EQ(t[i].data_addr - t[i - 1].data_addr, 64u);
  }
}

TEST(Workload, DeterministicForSeed) {
  PhaseSpec a;
  a.length = 5000;
  a.pattern = PointerChase{1 << 16, 64};
  a.branch_mix = {0.1, 0.05, 0.02};
  a.load_store_ratio = 0.7;
  PhaseSpec b = a;
  b.pattern = Mixed{{{1.0, Strided{8, 4096}}, {2.0, Streaming{1 << 20}}}};
  const auto spec = make_workload({a, b}, 99);
  EXPECT_EQ(generate_synthetic(spec), generate_synthetic(spec));
  auto other = spec;
  other.seed = 100;
  EXPECT_NE(generate_synthetic(spec), generate_synthetic(other));
}

TEST(Workload, ConditionalFractionWithinOnePercent) {
  PhaseSpec p;
  p.length = 100000;
  p.branch_mix.conditional = 0.2;
  p.pattern = Strided{64, 1 << 20};
  const auto t = generate_synthetic(make_workload({p}, 5));
  const auto n = count_kind(t, Kind::branch_conditional);
  EXPECT_GE(n, 19800u);
  EXPECT_LE(n, 20200u);
}

TEST(Workload, LoadStoreRatioWithinOnePercent) {
  PhaseSpec p;
  p.length = 100000;
  p.branch_mix = {0.1, 0.02, 0.03};
  p.load_store_ratio = 0.75;
  p.mem_fraction = 0.5;
  const auto t = generate_synthetic(make_workload({p}, 8));
  const double loads = static_cast<double>(count_kind(t, Kind::load));
  const double stores = static_cast<double>(count_kind(t, Kind::store));
  EXPECT_NEAR(loads / (loads + stores), 0.75, 0.01);
  EXPECT_NEAR(static_cast<double>(count_kind(t, Kind::branch_return)) / 1e5, 0.02, 0.01);
  EXPECT_NEAR(static_cast<double>(count_kind(t, Kind::branch_other)) / 1e5, 0.03, 0.01);
}

TEST(Workload, PointerChaseConfinedToWorkingSet) {
  PhaseSpec p;
  p.length = 20000;
  const std::uint64_t ws = 64 * 256;
  p.pattern = PointerChase{ws, 64};
  p.data_base = 0x100000;
  const auto t = generate_synthetic(make_workload({p}, 3));
  std::set<std::uint64_t> seen;
  for (const auto& r : t) {
    ASSERT_GE(r.data_addr, 0x100000u);
    ASSERT_LT(r.data_addr, 0x100000u + ws);
    seen.insert(r.data_addr);
  }
  // A single random cycle visits every node.
  EXPECT_EQ(seen.size(), 256u);
  // First lap is a permutation: no node repeats in the first 256 steps.
  std::set<std::uint64_t> lap;
  for (std::size_t i = 0; i < 256; ++i) lap.insert(t[i].data_addr);
  EXPECT_EQ(lap.size(), 256u);
}

TEST(Workload, StorePatternDrivesOnlyStores) {
  PhaseSpec p;
  p.length = 10000;
  p.load_store_ratio = 0.5;
  p.pattern = Strided{8, 4096};
  p.store_pattern = Strided{192, 0};
  const auto t = generate_synthetic(make_workload({p}, 2));
  std::uint64_t prev = 0;
  bool first = true;
  for (const auto& r : t) {
    if (r.kind != Kind::store) continue;
    if (!first) EXPECT_EQ(r.data_addr - prev, 192u);
    prev = r.data_addr;
    first = false;
  }
  EXPECT_FALSE(first);
}

TEST(Workload, InvariantViolationsRejected) {
  PhaseSpec p;
  p.length = 0;
  EXPECT_THROW(generate_synthetic(make_workload({p}, 1)), Error);
  p.length = 10;
  p.pattern = PointerChase{32, 8};
  EXPECT_THROW(generate_synthetic(make_workload({p}, 1)), Error);
  p.pattern = Strided{};
  p.branch_mix = {0.6, 0.3, 0.2};
  EXPECT_THROW(generate_synthetic(make_workload({p}, 1)), Error);
  p.branch_mix = {};
  p.load_store_ratio = 1.5;
  EXPECT_THROW(generate_synthetic(make_workload({p}, 1)), Error);
  p.load_store_ratio = 1.0;
  p.pattern = Mixed{{{-1.0, Strided{}}}};
  EXPECT_THROW(generate_synthetic(make_workload({p}, 1)), Error);
  auto spec = make_workload({PhaseSpec{.length = 10}}, 1);
  spec.total_instructions = 11;
  EXPECT_THROW(generate_synthetic(spec), Error);
}

TEST(Workload, NonMemoryRecordsHaveNoDataAddress) {
  PhaseSpec p;
  p.length = 5000;
  p.branch_mix = {0.2, 0.1, 0.1};
  p.mem_fraction = 0.3;
  for (const auto& r : generate_synthetic(make_workload({p}, 4))) {
    EXPECT_NE(r.ip, 0u);
    if (!is_memory(r.kind)) EXPECT_EQ(r.data_addr, 0u);
  }
}

}  // namespace
}  // namespace pfm
