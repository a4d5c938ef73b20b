#include <gtest/gtest.h>

#include <random>

#include "pfm/error.hpp"
#include "pfm/prefetch.hpp"

namespace pfm {
namespace {

std::vector<std::uint64_t> addresses(const std::vector<PrefetchRequest>& reqs) {
  std::vector<std::uint64_t> out;
  for (const auto& r : reqs) out.push_back(r.address);
  return out;
}

std::vector<PrefetchRequest> feed(Prefetcher& p, std::uint64_t ip,
                                  std::initializer_list<std::uint64_t> addrs) {
  std::vector<PrefetchRequest> out;
  for (auto a : addrs) {
    out.clear();
    p.observe({ip, a, false}, out);
  }
  return out;
}

TEST(Prefetcher, NextLineEmitsFollowingLine) {
  Prefetcher p(NextLine{}, Level::l1d);
  std::vector<PrefetchRequest> out;
  p.observe({0x400, 0x1000, false}, out);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].address, 0x1040u);
  EXPECT_EQ(out[0].target_level, Level::l1d);
}

TEST(Prefetcher, IpStrideConfirmsBeforeEmitting) {
  Prefetcher p(IpStride{256, 2}, Level::l1d);
  EXPECT_TRUE(feed(p, 0x500, {0x100, 0x140}).empty());
  EXPECT_EQ(addresses(feed(p, 0x500, {0x180})), (std::vector<std::uint64_t>{0x1C0, 0x200}));
}

TEST(Prefetcher, IpStrideTracksIpsSeparately) {
  Prefetcher p(IpStride{256, 2}, Level::l1d);
  std::vector<PrefetchRequest> out;
  // Interleave two ips in different table slots.
  for (std::uint64_t k = 0; k < 3; ++k) {
    out.clear();
    p.observe({0x10, 0x10000 + k * 0x80, false}, out);
    p.observe({0x14, 0x90000 - k * 0x40, false}, out);
  }
  EXPECT_EQ(addresses(out), (std::vector<std::uint64_t>{0x10180, 0x10200, 0x8FF40, 0x8FF00}));
}

TEST(Prefetcher, StreamNeedsDetectLenMonotoneAccesses) {
  Prefetcher p(Stream{3, 4}, Level::l2);
  EXPECT_TRUE(feed(p, 1, {0x0, 0x40}).empty());
  EXPECT_EQ(addresses(feed(p, 1, {0x80})),
            (std::vector<std::uint64_t>{0xC0, 0x100, 0x140, 0x180}));
}

TEST(Prefetcher, StreamDescending) {
  Prefetcher p(Stream{3, 2}, Level::l2);
  EXPECT_EQ(addresses(feed(p, 1, {0x10000, 0xFFC0, 0xFF80})),
            (std::vector<std::uint64_t>{0xFF40, 0xFF00}));
}

TEST(Prefetcher, RegionReplaysFootprintOnReentry) {
  Prefetcher p(Region{4096, 64}, Level::l2);
  EXPECT_TRUE(feed(p, 1, {0x1000, 0x1080, 0x1100}).empty());
  EXPECT_TRUE(feed(p, 1, {0x5000}).empty());
  EXPECT_EQ(addresses(feed(p, 1, {0x1000})), (std::vector<std::uint64_t>{0x1080, 0x1100}));
}

TEST(Prefetcher, EmittedAddressesAreLineAligned) {
  std::mt19937_64 rng(3);
  for (const PrefetcherKind& kind :
       {PrefetcherKind{NextLine{}}, PrefetcherKind{IpStride{}}, PrefetcherKind{Stream{}},
        PrefetcherKind{Region{}}}) {
    Prefetcher p(kind, Level::l2);
    std::vector<PrefetchRequest> out;
    std::uint64_t a = 0x100000;
    for (int i = 0; i < 5000; ++i) {
      a += (rng() % 5) * 24;
      p.observe({0x40 + (rng() % 4) * 4, a, false}, out);
    }
    for (const auto& r : out) EXPECT_EQ(r.address % 64, 0u);
  }
}

TEST(Prefetcher, KindParsingRoundTrip) {
  for (const char* s : {"none", "next_line", "ip_stride(128,3)", "stream(4,2)", "region(4096,32)"}) {
    EXPECT_EQ(describe(parse_prefetcher_kind(s)), s);
  }
  EXPECT_EQ(parse_prefetcher_kind("ip_stride"), PrefetcherKind{IpStride{}});
  EXPECT_THROW(parse_prefetcher_kind("bingo"), Error);
  EXPECT_THROW(validate(PrefetcherKind{IpStride{100, 2}}), Error);
  EXPECT_THROW(validate(PrefetcherKind{Stream{3, 0}}), Error);
}

TEST(Gate, SelectsOnlyNamedPrefetcher) {
  const auto reg = PrefetcherRegistry::standard();
  const auto psc = parse_psc_label("none/next_line/ip_stride/none", reg);
  const auto sizes = reg.sizes();
  EXPECT_TRUE(gate(psc, Level::l1d, 1, sizes));
  EXPECT_FALSE(gate(psc, Level::l1i, 1, sizes));
  EXPECT_THROW(gate(psc, Level::llc, 7, sizes), Error);
}

TEST(Gate, ExactlyOnePrefetcherPerLevelOverWideCatalog) {
  const auto reg = PrefetcherRegistry::wide();
  const auto catalog = PscCatalog::enumerate(reg.sizes());
  ASSERT_EQ(catalog.size(), 300u);
  for (const auto& psc : catalog.list()) {
    for (Level level : kAllLevels) {
      int on = 0;
      for (std::size_t id = 1; id < reg.at(level).size(); ++id) on += gate(psc, level, id, reg.sizes());
      EXPECT_EQ(on, psc.at(level) == 0 ? 0 : 1);
    }
  }
}

TEST(PrefetcherBank, GatingDoesNotChangeTraining) {
  const auto reg = PrefetcherRegistry::standard();
  PrefetcherBank a(reg);
  PrefetcherBank b(reg);
  const Psc all_off{};
  const auto all_on = parse_psc_label("next_line/stream/region/next_line", reg);
  std::mt19937_64 rng(9);
  std::vector<PrefetchRequest> out_a;
  std::vector<PrefetchRequest> out_b;
  for (int i = 0; i < 10000; ++i) {
    const Level level = kAllLevels[rng() % 4];
    const DemandAccess acc{0x400 + (rng() % 64) * 4, (rng() % (1 << 20)) * 8, (rng() & 1) != 0};
    a.observe(level, acc, all_off, out_a);
    b.observe(level, acc, all_on, out_b);
  }
  EXPECT_TRUE(out_a.empty());
  EXPECT_FALSE(out_b.empty());
  EXPECT_TRUE(a == b);
}

TEST(Registry, StandardAndWideSizes) {
  EXPECT_EQ(PrefetcherRegistry::standard().sizes(), (RegistrySizes{2, 4, 5, 2}));
  EXPECT_EQ(PrefetcherRegistry::wide().sizes(), (RegistrySizes{5, 5, 6, 2}));
  auto bad = PrefetcherRegistry::standard();
  bad.levels[0].front() = NextLine{};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Registry, LabelRoundTrip) {
  const auto reg = PrefetcherRegistry::standard();
  const auto catalog = PscCatalog::enumerate(reg.sizes());
  for (const auto& psc : catalog.list()) {
    EXPECT_EQ(parse_psc_label(psc_label(psc, reg), reg), psc);
  }
  EXPECT_THROW(parse_psc_label("none/none/none", reg), Error);
  EXPECT_THROW(parse_psc_label("stream/none/none/none", reg), Error);
}

}  // namespace
}  // namespace pfm
