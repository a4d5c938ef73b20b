#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "pfm/error.hpp"
#include "pfm/psc.hpp"

namespace pfm {
namespace {

const RegistrySizes kFlat{1, 1, 1, 1};

IpcTable make_table(const std::vector<std::vector<double>>& rows) {
  IpcTable t;
  for (std::size_t r = 0; r < rows.size(); ++r) t.traces.push_back("t" + std::to_string(r));
  for (std::size_t c = 0; c < rows.at(0).size(); ++c) t.psc_ids.push_back(c);
  t.ipc = rows;
  return t;
}

std::vector<std::set<std::size_t>> top_sets(const IpcTable& t, std::size_t k) {
  std::vector<std::set<std::size_t>> out;
  for (const auto& row : t.ipc) {
    std::vector<std::size_t> order(row.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return row[a] != row[b] ? row[a] > row[b] : t.psc_ids[a] < t.psc_ids[b];
    });
    std::set<std::size_t> s;
    for (std::size_t i = 0; i < std::min(k, order.size()); ++i) s.insert(t.psc_ids[order[i]]);
    out.push_back(s);
  }
  return out;
}

bool covers(const std::vector<std::set<std::size_t>>& tops, const std::vector<std::size_t>& pick) {
  for (const auto& s : tops) {
    if (std::none_of(pick.begin(), pick.end(), [&](std::size_t id) { return s.count(id) > 0; })) {
      return false;
    }
  }
  return true;
}

// Smallest cover by exhaustive subset enumeration.
std::size_t min_cover(const std::vector<std::set<std::size_t>>& tops, std::size_t n) {
  std::size_t best = n;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<std::size_t> pick;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) pick.push_back(i);
    }
    if (pick.size() < best && covers(tops, pick)) best = pick.size();
  }
  return best;
}

TEST(PscId, DenseEncoding) {
  const RegistrySizes sizes{2, 1, 3, 1};
  const auto catalog = PscCatalog::enumerate(sizes);
  EXPECT_EQ(catalog.size(), 6u);
  Psc p;
  p.slot = {1, 0, 2, 0};
  EXPECT_EQ(psc_id(p, sizes), 5u);
  EXPECT_EQ(psc_from_id(5, sizes), p);
  for (std::size_t id = 0; id < catalog.size(); ++id) EXPECT_EQ(psc_id(catalog.at(id), sizes), id);
}

TEST(PscCatalog, Sizes) {
  EXPECT_EQ(PscCatalog::enumerate({5, 5, 6, 2}).size(), 300u);
  const auto one = PscCatalog::enumerate(kFlat);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one.at(0).active_count(), 0);
  EXPECT_THROW(PscCatalog::enumerate({0, 1, 1, 1}), Error);
  EXPECT_THROW(psc_from_id(6, {2, 1, 3, 1}), Error);
}

TEST(PscCatalog, LexicographicOrder) {
  const auto catalog = PscCatalog::enumerate({2, 4, 5, 2});
  for (std::size_t i = 1; i < catalog.size(); ++i) {
    EXPECT_LT(catalog.at(i - 1).slot, catalog.at(i).slot);
  }
}

TEST(Prune, SingleSharedBest) {
  const auto t = make_table({{1.0, 2.0, 0.5}, {1.1, 1.9, 0.4}});
  EXPECT_EQ(prune(t, {1, 1, 3, 1}, 1), (std::vector<std::size_t>{1}));
}

TEST(Prune, EqualScoresAddedByTieRule) {
  const auto t = make_table({{2.0, 1.0, 0.5}, {0.1, 1.0, 3.0}});
  EXPECT_EQ(prune(t, {1, 1, 3, 1}, 1), (std::vector<std::size_t>{0, 2}));
}

TEST(Prune, FewerActivePrefetchersWinScoreTies) {
  // ids under sizes (1,1,1,4): 0 = all none, 3 = llc option 3; both active counts differ.
  const RegistrySizes sizes{1, 2, 1, 2};  // id 1 -> llc on, id 2 -> l1d on, id 3 -> both
  auto t = make_table({{0.0, 1.0, 0.0, 2.0}, {0.0, 0.0, 1.0, 2.0}});
  // top-2 sets: {3,1} and {3,2}; PSC 3 has score 2 and covers both.
  EXPECT_EQ(prune(t, sizes, 2), (std::vector<std::size_t>{3}));
  // Now 1 and 2 tie with 3 on score 1 each at top-1 separate traces.
  t = make_table({{0.0, 5.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 5.0}});
  EXPECT_EQ(prune(t, sizes, 1), (std::vector<std::size_t>{1, 3}));
}

TEST(Prune, ExactTieInIpcPrefersLowerId) {
  const auto t = make_table({{1.0, 1.0, 1.0}});
  EXPECT_EQ(prune(t, {1, 1, 3, 1}, 1), (std::vector<std::size_t>{0}));
}

TEST(Prune, CoverageAndNearMinimalOnRandomInstances) {
  std::mt19937_64 rng(11);
  for (int inst = 0; inst < 20; ++inst) {
    std::vector<std::vector<double>> rows(8, std::vector<double>(10));
    for (auto& r : rows) {
      for (auto& v : r) v = 0.5 + static_cast<double>(rng() % 1000) / 500.0;
    }
    const auto t = make_table(rows);
    const auto pick = prune(t, {1, 1, 10, 1}, 3);
    const auto tops = top_sets(t, 3);
    EXPECT_TRUE(covers(tops, pick));
    EXPECT_LE(pick.size(), min_cover(tops, 10) + 1);
    EXPECT_EQ(prune(t, {1, 1, 10, 1}, 3), pick);
  }
}

TEST(Prune, MinimumCoverShrinksAsTopKGrows) {
  // Larger top-k sets are supersets, so the optimum cannot grow; the greedy
  // result stays within one of it at every k.
  std::mt19937_64 rng(12);
  for (int inst = 0; inst < 30; ++inst) {
    std::vector<std::vector<double>> rows(6, std::vector<double>(8));
    for (auto& r : rows) {
      for (auto& v : r) v = static_cast<double>(rng() % 100);
    }
    const auto t = make_table(rows);
    std::size_t prev = 1000;
    for (std::size_t k = 1; k <= 8; ++k) {
      const auto best = min_cover(top_sets(t, k), 8);
      EXPECT_LE(best, prev);
      EXPECT_LE(prune(t, {1, 1, 8, 1}, k).size(), best + 1);
      prev = best;
    }
  }
}

TEST(Prune, ReScoresAgainstUncoveredTraces) {
  // Top-2 sets {0,1} {0,4} {2,4} {1,2}; every PSC scores 2. After PSC 0,
  // PSC 2 alone covers both remaining traces, so a fixed-order walk that
  // would add 1 then 2 is beaten.
  const auto t = make_table({{3, 8, 3, 2, 3}, {6, 4, 0, 5, 6}, {2, 2, 4, 1, 5}, {4, 9, 9, 0, 9}});
  EXPECT_EQ(prune(t, {1, 1, 5, 1}, 2), (std::vector<std::size_t>{0, 2}));
}

TEST(Prune, RejectsIncompleteTable) {
  auto t = make_table({{1.0, NAN}});
  EXPECT_THROW(prune(t, {1, 1, 2, 1}, 1), Error);
  EXPECT_THROW(prune(make_table({{1.0, 2.0}}), {1, 1, 2, 1}, 0), Error);
}

TEST(IpcTable, CsvRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "pfm_psc_test";
  auto t = make_table({{1.25, 0.1 + 0.2}, {3.0, 1e-9}});
  t.psc_ids = {4, 17};
  t.write_csv(dir / "ipc.csv");
  const auto back = IpcTable::read_csv(dir / "ipc.csv");
  EXPECT_EQ(back.traces, t.traces);
  EXPECT_EQ(back.psc_ids, t.psc_ids);
  EXPECT_EQ(back.ipc, t.ipc);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace pfm
