#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace pfm {

inline constexpr std::uint64_t kLineBytes = 64;
inline constexpr std::uint64_t kPageBytes = 4096;

constexpr std::uint64_t line_number(std::uint64_t addr) { return addr / kLineBytes; }
constexpr std::uint64_t line_align(std::uint64_t addr) { return addr & ~(kLineBytes - 1); }

enum class Level : std::uint8_t { l1i = 0, l1d = 1, l2 = 2, llc = 3 };
inline constexpr std::size_t kNumLevels = 4;
inline constexpr std::array<Level, kNumLevels> kAllLevels = {Level::l1i, Level::l1d,
                                                            Level::l2, Level::llc};
// hit_level value meaning "served by DRAM".
inline constexpr int kDramLevel = 4;

std::string_view level_name(Level level);
constexpr std::size_t index_of(Level level) { return static_cast<std::size_t>(level); }

struct CacheGeometry {
  std::uint64_t size_bytes = 0;
  std::uint32_t ways = 0;
  std::uint32_t hit_latency = 0;
};

struct HierarchyConfig {
  // L1I, L1D, L2, LLC.
  std::array<CacheGeometry, kNumLevels> levels{{
      {32 * 1024, 8, 3},
      {48 * 1024, 12, 5},
      {512 * 1024, 8, 10},
      {2 * 1024 * 1024, 16, 20},
  }};
  std::uint32_t dram_latency = 200;
  std::uint32_t issue_width = 4;
  // Fraction of each demand access's beyond-L1 latency that stalls retirement.
  double exposure = 0.3;

  const CacheGeometry& at(Level level) const { return levels[index_of(level)]; }
  // Throws Error on a geometry or latency violation.
  void validate() const;
};

struct LevelCounters {
  std::uint64_t demand_accesses = 0;
  std::uint64_t demand_misses = 0;
  std::uint64_t prefetch_issued = 0;
  std::uint64_t prefetch_useful = 0;
  std::uint64_t prefetch_unused_evicted = 0;
  std::uint64_t misses_caused_by_prefetch = 0;

  friend bool operator==(const LevelCounters&, const LevelCounters&) = default;
};

using HierarchyCounters = std::array<LevelCounters, kNumLevels>;

// Set-associative LRU cache of line numbers. Prefetched lines carry a tag
// until their first demand hit. Lines displaced by a prefetch fill are
// remembered so a later demand miss to them can be attributed to the prefetch.
class Cache {
 public:
  explicit Cache(const CacheGeometry& geometry);

  struct DemandResult {
    bool hit = false;
    bool first_use_of_prefetch = false;
    bool miss_caused_by_prefetch = false;
  };

  struct FillResult {
    bool evicted_unused_prefetch = false;
  };

  bool contains(std::uint64_t line) const;
  // Looks up a line for a demand access; updates LRU and the prefetch tag.
  DemandResult demand_lookup(std::uint64_t line);
  // Inserts an absent line as MRU.
  FillResult fill(std::uint64_t line, bool prefetched);

  std::size_t sets() const { return sets_; }
  std::size_t ways() const { return ways_; }

 private:
  struct Way {
    std::uint64_t line = 0;
    std::uint64_t stamp = 0;
    bool valid = false;
    bool prefetched = false;
  };
  struct Shadow {
    std::uint64_t victim = 0;
    std::uint64_t by = 0;
    bool valid = false;
    bool confirmed_unused = false;
  };

  std::size_t set_of(std::uint64_t line) const { return line % sets_; }
  Way* find(std::uint64_t line);
  const Way* find(std::uint64_t line) const;
  bool take_shadow(std::uint64_t line);

  std::size_t sets_;
  std::size_t ways_;
  std::uint64_t clock_ = 0;
  std::vector<Way> ways_storage_;
  std::vector<Shadow> shadow_;
  std::vector<std::uint8_t> shadow_next_;
};

enum class Space : std::uint8_t { instruction, data };

// Demand access, or a prefetch that fills only its target level.
struct Origin {
  bool is_prefetch = false;
  Level target = Level::l1d;

  static Origin demand() { return {}; }
  static Origin prefetch(Level target) { return {true, target}; }
};

struct AccessResult {
  int hit_level = kDramLevel;  // index_of(Level) or kDramLevel
  std::uint32_t service_latency = 0;
  // Prefetch only: false when the line was already present and nothing filled.
  bool filled = false;
};

// L1I/L1D -> L2 -> LLC -> DRAM lookup path with per-level counters.
class Hierarchy {
 public:
  explicit Hierarchy(const HierarchyConfig& config);

  AccessResult access(std::uint64_t address, Space space, bool is_write,
                      Origin origin);

  const HierarchyConfig& config() const { return config_; }
  const HierarchyCounters& counters() const { return counters_; }
  void reset_counters() { counters_ = {}; }
  bool contains(Level level, std::uint64_t address) const;

 private:
  std::uint32_t latency_of(int level) const;

  HierarchyConfig config_;
  std::array<Cache, kNumLevels> caches_;
  HierarchyCounters counters_{};
};

}  // namespace pfm
