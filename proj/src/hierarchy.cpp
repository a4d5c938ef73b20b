#include "pfm/hierarchy.hpp"

#include <array>

#include "pfm/error.hpp"

namespace pfm {

std::string_view level_name(Level level) {
  static constexpr std::array<std::string_view, kNumLevels> kNames = {"l1i", "l1d",
                                                                     "l2", "llc"};
  return kNames[index_of(level)];
}

void HierarchyConfig::validate() const {
  std::uint32_t previous = 0;
  for (Level level : kAllLevels) {
    const auto& g = at(level);
    const auto name = std::string(level_name(level));
    if (g.ways == 0 || g.size_bytes == 0 || g.size_bytes % (g.ways * kLineBytes) != 0) {
      throw Error(name + ": size must be a positive multiple of ways x 64B");
    }
    // L1I and L1D are parallel; each must be faster than L2.
    if (level == Level::l2 &&
        !(g.hit_latency > at(Level::l1i).hit_latency &&
          g.hit_latency > at(Level::l1d).hit_latency)) {
      throw Error("latencies must increase from L1 to DRAM");
    }
    if (level == Level::llc && g.hit_latency <= previous) {
      throw Error("latencies must increase from L1 to DRAM");
    }
    previous = g.hit_latency;
  }
  if (dram_latency <= at(Level::llc).hit_latency) {
    throw Error("latencies must increase from L1 to DRAM");
  }
  if (issue_width == 0) throw Error("issue width must be at least 1");
  if (!(exposure >= 0.0)) throw Error("exposure must be nonnegative");
}

Cache::Cache(const CacheGeometry& geometry)
    : sets_(geometry.size_bytes / (geometry.ways * kLineBytes)),
      ways_(geometry.ways),
      ways_storage_(sets_ * ways_),
      shadow_(sets_ * ways_),
      shadow_next_(sets_, 0) {
  if (sets_ == 0) throw Error("cache has no sets");
}

Cache::Way* Cache::find(std::uint64_t line) {
  Way* set = &ways_storage_[set_of(line) * ways_];
  for (std::size_t w = 0; w < ways_; ++w) {
    if (set[w].valid && set[w].line == line) return &set[w];
  }
  return nullptr;
}

const Cache::Way* Cache::find(std::uint64_t line) const {
  return const_cast<Cache*>(this)->find(line);
}

bool Cache::contains(std::uint64_t line) const { return find(line) != nullptr; }

bool Cache::take_shadow(std::uint64_t line) {
  Shadow* shadow = &shadow_[set_of(line) * ways_];
  for (std::size_t w = 0; w < ways_; ++w) {
    Shadow& s = shadow[w];
    if (!s.valid || s.victim != line) continue;
    s.valid = false;
    if (s.confirmed_unused) return true;
    const Way* by = find(s.by);
    return by != nullptr && by->prefetched;
  }
  return false;
}

Cache::DemandResult Cache::demand_lookup(std::uint64_t line) {
  DemandResult result;
  if (Way* way = find(line)) {
    result.hit = true;
    way->stamp = ++clock_;
    if (way->prefetched) {
      way->prefetched = false;
      result.first_use_of_prefetch = true;
    }
    return result;
  }
  result.miss_caused_by_prefetch = take_shadow(line);
  return result;
}

Cache::FillResult Cache::fill(std::uint64_t line, bool prefetched) {
  FillResult result;
  const std::size_t s = set_of(line);
  Way* set = &ways_storage_[s * ways_];
  Way* victim = &set[0];
  for (std::size_t w = 0; w < ways_; ++w) {
    if (!set[w].valid) {
      victim = &set[w];
      break;
    }
    if (set[w].stamp < victim->stamp) victim = &set[w];
  }

  Shadow* shadow = &shadow_[s * ways_];
  if (victim->valid) {
    for (std::size_t w = 0; w < ways_; ++w) {
      if (!shadow[w].valid || shadow[w].by != victim->line) continue;
      if (victim->prefetched) {
        shadow[w].confirmed_unused = true;
      } else {
        shadow[w].valid = false;
      }
    }
    result.evicted_unused_prefetch = victim->prefetched;
    if (prefetched) {
      auto& slot = shadow_next_[s];
      shadow[slot] = {victim->line, line, true, false};
      slot = static_cast<std::uint8_t>((slot + 1) % ways_);
    }
  }
  *victim = {line, ++clock_, true, prefetched};
  return result;
}

Hierarchy::Hierarchy(const HierarchyConfig& config)
    : config_(config),
      caches_{Cache(config.levels[0]), Cache(config.levels[1]),
              Cache(config.levels[2]), Cache(config.levels[3])} {
  config_.validate();
}

std::uint32_t Hierarchy::latency_of(int level) const {
  return level == kDramLevel ? config_.dram_latency
                             : config_.levels[static_cast<std::size_t>(level)].hit_latency;
}

bool Hierarchy::contains(Level level, std::uint64_t address) const {
  return caches_[index_of(level)].contains(line_number(address));
}

AccessResult Hierarchy::access(std::uint64_t address, Space space, bool /*is_write*/,
                               Origin origin) {
  const std::uint64_t line = line_number(address);
  const Level first = space == Space::instruction ? Level::l1i : Level::l1d;
  const std::array<std::size_t, 3> path = {index_of(first), index_of(Level::l2),
                                           index_of(Level::llc)};
  AccessResult result;

  if (origin.is_prefetch) {
    const std::size_t target = index_of(origin.target);
    if (caches_[target].contains(line)) {
      result.hit_level = static_cast<int>(target);
      result.service_latency = latency_of(result.hit_level);
      return result;
    }
    result.hit_level = kDramLevel;
    for (std::size_t lvl = index_of(Level::l2); lvl <= index_of(Level::llc); ++lvl) {
      if (lvl > target && caches_[lvl].contains(line)) {
        result.hit_level = static_cast<int>(lvl);
        break;
      }
    }
    result.service_latency = latency_of(result.hit_level);
    result.filled = true;
    auto& counters = counters_[target];
    ++counters.prefetch_issued;
    if (caches_[target].fill(line, true).evicted_unused_prefetch) {
      ++counters.prefetch_unused_evicted;
    }
    return result;
  }

  std::size_t depth = 0;
  for (; depth < path.size(); ++depth) {
    const std::size_t lvl = path[depth];
    auto& counters = counters_[lvl];
    ++counters.demand_accesses;
    const auto r = caches_[lvl].demand_lookup(line);
    if (r.hit) {
      if (r.first_use_of_prefetch) ++counters.prefetch_useful;
      result.hit_level = static_cast<int>(lvl);
      break;
    }
    ++counters.demand_misses;
    if (r.miss_caused_by_prefetch) ++counters.misses_caused_by_prefetch;
  }
  if (depth == path.size()) result.hit_level = kDramLevel;
  for (std::size_t k = 0; k < depth && k < path.size(); ++k) {
    const std::size_t lvl = path[k];
    if (caches_[lvl].fill(line, false).evicted_unused_prefetch) {
      ++counters_[lvl].prefetch_unused_evicted;
    }
  }
  result.service_latency = latency_of(result.hit_level);
  return result;
}

}  // namespace pfm
