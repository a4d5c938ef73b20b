#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pfm/features.hpp"
#include "pfm/hierarchy.hpp"
#include "pfm/prefetch.hpp"
#include "pfm/psc.hpp"
#include "pfm/trace.hpp"

namespace pfm {

// Raw (unsaturated) demand-side counts of one window; these depend only on the
// records, never on prefetch traffic.
struct EventCounts {
  std::uint64_t loads = 0;
  std::uint64_t stores = 0;
  std::uint64_t branch_conditional = 0;
  std::uint64_t branch_return = 0;
  std::uint64_t branch_other = 0;
  std::uint64_t not_branch = 0;
  std::uint64_t l1i_pages = 0;
  std::uint64_t l1d_pages = 0;

  friend bool operator==(const EventCounts&, const EventCounts&) = default;
};

struct WindowStats {
  std::uint64_t instructions = 0;
  double cycles = 0.0;
  double ipc = 0.0;
  // Sum over demand accesses of max(0, service latency - L1 hit latency).
  std::uint64_t stall_cycles = 0;
  HierarchyCounters levels{};
  EventCounts events;
  FeatureVector hpc;

  const LevelCounters& at(Level level) const { return levels[index_of(level)]; }
};

// cycles = ceil(instructions / issue_width) + exposure * stall_cycles.
double proxy_cycles(std::uint64_t instructions, std::uint64_t stall_cycles,
                    const HierarchyConfig& config);

// Cache hierarchy plus prefetcher bank; copying a Simulator snapshots all state.
class Simulator {
 public:
  Simulator(const HierarchyConfig& config, const PrefetcherRegistry& registry);

  // Runs the records in order under `psc`. Throws Error on an empty window or
  // a PSC outside the registry.
  WindowStats run_window(std::span<const TraceRecord> window, const Psc& psc);

  const Hierarchy& hierarchy() const { return hierarchy_; }
  const PrefetcherBank& bank() const { return bank_; }
  const HierarchyConfig& config() const { return hierarchy_.config(); }
  const PrefetcherRegistry& registry() const { return bank_.registry(); }

 private:
  void demand(std::uint64_t ip, std::uint64_t address, Space space, bool is_write,
              const Psc& psc, std::uint64_t& stall);

  Hierarchy hierarchy_;
  PrefetcherBank bank_;
  std::vector<PrefetchRequest> requests_;
};

}  // namespace pfm
