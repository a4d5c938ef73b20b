#include "pfm/simulator.hpp"

#include <algorithm>

#include "pfm/error.hpp"

namespace pfm {
namespace {

// Distinct 4KB pages seen in a window.
class PageCounter {
 public:
  void touch(std::uint64_t address) {
    const std::uint64_t page = address / kPageBytes;
    if (!pages_.empty() && pages_.back() == page) return;
    pages_.push_back(page);
  }
  std::uint64_t distinct() {
    std::sort(pages_.begin(), pages_.end());
    return static_cast<std::uint64_t>(
        std::unique(pages_.begin(), pages_.end()) - pages_.begin());
  }

 private:
  std::vector<std::uint64_t> pages_;
};

}  // namespace

double proxy_cycles(std::uint64_t instructions, std::uint64_t stall_cycles,
                    const HierarchyConfig& config) {
  const std::uint64_t issue = (instructions + config.issue_width - 1) / config.issue_width;
  return static_cast<double>(issue) + config.exposure * static_cast<double>(stall_cycles);
}

Simulator::Simulator(const HierarchyConfig& config, const PrefetcherRegistry& registry)
    : hierarchy_(config), bank_(registry) {}

void Simulator::demand(std::uint64_t ip, std::uint64_t address, Space space, bool is_write,
                       const Psc& psc, std::uint64_t& stall) {
  const auto result = hierarchy_.access(address, space, is_write, Origin::demand());
  const Level first = space == Space::instruction ? Level::l1i : Level::l1d;
  const std::uint32_t l1_latency = hierarchy_.config().at(first).hit_latency;
  if (result.service_latency > l1_latency) stall += result.service_latency - l1_latency;

  // Every level the access reached observes it; hit_level bounds the walk.
  requests_.clear();
  const std::array<Level, 3> path = {first, Level::l2, Level::llc};
  for (std::size_t depth = 0; depth < path.size(); ++depth) {
    const int lvl = static_cast<int>(index_of(path[depth]));
    const bool hit = lvl == result.hit_level;
    bank_.observe(path[depth], {ip, address, hit}, psc, requests_);
    if (hit) break;
  }
  for (const auto& req : requests_) {
    hierarchy_.access(req.address, space, false, Origin::prefetch(req.target_level));
  }
}

WindowStats Simulator::run_window(std::span<const TraceRecord> window, const Psc& psc) {
  if (window.empty()) throw Error("run_window: empty window");
  psc_id(psc, bank_.registry().sizes());

  hierarchy_.reset_counters();
  WindowStats stats;
  EventCounts& ev = stats.events;
  PageCounter code_pages;
  PageCounter load_pages;
  std::uint64_t stall = 0;

  for (const auto& r : window) {
    demand(r.ip, line_align(r.ip), Space::instruction, false, psc, stall);
    code_pages.touch(r.ip);
    switch (r.kind) {
      case Kind::load:
        ++ev.loads;
        load_pages.touch(r.data_addr);
        demand(r.ip, r.data_addr, Space::data, false, psc, stall);
        break;
      case Kind::store:
        ++ev.stores;
        demand(r.ip, r.data_addr, Space::data, true, psc, stall);
        break;
      case Kind::branch_conditional: ++ev.branch_conditional; break;
      case Kind::branch_return: ++ev.branch_return; break;
      case Kind::branch_other: ++ev.branch_other; break;
      case Kind::other: break;
    }
    if (!is_branch(r.kind)) ++ev.not_branch;
  }
  ev.l1i_pages = code_pages.distinct();
  ev.l1d_pages = load_pages.distinct();

  stats.instructions = window.size();
  stats.stall_cycles = stall;
  stats.cycles = proxy_cycles(stats.instructions, stall, hierarchy_.config());
  stats.ipc = static_cast<double>(stats.instructions) / stats.cycles;
  stats.levels = hierarchy_.counters();
  stats.hpc.values = {saturate16(ev.l1i_pages),          saturate16(ev.l1d_pages),
                      saturate16(ev.stores),             saturate16(ev.branch_return),
                      saturate16(ev.not_branch),         saturate16(ev.branch_conditional)};
  return stats;
}

}  // namespace pfm
