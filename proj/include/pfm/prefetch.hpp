#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pfm/hierarchy.hpp"
#include "pfm/psc.hpp"

namespace pfm {

struct NoPrefetch {
  friend bool operator==(const NoPrefetch&, const NoPrefetch&) = default;
};
struct NextLine {
  friend bool operator==(const NextLine&, const NextLine&) = default;
};
struct IpStride {
  std::uint32_t table_entries = 256;
  std::uint32_t degree = 2;
  friend bool operator==(const IpStride&, const IpStride&) = default;
};
struct Stream {
  std::uint32_t detect_len = 3;
  std::uint32_t degree = 4;
  friend bool operator==(const Stream&, const Stream&) = default;
};
struct Region {
  std::uint64_t region_bytes = 4096;
  std::uint32_t table_entries = 64;
  friend bool operator==(const Region&, const Region&) = default;
};

using PrefetcherKind = std::variant<NoPrefetch, NextLine, IpStride, Stream, Region>;

// "none", "next_line", "ip_stride(256,2)", "stream(3,4)", "region(4096,64)";
// parameters may be omitted to take the defaults.
PrefetcherKind parse_prefetcher_kind(std::string_view text);
std::string describe(const PrefetcherKind& kind);
void validate(const PrefetcherKind& kind);

struct PrefetchRequest {
  std::uint64_t address = 0;  // line aligned
  Level target_level = Level::l1d;

  friend bool operator==(const PrefetchRequest&, const PrefetchRequest&) = default;
};

// One demand access as seen by the prefetcher of the level it reached.
struct DemandAccess {
  std::uint64_t ip = 0;
  std::uint64_t address = 0;
  bool hit = false;
};

// Trains on every demand access at its level. Whether the emitted requests are
// issued is decided by the caller (gating).
class Prefetcher {
 public:
  Prefetcher(const PrefetcherKind& kind, Level level);

  // Appends requests to `out`.
  void observe(const DemandAccess& access, std::vector<PrefetchRequest>& out);

  const PrefetcherKind& kind() const { return kind_; }
  Level level() const { return level_; }

  friend bool operator==(const Prefetcher&, const Prefetcher&) = default;

 private:
  struct StrideEntry {
    std::uint64_t ip = 0;
    std::uint64_t last_addr = 0;
    std::int64_t stride = 0;
    bool valid = false;
    friend bool operator==(const StrideEntry&, const StrideEntry&) = default;
  };
  struct StreamTracker {
    std::uint64_t last_line = 0;
    std::uint64_t stamp = 0;
    int direction = 0;
    std::uint32_t run = 0;
    bool valid = false;
    friend bool operator==(const StreamTracker&, const StreamTracker&) = default;
  };
  struct RegionEntry {
    std::uint64_t region = 0;
    std::uint64_t bitmap = 0;
    std::uint64_t stamp = 0;
    bool valid = false;
    friend bool operator==(const RegionEntry&, const RegionEntry&) = default;
  };

  void emit(std::uint64_t line, std::vector<PrefetchRequest>& out) const;
  void observe_ip_stride(const IpStride& p, const DemandAccess& a,
                         std::vector<PrefetchRequest>& out);
  void observe_stream(const Stream& p, const DemandAccess& a,
                      std::vector<PrefetchRequest>& out);
  void observe_region(const Region& p, const DemandAccess& a,
                      std::vector<PrefetchRequest>& out);

  PrefetcherKind kind_;
  Level level_;
  std::uint64_t clock_ = 0;
  std::vector<StrideEntry> stride_table_;
  std::vector<StreamTracker> streams_;
  std::vector<RegionEntry> regions_;
  std::uint64_t current_region_ = ~std::uint64_t{0};
};

// Ordered prefetcher options per level; index 0 must be "none".
struct PrefetcherRegistry {
  std::array<std::vector<PrefetcherKind>, kNumLevels> levels;

  RegistrySizes sizes() const;
  const std::vector<PrefetcherKind>& at(Level level) const { return levels[index_of(level)]; }
  void validate() const;

  // 2 x 4 x 5 x 2 = 80 generic options.
  static PrefetcherRegistry standard();
  // 5 x 5 x 6 x 2 = 300 options, matching the size of the reference catalog.
  static PrefetcherRegistry wide();
};

// Human-readable PSC label, e.g. "none/next_line/ip_stride(256,2)/none".
std::string psc_label(const Psc& psc, const PrefetcherRegistry& registry);
// Parses a label produced by psc_label (or using bare option names).
Psc parse_psc_label(std::string_view label, const PrefetcherRegistry& registry);

// True iff `psc` selects `prefetcher_id` at `level`. Throws Error for an id
// outside the registry.
bool gate(const Psc& psc, Level level, std::size_t prefetcher_id,
          const RegistrySizes& sizes);

// Every registered prefetcher at every level; all train, only the ones the
// PSC selects emit.
class PrefetcherBank {
 public:
  explicit PrefetcherBank(const PrefetcherRegistry& registry);

  // Requests from the un-gated prefetcher at `level` are appended to `out`.
  void observe(Level level, const DemandAccess& access, const Psc& psc,
               std::vector<PrefetchRequest>& out);

  const PrefetcherRegistry& registry() const { return registry_; }

  friend bool operator==(const PrefetcherBank& a, const PrefetcherBank& b) {
    return a.prefetchers_ == b.prefetchers_;
  }

 private:
  PrefetcherRegistry registry_;
  std::array<std::vector<Prefetcher>, kNumLevels> prefetchers_;
  std::vector<PrefetchRequest> scratch_;
};

}  // namespace pfm
