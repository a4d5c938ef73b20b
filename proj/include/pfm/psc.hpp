#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pfm/hierarchy.hpp"

namespace pfm {

// Number of prefetcher options registered at L1I, L1D, L2, LLC.
using RegistrySizes = std::array<std::size_t, kNumLevels>;

// Prefetcher system configuration: which registered prefetcher is active at
// each level. Slot value 0 is always "none".
struct Psc {
  std::array<std::uint8_t, kNumLevels> slot{};

  std::uint8_t at(Level level) const { return slot[index_of(level)]; }
  // Levels with a prefetcher other than "none".
  int active_count() const;

  friend bool operator==(const Psc&, const Psc&) = default;
};

// Dense id ((l1i * N_l1d + l1d) * N_l2 + l2) * N_llc + llc.
std::size_t psc_id(const Psc& psc, const RegistrySizes& sizes);
Psc psc_from_id(std::size_t id, const RegistrySizes& sizes);

class PscCatalog {
 public:
  // All PSCs in id order.
  static PscCatalog enumerate(const RegistrySizes& sizes);

  const RegistrySizes& sizes() const { return sizes_; }
  std::size_t size() const { return list_.size(); }
  const Psc& at(std::size_t id) const { return list_.at(id); }
  const std::vector<Psc>& list() const { return list_; }

 private:
  RegistrySizes sizes_{};
  std::vector<Psc> list_;
};

// Mean IPC per trace (row) and PSC (column).
struct IpcTable {
  std::vector<std::string> traces;
  std::vector<std::size_t> psc_ids;
  std::vector<std::vector<double>> ipc;

  void validate() const;
  void write_csv(const std::filesystem::path& path) const;
  static IpcTable read_csv(const std::filesystem::path& path);
};

// Column positions of the top_k PSCs of one row: IPC descending, ties by
// ascending PSC id.
std::vector<std::size_t> top_k_columns(const IpcTable& table, std::size_t row,
                                       std::size_t top_k);

// Greedy deployment-set selection: repeatedly adds the PSC whose top-k
// membership covers the most uncovered traces (ties: more top-k sets overall,
// fewer active prefetchers, lower id). Returns ids in the order added.
std::vector<std::size_t> prune(const IpcTable& table, const RegistrySizes& sizes,
                               std::size_t top_k = 10);

}  // namespace pfm
