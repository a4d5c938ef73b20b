#include "pfm/psc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "pfm/error.hpp"
#include "text.hpp"

namespace pfm {

int Psc::active_count() const {
  return static_cast<int>(std::count_if(slot.begin(), slot.end(),
                                        [](std::uint8_t s) { return s != 0; }));
}

std::size_t psc_id(const Psc& psc, const RegistrySizes& sizes) {
  std::size_t id = 0;
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    if (psc.slot[l] >= sizes[l]) {
      throw Error("PSC slot " + std::to_string(psc.slot[l]) + " out of range at " +
                  std::string(level_name(static_cast<Level>(l))));
    }
    id = id * sizes[l] + psc.slot[l];
  }
  return id;
}

Psc psc_from_id(std::size_t id, const RegistrySizes& sizes) {
  Psc psc;
  for (std::size_t l = kNumLevels; l-- > 0;) {
    psc.slot[l] = static_cast<std::uint8_t>(id % sizes[l]);
    id /= sizes[l];
  }
  if (id != 0) throw Error("PSC id out of range for registry");
  return psc;
}

PscCatalog PscCatalog::enumerate(const RegistrySizes& sizes) {
  PscCatalog catalog;
  catalog.sizes_ = sizes;
  std::size_t total = 1;
  for (std::size_t s : sizes) {
    if (s == 0) throw Error("registry size must be at least 1 at every level");
    if (s > 256) throw Error("registry size exceeds 256 options");
    total *= s;
  }
  catalog.list_.reserve(total);
  for (std::size_t id = 0; id < total; ++id) {
    catalog.list_.push_back(psc_from_id(id, sizes));
  }
  return catalog;
}

void IpcTable::validate() const {
  if (ipc.size() != traces.size()) throw Error("ipc table: row count mismatch");
  for (std::size_t r = 0; r < ipc.size(); ++r) {
    if (ipc[r].size() != psc_ids.size()) {
      throw Error("ipc table incomplete: trace '" + traces[r] + "' has " +
                  std::to_string(ipc[r].size()) + " of " +
                  std::to_string(psc_ids.size()) + " values");
    }
    for (double v : ipc[r]) {
      if (!std::isfinite(v)) {
        throw Error("ipc table incomplete: trace '" + traces[r] + "' has a missing value");
      }
    }
  }
}

void IpcTable::write_csv(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << "trace";
  for (auto id : psc_ids) out << ',' << id;
  out << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < traces.size(); ++r) {
    out << traces[r];
    for (double v : ipc[r]) out << ',' << v;
    out << '\n';
  }
  text::write_file(path, out.str());
}

IpcTable IpcTable::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  IpcTable table;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    if (header) {
      while (std::getline(ss, cell, ',')) table.psc_ids.push_back(std::stoull(cell));
      header = false;
      continue;
    }
    table.traces.push_back(cell);
    auto& row = table.ipc.emplace_back();
    while (std::getline(ss, cell, ',')) {
      row.push_back(cell.empty() ? std::nan("") : std::stod(cell));
    }
  }
  table.validate();
  return table;
}

std::vector<std::size_t> top_k_columns(const IpcTable& table, std::size_t row,
                                       std::size_t top_k) {
  std::vector<std::size_t> cols(table.psc_ids.size());
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  const auto& values = table.ipc.at(row);
  std::stable_sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return table.psc_ids[a] < table.psc_ids[b];
  });
  cols.resize(std::min(top_k, cols.size()));
  return cols;
}

std::vector<std::size_t> prune(const IpcTable& table, const RegistrySizes& sizes,
                               std::size_t top_k) {
  if (top_k == 0) throw Error("top_k must be at least 1");
  table.validate();
  const std::size_t n_traces = table.traces.size();
  const std::size_t n_cols = table.psc_ids.size();

  // membership[t][c]: column c is in trace t's top-k set.
  std::vector<std::vector<bool>> membership(n_traces, std::vector<bool>(n_cols, false));
  std::vector<std::size_t> score(n_cols, 0);
  for (std::size_t t = 0; t < n_traces; ++t) {
    for (std::size_t c : top_k_columns(table, t, top_k)) {
      membership[t][c] = true;
      ++score[c];
    }
  }

  std::vector<int> active(n_cols);
  for (std::size_t c = 0; c < n_cols; ++c) {
    active[c] = psc_from_id(table.psc_ids[c], sizes).active_count();
  }
  // Static rank: score, then fewer active prefetchers, then id.
  const auto ranks_before = [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    if (active[a] != active[b]) return active[a] < active[b];
    return table.psc_ids[a] < table.psc_ids[b];
  };

  // Each step takes the PSC covering the most still-uncovered traces; the
  // static rank breaks ties.
  std::vector<bool> covered(n_traces, false);
  std::vector<bool> taken(n_cols, false);
  std::size_t remaining = n_traces;
  std::vector<std::size_t> selection;
  while (remaining > 0) {
    std::size_t best = n_cols;
    std::size_t best_gain = 0;
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (taken[c]) continue;
      std::size_t gain = 0;
      for (std::size_t t = 0; t < n_traces; ++t) gain += !covered[t] && membership[t][c];
      if (gain == 0) continue;
      if (best == n_cols || gain > best_gain || (gain == best_gain && ranks_before(c, best))) {
        best = c;
        best_gain = gain;
      }
    }
    taken[best] = true;
    selection.push_back(table.psc_ids[best]);
    for (std::size_t t = 0; t < n_traces; ++t) {
      if (!covered[t] && membership[t][best]) {
        covered[t] = true;
        --remaining;
      }
    }
  }
  return selection;
}

}  // namespace pfm
