#include "pfm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "pfm/error.hpp"
#include "pfm/rng.hpp"
#include "text.hpp"

namespace pfm {

const std::vector<std::string_view>& event_names() {
  static const std::vector<std::string_view> names = {
      "l1i_pages_read_load", "l1d_pages_read_load", "l1d_rfo_access",
      "branch_return",       "not_branch",          "branch_conditional",
      "branch_other",        "loads",               "instructions",
      "l1i_accesses",        "l1i_misses",          "l1d_accesses",
      "l1d_misses",          "l2_accesses",         "l2_misses",
      "llc_accesses",        "llc_misses",          "prefetch_issued",
      "prefetch_useful",     "cycles"};
  return names;
}

std::vector<double> extract_events(const WindowStats& s) {
  const auto& e = s.events;
  const auto& L = s.levels;
  std::uint64_t issued = 0;
  std::uint64_t useful = 0;
  for (const auto& c : L) {
    issued += c.prefetch_issued;
    useful += c.prefetch_useful;
  }
  auto d = [](std::uint64_t v) { return static_cast<double>(v); };
  return {d(e.l1i_pages),
          d(e.l1d_pages),
          d(e.stores),
          d(e.branch_return),
          d(e.not_branch),
          d(e.branch_conditional),
          d(e.branch_other),
          d(e.loads),
          d(s.instructions),
          d(L[0].demand_accesses),
          d(L[0].demand_misses),
          d(L[1].demand_accesses),
          d(L[1].demand_misses),
          d(L[2].demand_accesses),
          d(L[2].demand_misses),
          d(L[3].demand_accesses),
          d(L[3].demand_misses),
          d(issued),
          d(useful),
          s.cycles};
}

FeatureVector extract_features(const WindowStats& s) {
  const auto& e = s.events;
  FeatureVector f;
  f.values = {saturate16(e.l1i_pages),     saturate16(e.l1d_pages),
              saturate16(e.stores),        saturate16(e.branch_return),
              saturate16(e.not_branch),    saturate16(e.branch_conditional)};
  return f;
}

std::vector<std::size_t> select_invariant_events(
    const std::vector<std::vector<double>>& event_by_psc, double tol) {
  std::vector<std::size_t> kept;
  for (std::size_t e = 0; e < event_by_psc.size(); ++e) {
    const auto& row = event_by_psc[e];
    if (row.empty()) throw Error("event matrix row " + std::to_string(e) + " is empty");
    for (double v : row) {
      if (!std::isfinite(v)) throw Error("event matrix has a non-finite entry");
    }
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / row.size();
    if (!(mean > 0.0)) continue;
    double dev = 0.0;
    for (double v : row) dev = std::max(dev, std::abs(v - mean) / mean);
    if (dev == 0.0 || dev < tol) kept.push_back(e);
  }
  return kept;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw Error("pearson: length mismatch");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nan("");
  return sab / std::sqrt(saa * sbb);
}

CorrelationFilter drop_correlated(const std::vector<std::vector<double>>& rows,
                                  std::span<const std::size_t> event_ids,
                                  double corr_threshold) {
  std::vector<std::vector<double>> cols;
  for (std::size_t id : event_ids) {
    std::vector<double> col;
    col.reserve(rows.size());
    for (const auto& r : rows) {
      if (id >= r.size()) throw Error("drop_correlated: event id out of range");
      col.push_back(r[id]);
    }
    cols.push_back(std::move(col));
  }

  CorrelationFilter out;
  std::vector<std::size_t> kept_cols;  // positions into cols with nonzero variance
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const auto& c = cols[i];
    const bool constant =
        c.empty() || std::all_of(c.begin(), c.end(), [&](double v) { return v == c.front(); });
    if (constant) {
      out.kept.push_back(event_ids[i]);
      out.zero_variance.push_back(event_ids[i]);
      continue;
    }
    bool redundant = false;
    for (std::size_t k : kept_cols) {
      if (std::abs(pearson(c, cols[k])) > corr_threshold) {
        redundant = true;
        break;
      }
    }
    if (!redundant) {
      kept_cols.push_back(i);
      out.kept.push_back(event_ids[i]);
    }
  }
  return out;
}

std::vector<Sample> samples_from(const std::vector<OracleRun>& runs, LabelAlignment alignment) {
  std::vector<Sample> out;
  for (const auto& run : runs) {
    if (run.features.size() != run.ipc.size()) {
      throw Error("oracle run " + run.trace_id + ": feature and label counts differ");
    }
    const std::size_t shift = alignment == LabelAlignment::next_window ? 1 : 0;
    for (std::size_t w = 0; w + shift < run.features.size(); ++w) {
      if (run.ipc[w + shift].size() != run.psc_ids.size()) {
        throw Error("oracle run " + run.trace_id + ": incomplete IPC row");
      }
      out.push_back({run.features[w], run.ipc[w + shift], run.trace_id, run.benchmark, w});
    }
  }
  return out;
}

std::string_view approach_name(Approach a) {
  switch (a) {
    case Approach::a1_random_windows: return "A1";
    case Approach::a2_leave_traces_out: return "A2";
    case Approach::a3_leave_benchmarks_out: return "A3";
  }
  return "?";
}

Approach parse_approach(std::string_view text) {
  if (text == "A1" || text == "a1") return Approach::a1_random_windows;
  if (text == "A2" || text == "a2") return Approach::a2_leave_traces_out;
  if (text == "A3" || text == "a3") return Approach::a3_leave_benchmarks_out;
  throw Error("unknown dataset approach '" + std::string(text) + "'");
}

namespace {

std::size_t rounded(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

Dataset split_by_group(const std::vector<Sample>& samples, const DatasetSpec& spec,
                       bool by_benchmark) {
  auto key = [&](const Sample& s) -> const std::string& {
    return by_benchmark ? s.benchmark : s.trace_id;
  };
  std::vector<std::string> groups;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto [it, inserted] = members.try_emplace(key(samples[i]));
    if (inserted) groups.push_back(key(samples[i]));
    it->second.push_back(i);
  }
  const std::size_t n_hold = rounded(spec.holdout_fraction, groups.size());
  if (groups.size() < 2 || n_hold == 0 || n_hold >= groups.size()) {
    throw Error(std::string("too few ") + (by_benchmark ? "benchmarks" : "traces") +
                " for a holdout split (" + std::to_string(groups.size()) + ")");
  }

  Rng rng(derive_seed(spec.seed, by_benchmark ? 3 : 2));
  std::vector<std::string> order = groups;
  rng.shuffle(std::span(order));
  Dataset ds;
  ds.held_out.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::sort(ds.held_out.begin(), ds.held_out.end());

  std::vector<bool> in_train(samples.size(), false);
  for (std::size_t g = n_hold; g < order.size(); ++g) {
    auto idx = members.at(order[g]);
    rng.shuffle(std::span(idx));
    const std::size_t take = std::min(idx.size(), rounded(spec.window_train_fraction, idx.size()));
    for (std::size_t k = 0; k < take; ++k) in_train[idx[k]] = true;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (in_train[i] ? ds.train : ds.test).push_back(samples[i]);
  }
  return ds;
}

}  // namespace

Dataset build_dataset(const std::vector<Sample>& samples, const DatasetSpec& spec) {
  if (samples.empty()) throw Error("build_dataset: no samples");
  if (spec.approach != Approach::a1_random_windows) {
    return split_by_group(samples, spec, spec.approach == Approach::a3_leave_benchmarks_out);
  }
  const std::size_t n_train = rounded(spec.a1_train_fraction, samples.size());
  if (n_train == 0) throw Error("build_dataset: training fraction selects no windows");
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(spec.seed, 1));
  rng.shuffle(std::span(idx));
  std::vector<bool> in_train(samples.size(), false);
  for (std::size_t k = 0; k < n_train; ++k) in_train[idx[k]] = true;
  Dataset ds;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (in_train[i] ? ds.train : ds.test).push_back(samples[i]);
  }
  return ds;
}

void write_dataset_csv(const std::filesystem::path& path, const std::vector<Sample>& samples,
                       const std::vector<std::size_t>& psc_ids) {
  std::ostringstream out;
  out << "trace_id,benchmark,window_index";
  for (auto name : kFeatureNames) out << ',' << name;
  for (auto id : psc_ids) out << ",ipc_" << id;
  out << '\n';
  for (const auto& s : samples) {
    if (s.labels.size() != psc_ids.size()) throw Error("sample label count mismatch");
    out << s.trace_id << ',' << s.benchmark << ',' << s.window_index;
    for (auto v : s.features.values) out << ',' << v;
    for (double v : s.labels) out << ',' << text::format_double(v);
    out << '\n';
  }
  text::write_file(path, out.str());
}

std::vector<Sample> read_dataset_csv(const std::filesystem::path& path,
                                     std::vector<std::size_t>* psc_ids) {
  const auto rows = text::lines(text::read_file(path));
  if (rows.empty()) throw ParseError(0, "missing header");
  const auto header = text::split(rows[0]);
  const std::size_t fixed = 3 + kNumFeatures;
  if (header.size() < fixed) throw ParseError(0, "header too short");
  std::vector<std::size_t> ids;
  for (std::size_t c = fixed; c < header.size(); ++c) {
    if (header[c].rfind("ipc_", 0) != 0) throw ParseError(0, "bad label column " + header[c]);
    ids.push_back(text::to_u64(std::string_view(header[c]).substr(4), 0));
  }
  std::vector<Sample> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    const auto cells = text::split(rows[r]);
    if (cells.size() != header.size()) throw ParseError(r, "wrong field count");
    Sample s;
    s.trace_id = cells[0];
    s.benchmark = cells[1];
    s.window_index = text::to_u64(cells[2], r);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      const auto v = text::to_u64(cells[3 + f], r);
      if (v > 0xFFFF) throw ParseError(r, "feature exceeds 16 bits");
      s.features.values[f] = static_cast<std::uint16_t>(v);
    }
    for (std::size_t c = fixed; c < cells.size(); ++c) {
      s.labels.push_back(text::to_double(cells[c], r));
    }
    out.push_back(std::move(s));
  }
  if (psc_ids) *psc_ids = std::move(ids);
  return out;
}

}  // namespace pfm
