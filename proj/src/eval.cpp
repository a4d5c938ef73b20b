#include "pfm/eval.hpp"

#include <cmath>
#include <sstream>

#include "pfm/error.hpp"
#include "text.hpp"

namespace pfm {

double SweepResult::cycles(std::size_t window, std::size_t psc) const {
  return static_cast<double>(instructions[window]) / ipc[window][psc];
}

double SweepResult::branched_ipc(std::size_t psc) const {
  double instr = 0.0;
  double cyc = 0.0;
  for (std::size_t w = 0; w < windows(); ++w) {
    instr += static_cast<double>(instructions[w]);
    cyc += cycles(w, psc);
  }
  return instr / cyc;
}

double SweepResult::oracle_ipc() const {
  double instr = 0.0;
  double cyc = 0.0;
  for (std::size_t w = 0; w < windows(); ++w) {
    instr += static_cast<double>(instructions[w]);
    double best = cycles(w, 0);
    for (std::size_t p = 1; p < psc_ids.size(); ++p) best = std::min(best, cycles(w, p));
    cyc += best;
  }
  return instr / cyc;
}

OracleRun SweepResult::as_oracle_run(const std::string& trace_id,
                                     const std::string& benchmark) const {
  return {trace_id, benchmark, psc_ids, features, ipc};
}

SweepResult SweepResult::select(std::span<const std::size_t> columns) const {
  SweepResult out;
  out.instructions = instructions;
  out.features = features;
  for (auto c : columns) {
    if (c >= psc_ids.size()) throw Error("sweep column out of range");
    out.psc_ids.push_back(psc_ids[c]);
  }
  for (const auto& row : ipc) {
    std::vector<double> r;
    for (auto c : columns) r.push_back(row[c]);
    out.ipc.push_back(std::move(r));
  }
  return out;
}

SweepResult oracle_sweep(std::span<const TraceRecord> trace, const HierarchyConfig& config,
                         const PrefetcherRegistry& registry, const std::vector<Psc>& pscs,
                         std::size_t window_size, const SweepOptions& options) {
  if (pscs.empty()) throw Error("oracle_sweep: empty PSC set");
  if (options.carrier >= pscs.size()) throw Error("oracle_sweep: carrier index out of range");
  if (trace.empty()) throw Error("oracle_sweep: empty trace");
  const auto sizes = registry.sizes();
  SweepResult out;
  for (const auto& p : pscs) out.psc_ids.push_back(psc_id(p, sizes));
  const std::size_t n_events = event_names().size();
  if (options.collect_events) out.event_means.assign(n_events, std::vector<double>(pscs.size(), 0.0));

  Simulator committed(config, registry);
  const auto windows = slice_windows(trace.size(), window_size);
  for (const auto& win : windows) {
    const auto slice = trace.subspan(win.begin, win.size());
    std::vector<double> row(pscs.size(), 0.0);
    std::vector<FeatureVector> seen(pscs.size());
    // Non-carrier PSCs branch from a copy; the carrier runs last on the original.
    for (std::size_t p = 0; p < pscs.size(); ++p) {
      if (p == options.carrier) continue;
      Simulator branch = committed;
      const auto stats = branch.run_window(slice, pscs[p]);
      row[p] = stats.ipc;
      seen[p] = stats.hpc;
      if (options.collect_events) {
        const auto ev = extract_events(stats);
        for (std::size_t e = 0; e < n_events; ++e) out.event_means[e][p] += ev[e];
      }
    }
    const auto stats = committed.run_window(slice, pscs[options.carrier]);
    row[options.carrier] = stats.ipc;
    seen[options.carrier] = stats.hpc;
    if (options.collect_events) {
      const auto ev = extract_events(stats);
      for (std::size_t e = 0; e < n_events; ++e) out.event_means[e][options.carrier] += ev[e];
    }
    out.instructions.push_back(stats.instructions);
    out.features.push_back(stats.hpc);
    out.ipc.push_back(std::move(row));
    if (options.debug) out.per_psc.push_back(std::move(seen));
  }
  if (options.collect_events) {
    for (auto& r : out.event_means) {
      for (auto& v : r) v /= static_cast<double>(windows.size());
    }
  }
  return out;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& s) {
  std::ostringstream out;
  out << "window,instructions";
  for (auto n : kFeatureNames) out << ',' << n;
  for (auto id : s.psc_ids) out << ",ipc_" << id;
  out << '\n';
  for (std::size_t w = 0; w < s.windows(); ++w) {
    out << w << ',' << s.instructions[w];
    for (auto v : s.features[w].values) out << ',' << v;
    for (double v : s.ipc[w]) out << ',' << text::format_double(v);
    out << '\n';
  }
  text::write_file(path, out.str());
}

SweepResult read_sweep_csv(const std::filesystem::path& path) {
  const auto rows = text::lines(text::read_file(path));
  if (rows.empty()) throw ParseError(0, "missing header");
  const auto header = text::split(rows[0]);
  const std::size_t fixed = 2 + kNumFeatures;
  if (header.size() <= fixed) throw ParseError(0, "sweep header has no PSC columns");
  SweepResult s;
  for (std::size_t c = fixed; c < header.size(); ++c) {
    if (header[c].rfind("ipc_", 0) != 0) throw ParseError(0, "bad column " + header[c]);
    s.psc_ids.push_back(text::to_u64(std::string_view(header[c]).substr(4), 0));
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    const auto c = text::split(rows[r]);
    if (c.size() != header.size()) throw ParseError(r, "wrong field count");
    s.instructions.push_back(text::to_u64(c[1], r));
    FeatureVector f;
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
      const auto v = text::to_u64(c[2 + k], r);
      if (v > 0xFFFF) throw ParseError(r, "feature exceeds 16 bits");
      f.values[k] = static_cast<std::uint16_t>(v);
    }
    s.features.push_back(f);
    std::vector<double> ipc;
    for (std::size_t k = fixed; k < c.size(); ++k) {
      const double v = text::to_double(c[k], r);
      if (!(v > 0.0)) throw ParseError(r, "IPC must be positive");
      ipc.push_back(v);
    }
    s.ipc.push_back(std::move(ipc));
  }
  return s;
}

RunTotals run_static(std::span<const TraceRecord> trace, const HierarchyConfig& config,
                     const PrefetcherRegistry& registry, const Psc& psc, std::size_t window_size) {
  StaticManager m(0);
  return run_managed(trace, config, registry, {psc}, m, window_size).totals;
}

namespace {

double ratio(double num, double den) { return den == 0.0 ? kUndefined : num / den; }

}  // namespace

MetricsRow compute_metrics(const std::string& trace_id, const std::string& manager,
                           const RunTotals& run, const RunTotals& baseline,
                           const RunTotals& no_prefetch, double outlier_threshold) {
  if (!(baseline.ipc > 0.0)) throw Error("compute_metrics: baseline IPC is zero for " + trace_id);
  MetricsRow row;
  row.trace_id = trace_id;
  row.manager = manager;
  row.ipc = run.ipc;
  row.normalized = run.ipc / baseline.ipc;
  row.outlier = row.normalized < outlier_threshold;
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    const auto& m = run.levels[l];
    const auto nopf = static_cast<double>(no_prefetch.levels[l].demand_misses);
    const double removed = nopf - static_cast<double>(m.demand_misses);
    row.scope[l] = ratio(removed, nopf);
    row.accuracy[l] = ratio(static_cast<double>(m.prefetch_useful),
                            static_cast<double>(m.prefetch_issued));
    row.accuracy_variant[l] = ratio(removed, static_cast<double>(m.misses_caused_by_prefetch));
  }
  return row;
}

std::vector<MetricsSummary> summarize(const std::vector<MetricsRow>& rows) {
  std::vector<MetricsSummary> out;
  auto find = [&](const std::string& name) -> MetricsSummary& {
    for (auto& s : out) {
      if (s.manager == name) return s;
    }
    out.push_back({});
    out.back().manager = name;
    return out.back();
  };
  for (const auto& r : rows) find(r.manager);
  for (auto& s : out) {
    double log_sum = 0.0;
    double sum = 0.0;
    double worst = 0.0;
    std::array<double, kNumLevels> scope_sum{};
    std::array<double, kNumLevels> acc_sum{};
    std::array<std::size_t, kNumLevels> scope_n{};
    std::array<std::size_t, kNumLevels> acc_n{};
    for (const auto& r : rows) {
      if (r.manager != s.manager) continue;
      worst = s.traces == 0 ? r.normalized : std::min(worst, r.normalized);
      ++s.traces;
      log_sum += std::log(r.normalized);
      sum += r.normalized;
      if (r.outlier) ++s.outliers;
      for (std::size_t l = 0; l < kNumLevels; ++l) {
        if (!std::isnan(r.scope[l])) scope_sum[l] += r.scope[l], ++scope_n[l];
        if (!std::isnan(r.accuracy[l])) acc_sum[l] += r.accuracy[l], ++acc_n[l];
      }
    }
    const auto n = static_cast<double>(s.traces);
    s.geomean_normalized = std::exp(log_sum / n);
    s.mean_normalized = sum / n;
    s.worst_normalized = worst;
    for (std::size_t l = 0; l < kNumLevels; ++l) {
      s.mean_scope[l] = scope_n[l] ? scope_sum[l] / static_cast<double>(scope_n[l]) : kUndefined;
      s.mean_accuracy[l] = acc_n[l] ? acc_sum[l] / static_cast<double>(acc_n[l]) : kUndefined;
    }
  }
  return out;
}

namespace {

std::string cell(double v) { return std::isnan(v) ? "" : text::format_double(v); }

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "trace,manager,ipc,normalized_ipc,outlier";
  for (const char* col : {"scope", "accuracy", "accuracy_variant"}) {
    for (auto l : kAllLevels) out << ',' << col << '_' << level_name(l);
  }
  out << '\n';
  for (const auto& r : rows) {
    out << r.trace_id << ',' << r.manager << ',' << cell(r.ipc) << ',' << cell(r.normalized)
        << ',' << (r.outlier ? 1 : 0);
    for (const auto* arr : {&r.scope, &r.accuracy, &r.accuracy_variant}) {
      for (double v : *arr) out << ',' << cell(v);
    }
    out << '\n';
  }
  text::write_file(path, out.str());
}

void write_summary_csv(const std::filesystem::path& path,
                       const std::vector<MetricsSummary>& summary) {
  std::ostringstream out;
  out << "manager,traces,geomean_normalized_ipc,mean_normalized_ipc,worst_normalized_ipc,outliers";
  for (const char* col : {"mean_scope", "mean_accuracy"}) {
    for (auto l : kAllLevels) out << ',' << col << '_' << level_name(l);
  }
  out << '\n';
  for (const auto& s : summary) {
    out << s.manager << ',' << s.traces << ',' << cell(s.geomean_normalized) << ','
        << cell(s.mean_normalized) << ',' << cell(s.worst_normalized) << ',' << s.outliers;
    for (const auto* arr : {&s.mean_scope, &s.mean_accuracy}) {
      for (double v : *arr) out << ',' << cell(v);
    }
    out << '\n';
  }
  text::write_file(path, out.str());
}

}  // namespace pfm
