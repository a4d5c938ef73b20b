#include "pfm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "text.hpp"

namespace pfm {
namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Runs fn(i) for every i in [0, n) on separate threads; results keep index
// order and the first failure (by index) is rethrown.
template <class Fn>
auto parallel_map(std::size_t n, Fn fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<std::future<R>> futures;
  futures.reserve(n);
  for (std::size_t i = 0; i < n; ++i) futures.push_back(std::async(std::launch::async, fn, i));
  std::vector<R> out;
  out.reserve(n);
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

std::vector<std::size_t> ids_of(const std::vector<Psc>& pscs, const PrefetcherRegistry& registry) {
  std::vector<std::size_t> ids;
  for (const auto& p : pscs) ids.push_back(psc_id(p, registry.sizes()));
  return ids;
}

// Column positions of `wanted` within `have`.
std::vector<std::size_t> columns_for(const std::vector<std::size_t>& have,
                                     const std::vector<std::size_t>& wanted) {
  std::vector<std::size_t> cols;
  for (auto id : wanted) {
    const auto it = std::find(have.begin(), have.end(), id);
    if (it == have.end()) throw Error("PSC " + std::to_string(id) + " missing from the sweep");
    cols.push_back(static_cast<std::size_t>(it - have.begin()));
  }
  return cols;
}

bool is_static_name(const std::string& name) { return name.rfind("static-", 0) == 0; }

}  // namespace

void apply_overrides(ExperimentConfig& config, const Overrides& o) {
  if (o.seed) {
    config.seed = *o.seed;
    config.dataset.seed = *o.seed;
    config.train.seed = *o.seed;
  }
  if (o.window_size) config.window_size = *o.window_size;
  if (o.managers) config.managers = *o.managers;
  if (o.trial) std::tie(config.trial_windows, config.exploit_windows) = *o.trial;
}

Trace load_trace(const TraceSource& source) {
  if (source.file) return read_trace_file(*source.file);
  return generate_synthetic(source.workload);
}

std::vector<Psc> sweep_set(const ExperimentConfig& config) {
  if (!config.prune_top_k) return config.deployment;
  if (!config.candidates.empty()) return config.candidates;
  return PscCatalog::enumerate(config.registry.sizes()).list();
}

void stage_sweep(const ExperimentConfig& config, const Workspace& ws) {
  const auto pscs = sweep_set(config);
  if (pscs.empty()) throw Error("empty PSC set");
  if (config.carrier >= pscs.size()) throw Error("carrier index outside the swept PSC set");
  SweepOptions options;
  options.carrier = config.carrier;
  const auto results = parallel_map(config.traces.size(), [&](std::size_t t) {
    const auto trace = load_trace(config.traces[t]);
    auto sweep = oracle_sweep(trace, config.hierarchy, config.registry, pscs, config.window_size,
                              options);
    write_sweep_csv(ws.sweep(config.traces[t].id), sweep);
    std::vector<double> row;
    for (std::size_t p = 0; p < pscs.size(); ++p) row.push_back(sweep.branched_ipc(p));
    return row;
  });
  IpcTable table;
  table.psc_ids = ids_of(pscs, config.registry);
  for (std::size_t t = 0; t < config.traces.size(); ++t) {
    table.traces.push_back(config.traces[t].id);
    table.ipc.push_back(results[t]);
  }
  table.validate();
  table.write_csv(ws.ipc_table());
}

void stage_prune(const ExperimentConfig& config, const Workspace& ws) {
  std::vector<Psc> deployment = config.deployment;
  if (config.prune_top_k) {
    const auto table = IpcTable::read_csv(ws.ipc_table());
    const auto sizes = config.registry.sizes();
    deployment.clear();
    for (auto id : prune(table, sizes, *config.prune_top_k)) deployment.push_back(psc_from_id(id, sizes));
    if (config.first_psc >= deployment.size()) {
      throw Error("first_psc outside the pruned deployment set");
    }
  }
  write_deployment(ws.deployment(), deployment, config.registry);
}

void stage_dataset(const ExperimentConfig& config, const Workspace& ws) {
  const auto deployment = read_deployment(ws.deployment(), config.registry);
  const auto ids = ids_of(deployment, config.registry);
  std::vector<OracleRun> runs;
  for (const auto& source : config.traces) {
    const auto sweep = read_sweep_csv(ws.sweep(source.id));
    const auto narrowed = sweep.select(columns_for(sweep.psc_ids, ids));
    runs.push_back(narrowed.as_oracle_run(source.id, source.benchmark));
  }
  const auto samples = samples_from(runs, config.label_alignment);
  const auto data = build_dataset(samples, config.dataset);
  if (data.train.empty()) throw Error("training split is empty");
  write_dataset_csv(ws.train_set(), data.train, ids);
  write_dataset_csv(ws.test_set(), data.test, ids);
  std::string held;
  for (const auto& h : data.held_out) held += h + '\n';
  text::write_file(ws.held_out(), held);
}

void stage_train(const ExperimentConfig& config, const Workspace& ws) {
  std::vector<std::size_t> ids;
  const auto train = read_dataset_csv(ws.train_set(), &ids);
  const auto deployment = read_deployment(ws.deployment(), config.registry);
  if (ids != ids_of(deployment, config.registry)) {
    throw Error("training set columns do not match the deployment set");
  }
  const auto suite = fit_suite(train, ids, config.train);
  text::write_file(ws.suite(), suite.to_json());
  const auto variants = fit_classifier_variants(train, ids, config.train, config.label_threshold);
  text::write_file(ws.variants(), variants.to_json());
}

void stage_quantize(const ExperimentConfig& config, const Workspace& ws) {
  const auto suite = SuiteModel::from_json(text::read_file(ws.suite()));
  const auto model = quantize(suite, config.quant);
  text::write_file(ws.image(), serialize_image(model.image));
  text::write_file(ws.size_report(), format_size_report(size_report(model.image)));
}

namespace {

std::unique_ptr<Manager> make_manager(const std::string& name, const ExperimentConfig& config,
                                      const Workspace& ws, std::size_t n) {
  if (name == "puppeteer") {
    return std::make_unique<PuppeteerManager>(SuiteModel::from_json(text::read_file(ws.suite())), n,
                                              config.first_psc);
  }
  if (name == "puppeteer-nodemem") {
    return std::make_unique<PuppeteerManager>(deserialize_image(text::read_file(ws.image())), n,
                                              config.first_psc);
  }
  if (name == "trial") {
    return std::make_unique<TrialManager>(n, config.trial_windows, config.exploit_windows);
  }
  auto variants = ClassifierVariants::from_json(text::read_file(ws.variants()));
  if (name == "bt-classifier") {
    return std::make_unique<BtClassifierManager>(std::move(variants.single_classifier), n,
                                                 config.first_psc);
  }
  if (name == "single-regressor") {
    return std::make_unique<SingleRegressorManager>(std::move(variants.single_regressor), n,
                                                    config.first_psc);
  }
  if (name == "suite-classifiers") {
    return std::make_unique<SuiteClassifiersManager>(std::move(variants.suite_of_classifiers), n,
                                                     config.first_psc);
  }
  throw Error("unknown manager '" + name + "'");
}

}  // namespace

void stage_run(const ExperimentConfig& config, const Workspace& ws) {
  const auto deployment = read_deployment(ws.deployment(), config.registry);
  const std::size_t n = deployment.size();
  const auto per_trace = parallel_map(config.traces.size(), [&](std::size_t t) {
    const auto& id = config.traces[t].id;
    const auto trace = load_trace(config.traces[t]);
    std::vector<TotalsRow> rows;
    // Every static deployment PSC always runs: they bound the managers.
    for (std::size_t i = 0; i < n; ++i) {
      StaticManager m(i);
      auto run = run_managed(trace, config.hierarchy, config.registry, deployment, m,
                             config.window_size);
      write_decision_log(ws.decisions(id, run.manager), run.log);
      rows.push_back({id, run.manager, run.totals});
    }
    for (const auto& name : config.managers) {
      if (name == "static") continue;
      auto m = make_manager(name, config, ws, n);
      auto run = run_managed(trace, config.hierarchy, config.registry, deployment, *m,
                             config.window_size);
      write_decision_log(ws.decisions(id, run.manager), run.log);
      rows.push_back({id, run.manager, run.totals});
    }
    rows.push_back({id, "baseline",
                    run_static(trace, config.hierarchy, config.registry, config.baseline,
                               config.window_size)});
    rows.push_back({id, "no-prefetch",
                    run_static(trace, config.hierarchy, config.registry, Psc{}, config.window_size)});
    return rows;
  });
  std::vector<TotalsRow> all;
  for (const auto& rows : per_trace) all.insert(all.end(), rows.begin(), rows.end());
  write_totals_csv(ws.totals(), all);
}

namespace {

const TotalsRow& reference_run(const std::vector<TotalsRow>& totals, const std::string& trace,
                               std::string_view name) {
  for (const auto& r : totals) {
    if (r.trace_id == trace && r.manager == name) return r;
  }
  throw Error("totals lack the " + std::string(name) + " run for trace " + trace);
}

bool is_reference(const TotalsRow& r) { return r.manager == "baseline" || r.manager == "no-prefetch"; }

std::vector<MetricsRow> collect_metrics(const ExperimentConfig& config,
                                        const std::vector<TotalsRow>& totals) {
  std::vector<MetricsRow> metrics;
  for (const auto& source : config.traces) {
    const auto& baseline = reference_run(totals, source.id, "baseline");
    const auto& nopf = reference_run(totals, source.id, "no-prefetch");
    for (const auto& r : totals) {
      if (r.trace_id != source.id || is_reference(r)) continue;
      metrics.push_back(compute_metrics(source.id, r.manager, r.totals, baseline.totals,
                                        nopf.totals, config.outlier_threshold));
    }
  }
  return metrics;
}

}  // namespace

void stage_report(const ExperimentConfig& config, const Workspace& ws) {
  const auto totals = read_totals_csv(ws.totals());
  const auto deployment = read_deployment(ws.deployment(), config.registry);
  const auto ids = ids_of(deployment, config.registry);
  const auto metrics = collect_metrics(config, totals);
  std::ostringstream bounds;
  bounds << "trace,manager,ipc,min_static,max_static,oracle,above_static_floor,below_oracle\n";
  for (const auto& source : config.traces) {
    double lo = INFINITY;
    double hi = -INFINITY;
    for (const auto& r : totals) {
      if (r.trace_id == source.id && is_static_name(r.manager)) {
        lo = std::min(lo, r.totals.ipc);
        hi = std::max(hi, r.totals.ipc);
      }
    }
    const auto sweep = read_sweep_csv(ws.sweep(source.id));
    const double oracle = sweep.select(columns_for(sweep.psc_ids, ids)).oracle_ipc();
    for (const auto& r : totals) {
      if (r.trace_id != source.id || is_reference(r)) continue;
      bounds << source.id << ',' << r.manager << ',' << text::format_double(r.totals.ipc) << ','
             << text::format_double(lo) << ',' << text::format_double(hi) << ','
             << text::format_double(oracle) << ',' << (r.totals.ipc >= lo ? 1 : 0) << ','
             << (r.totals.ipc <= oracle ? 1 : 0) << '\n';
    }
  }
  write_metrics_csv(ws.metrics(), metrics);
  write_summary_csv(ws.summary(), summarize(metrics));
  text::write_file(ws.bounds(), bounds.str());
}

void run_stage(std::string_view stage, const ExperimentConfig& config, const Workspace& ws) {
  const std::string name(stage);
  try {
    if (stage == "sweep") stage_sweep(config, ws);
    else if (stage == "prune") stage_prune(config, ws);
    else if (stage == "dataset") stage_dataset(config, ws);
    else if (stage == "train") stage_train(config, ws);
    else if (stage == "quantize") stage_quantize(config, ws);
    else if (stage == "run") stage_run(config, ws);
    else if (stage == "report") stage_report(config, ws);
    else throw Error("unknown stage");
    write_manifest(config, ws);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void run_pipeline(const ExperimentConfig& config, const Workspace& ws) {
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
  for (auto stage : kStages) run_stage(stage, config, ws);
}

void write_deployment(const fs::path& path, const std::vector<Psc>& deployment,
                      const PrefetcherRegistry& registry) {
  std::string out;
  for (const auto& p : deployment) {
    out += std::to_string(psc_id(p, registry.sizes())) + ',' + psc_label(p, registry) + '\n';
  }
  text::write_file(path, out);
}

std::vector<Psc> read_deployment(const fs::path& path, const PrefetcherRegistry& registry) {
  std::vector<Psc> out;
  const auto rows = text::lines(text::read_file(path));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto comma = rows[i].find(',');
    const auto id = text::to_u64(rows[i].substr(0, comma), i);
    const auto psc = psc_from_id(id, registry.sizes());
    if (comma != std::string::npos &&
        parse_psc_label(text::trim(std::string_view(rows[i]).substr(comma + 1)), registry) != psc) {
      throw ParseError(i, "PSC id and label disagree");
    }
    out.push_back(psc);
  }
  if (out.empty()) throw Error("empty deployment file " + path.string());
  return out;
}

namespace {

constexpr std::string_view kCounterNames[] = {"demand_accesses", "demand_misses",
                                              "prefetch_issued", "prefetch_useful",
                                              "prefetch_unused_evicted", "misses_caused_by_prefetch"};

std::array<std::uint64_t*, 6> counter_fields(LevelCounters& c) {
  return {&c.demand_accesses, &c.demand_misses, &c.prefetch_issued,
          &c.prefetch_useful, &c.prefetch_unused_evicted, &c.misses_caused_by_prefetch};
}

}  // namespace

void write_totals_csv(const fs::path& path, const std::vector<TotalsRow>& rows) {
  std::ostringstream out;
  out << "trace,manager,instructions,cycles,ipc";
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    for (auto c : kCounterNames) out << ',' << level_name(static_cast<Level>(l)) << '_' << c;
  }
  out << ",usage\n";
  for (const auto& r : rows) {
    out << r.trace_id << ',' << r.manager << ',' << r.totals.instructions << ','
        << text::format_double(r.totals.cycles) << ',' << text::format_double(r.totals.ipc);
    for (auto level : r.totals.levels) {
      for (auto* v : counter_fields(level)) out << ',' << *v;
    }
    out << ',';
    for (std::size_t i = 0; i < r.totals.usage.size(); ++i) {
      out << (i ? ";" : "") << text::format_double(r.totals.usage[i]);
    }
    out << '\n';
  }
  text::write_file(path, out.str());
}

std::vector<TotalsRow> read_totals_csv(const fs::path& path) {
  const auto rows = text::lines(text::read_file(path));
  if (rows.empty()) throw Error("empty totals file " + path.string());
  const std::size_t expected = 5 + kNumLevels * std::size(kCounterNames) + 1;
  std::vector<TotalsRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = text::split(rows[i]);
    if (f.size() != expected) throw ParseError(i, "expected " + std::to_string(expected) + " fields");
    TotalsRow r{f[0], f[1], {}};
    r.totals.instructions = text::to_u64(f[2], i);
    r.totals.cycles = text::to_double(f[3], i);
    r.totals.ipc = text::to_double(f[4], i);
    std::size_t k = 5;
    for (auto& level : r.totals.levels) {
      for (auto* v : counter_fields(level)) *v = text::to_u64(f[k++], i);
    }
    if (!f[k].empty()) {
      for (const auto& u : text::split(f[k], ';')) r.totals.usage.push_back(text::to_double(u, i));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string file_hash(const fs::path& path) { return hex64(fnv1a64(text::read_file(path))); }

std::string Manifest::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "pfm-manifest";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["window_size"] = window_size;
  j["managers"] = managers;
  j["trial"] = {trial_windows, exploit_windows};
  j["config"] = config_text;
  j["outputs"] = outputs;
  return j.dump(1) + "\n";
}

Manifest Manifest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "pfm-manifest" || j.at("version") != 1) {
      throw Error("not a version 1 manifest");
    }
    Manifest m;
    m.config_text = j.at("config").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.window_size = j.at("window_size").get<std::size_t>();
    m.managers = j.at("managers").get<std::vector<std::string>>();
    const auto trial = j.at("trial").get<std::vector<std::size_t>>();
    if (trial.size() != 2) throw Error("manifest trial entry needs two values");
    m.trial_windows = trial[0];
    m.exploit_windows = trial[1];
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    if (hex64(fnv1a64(m.config_text)) != m.config_hash) throw Error("manifest config hash mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed manifest: ") + e.what());
  }
}

Manifest make_manifest(const ExperimentConfig& config, const Workspace& ws) {
  Manifest m;
  m.config_text = config.text;
  m.config_hash = config.hash();
  m.seed = config.seed;
  m.window_size = config.window_size;
  m.managers = config.managers;
  m.trial_windows = config.trial_windows;
  m.exploit_windows = config.exploit_windows;
  if (fs::exists(ws.root)) {
    for (const auto& entry : fs::recursive_directory_iterator(ws.root)) {
      if (!entry.is_regular_file()) continue;
      const auto rel = fs::relative(entry.path(), ws.root).generic_string();
      // Nested sensitivity runs carry their own manifests.
      if (rel == "manifest.json" || rel.ends_with("/manifest.json") || rel.ends_with(".tmp")) continue;
      m.outputs[rel] = file_hash(entry.path());
    }
  }
  return m;
}

void write_manifest(const ExperimentConfig& config, const Workspace& ws) {
  text::write_file(ws.manifest(), make_manifest(config, ws).to_json());
}

ExperimentConfig config_from_manifest(const fs::path& manifest_path) {
  const auto m = Manifest::from_json(text::read_file(manifest_path));
  auto config = parse_config(m.config_text);
  apply_overrides(config, {m.seed, m.window_size, m.managers,
                           std::pair{m.trial_windows, m.exploit_windows}});
  config.validate();
  return config;
}

std::size_t nodes_per_tree_for_budget(std::size_t total_nodes, std::size_t num_pscs,
                                      std::size_t trees_per_forest) {
  if (num_pscs == 0 || trees_per_forest == 0) throw Error("node budget needs PSCs and trees");
  return std::max<std::size_t>(1, total_nodes / (num_pscs * trees_per_forest));
}

namespace {

std::size_t image_entries(const Workspace& ws) {
  return deserialize_image(text::read_file(ws.image())).entries.size();
}

std::vector<MetricsSummary> summaries_of(const ExperimentConfig& config, const Workspace& ws) {
  return summarize(collect_metrics(config, read_totals_csv(ws.totals())));
}

}  // namespace

std::vector<SensitivityRow> cache_size_sweep(const ExperimentConfig& config, const Workspace& ws,
                                             const std::vector<std::uint64_t>& llc_bytes) {
  std::vector<SensitivityRow> out;
  for (auto bytes : llc_bytes) {
    auto variant = config;
    variant.hierarchy.levels[index_of(Level::llc)].size_bytes = bytes;
    const Workspace sub{ws.root / ("llc_" + std::to_string(bytes))};
    run_pipeline(variant, sub);
    const auto entries = image_entries(sub);
    for (const auto& s : summaries_of(variant, sub)) out.push_back({"llc_bytes", bytes, entries, s});
  }
  return out;
}

std::vector<SensitivityRow> model_size_sweep(const ExperimentConfig& config, const Workspace& ws,
                                             const std::vector<std::size_t>& node_budgets) {
  for (auto stage : {"sweep", "prune", "dataset"}) {
    if (stage == std::string_view("sweep") && fs::exists(ws.ipc_table())) continue;
    run_stage(stage, config, ws);
  }
  const auto n = read_deployment(ws.deployment(), config.registry).size();
  std::vector<SensitivityRow> out;
  for (auto budget : node_budgets) {
    auto variant = config;
    variant.train.max_nodes_per_tree =
        nodes_per_tree_for_budget(budget, n, config.train.trees_per_forest);
    const Workspace sub{ws.root / ("nodes_" + std::to_string(budget))};
    fs::create_directories(sub.root);
    for (const auto& dir : {"sweep", "dataset"}) {
      fs::copy(ws.root / dir, sub.root / dir,
               fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    }
    fs::copy_file(ws.deployment(), sub.deployment(), fs::copy_options::overwrite_existing);
    for (auto stage : {"train", "quantize", "run", "report"}) run_stage(stage, variant, sub);
    const auto entries = image_entries(sub);
    for (const auto& s : summaries_of(variant, sub)) out.push_back({"model_nodes", budget, entries, s});
  }
  return out;
}

void write_sensitivity_csv(const fs::path& path, const std::vector<SensitivityRow>& rows) {
  std::ostringstream out;
  out << "knob,value,entries,raw_kib,manager,traces,geomean_normalized,mean_normalized,"
         "worst_normalized,outliers\n";
  for (const auto& r : rows) {
    out << r.knob << ',' << r.value << ',' << r.entries << ','
        << text::format_double(static_cast<double>(r.entries) * 45.0 / 8192.0) << ','
        << r.summary.manager << ',' << r.summary.traces << ','
        << text::format_double(r.summary.geomean_normalized) << ','
        << text::format_double(r.summary.mean_normalized) << ','
        << text::format_double(r.summary.worst_normalized) << ',' << r.summary.outliers << '\n';
  }
  text::write_file(path, out.str());
}

}  // namespace pfm
