#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pfm/config.hpp"
#include "pfm/nodemem.hpp"
#include "pfm/pipeline.hpp"
#include "pfm/trace.hpp"

namespace {

struct Common {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> window_size;
  std::vector<std::string> managers;
  std::vector<std::size_t> trial;

  pfm::Overrides overrides() const {
    pfm::Overrides o{seed, window_size, {}, {}};
    if (!managers.empty()) o.managers = managers;
    if (!trial.empty()) o.trial = std::pair{trial.at(0), trial.at(1)};
    return o;
  }
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("-c,--config", c.config, "Experiment config file");
  if (config_required) opt->required();
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--window-size", c.window_size, "Override the instruction window size");
  cmd->add_option("--managers", c.managers, "Override the managers to run (comma-separated)")
      ->delimiter(',');
  cmd->add_option("--trial", c.trial, "Override trial manager windows as TRIAL,EXPLOIT")
      ->delimiter(',')
      ->expected(2);
}

pfm::ExperimentConfig load(const Common& c) {
  auto config = pfm::load_config(c.config);
  pfm::apply_overrides(config, c.overrides());
  config.validate();
  return config;
}

void dump_image(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw pfm::Error("cannot open " + path);
  std::string bytes;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, f)) > 0;) bytes.append(buf, n);
  std::fclose(f);

  const auto image = pfm::deserialize_image(bytes);
  std::printf("PMEM version 1 features %u pscs %zu trees %zu entries %zu\n",
              unsigned{image.feature_count}, image.rit.num_pscs, image.rit.trees_per_forest,
              image.entries.size());
  std::printf("rit psc tree valid root\n");
  for (std::size_t p = 0; p < image.rit.num_pscs; ++p) {
    for (std::size_t t = 0; t < image.rit.trees_per_forest; ++t) {
      std::printf("rit %zu %zu %d %u\n", p, t, image.rit.valid(p, t) ? 1 : 0,
                  unsigned{image.rit.root(p, t)});
    }
  }
  std::printf("entry index hpc_id threshold lnv lnv_leaf rnv rnv_leaf word\n");
  for (std::size_t i = 0; i < image.entries.size(); ++i) {
    const auto& e = image.entries[i];
    std::printf("entry %zu %u %u %u %d %u %d 0x%012llx\n", i, unsigned{e.hpc_id},
                unsigned{e.threshold}, unsigned{e.lnv}, e.lnv_leaf ? 1 : 0, unsigned{e.rnv},
                e.rnv_leaf ? 1 : 0, static_cast<unsigned long long>(e.pack()));
  }
  std::printf("%s\n", pfm::format_size_report(pfm::size_report(image)).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prefetcher-configuration manager experiments"};
  app.require_subcommand(1);

  Common common;
  std::vector<std::pair<std::string, CLI::App*>> stages;
  for (auto stage : pfm::kStages) {
    auto* cmd = app.add_subcommand(std::string(stage), "Run the " + std::string(stage) + " stage");
    add_common(cmd, common);
    stages.emplace_back(stage, cmd);
  }

  auto* pipeline = app.add_subcommand("pipeline", "Run every stage in order");
  add_common(pipeline, common, false);
  std::string manifest;
  pipeline->add_option("--manifest", manifest, "Rerun from a manifest instead of a config");

  auto* sensitivity = app.add_subcommand("sensitivity", "Cache-size or model-size sweep");
  add_common(sensitivity, common);
  std::vector<std::uint64_t> llc_sizes;
  std::vector<std::size_t> node_budgets;
  sensitivity->add_option("--llc", llc_sizes, "LLC sizes in bytes")->delimiter(',');
  sensitivity->add_option("--nodes", node_budgets, "Suite-wide node budgets")->delimiter(',');

  auto* pmem_dump = app.add_subcommand("pmem-dump", "Print a node-memory image field by field");
  std::string image_path;
  pmem_dump->add_option("image", image_path, "PMEM image file")->required();

  auto* gen = app.add_subcommand("gen-trace", "Write a configured synthetic trace to a file");
  add_common(gen, common);
  std::string trace_name;
  std::string trace_out;
  gen->add_option("--trace", trace_name, "Trace section name")->required();
  gen->add_option("-o,--output", trace_out, "Output path (.csv for CSV, else binary)")->required();

  CLI11_PARSE(app, argc, argv);

  std::string stage = "config";
  try {
    const pfm::Workspace ws{common.out};
    for (const auto& [name, cmd] : stages) {
      if (!cmd->parsed()) continue;
      const auto config = load(common);
      stage = name;
      pfm::run_stage(name, config, ws);
      return 0;
    }
    if (pipeline->parsed()) {
      pfm::ExperimentConfig config;
      if (!manifest.empty()) {
        config = pfm::config_from_manifest(manifest);
        pfm::apply_overrides(config, common.overrides());
        config.validate();
      } else if (!common.config.empty()) {
        config = load(common);
      } else {
        throw pfm::Error("pipeline needs --config or --manifest");
      }
      pfm::run_pipeline(config, ws);
      std::cout << "wrote " << ws.manifest().string() << '\n';
      return 0;
    }
    if (sensitivity->parsed()) {
      const auto config = load(common);
      stage = "sensitivity";
      if (llc_sizes.empty() == node_budgets.empty()) {
        throw pfm::Error("give exactly one of --llc or --nodes");
      }
      const auto rows = llc_sizes.empty() ? pfm::model_size_sweep(config, ws, node_budgets)
                                          : pfm::cache_size_sweep(config, ws, llc_sizes);
      pfm::write_sensitivity_csv(ws.root / "sensitivity.csv", rows);
      return 0;
    }
    if (pmem_dump->parsed()) {
      stage = "pmem-dump";
      dump_image(image_path);
      return 0;
    }
    if (gen->parsed()) {
      const auto config = load(common);
      stage = "gen-trace";
      for (const auto& source : config.traces) {
        if (source.id != trace_name) continue;
        pfm::write_trace_file(trace_out, pfm::load_trace(source));
        return 0;
      }
      throw pfm::Error("no trace named '" + trace_name + "'");
    }
  } catch (const pfm::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << stage << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
