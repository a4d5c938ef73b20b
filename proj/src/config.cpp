#include "pfm/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "pfm/error.hpp"
#include "text.hpp"

namespace pfm {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

namespace {

std::uint64_t parse_suffixed(std::string_view s, std::uint64_t unit) {
  s = text::trim(s);
  if (s.empty()) throw Error("empty size");
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data() + 2, s.data() + s.size(), v, 16);
    if (ec != std::errc{} || p != s.data() + s.size()) throw Error("bad hex value '" + std::string(s) + "'");
    return v;
  }
  std::uint64_t mult = 1;
  switch (std::toupper(static_cast<unsigned char>(s.back()))) {
    case 'K': mult = unit; break;
    case 'M': mult = unit * unit; break;
    case 'G': mult = unit * unit * unit; break;
    default: break;
  }
  if (mult != 1) s.remove_suffix(1);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw Error("bad size '" + std::string(s) + "'");
  return v * mult;
}

}  // namespace

std::uint64_t parse_size(std::string_view s) { return parse_suffixed(s, 1024); }
std::uint64_t parse_count(std::string_view s) { return parse_suffixed(s, 1000); }

namespace {

double parse_number(std::string_view s) {
  try {
    return text::to_double(s, 0);
  } catch (const ParseError&) {
    throw Error("bad number '" + std::string(text::trim(s)) + "'");
  }
}

bool parse_bool(std::string_view s) {
  s = text::trim(s);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error("bad boolean '" + std::string(s) + "'");
}

// Splits on `sep` at parenthesis depth zero.
std::vector<std::string> split_top(std::string_view s, char sep) {
  std::vector<std::string> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')') --depth;
    if (depth < 0) throw Error("unbalanced parentheses in '" + std::string(s) + "'");
    if (s[i] == sep && depth == 0) {
      out.emplace_back(text::trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (depth != 0) throw Error("unbalanced parentheses in '" + std::string(s) + "'");
  out.emplace_back(text::trim(s.substr(start)));
  return out;
}

// "name(args)" -> name, args
std::pair<std::string, std::string> call_parts(std::string_view s) {
  s = text::trim(s);
  const auto open = s.find('(');
  if (open == std::string_view::npos || s.back() != ')') {
    throw Error("expected name(args), got '" + std::string(s) + "'");
  }
  return {std::string(text::trim(s.substr(0, open))),
          std::string(s.substr(open + 1, s.size() - open - 2))};
}

BasicPattern parse_basic(std::string_view s) {
  const auto [name, args_text] = call_parts(s);
  const auto args = split_top(args_text, ',');
  auto arg = [&](std::size_t i) { return parse_size(args.at(i)); };
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (args.size() < lo || args.size() > hi || (args.size() == 1 && args[0].empty())) {
      throw Error(name + ": wrong number of arguments");
    }
  };
  if (name == "strided") {
    need(1, 2);
    const auto raw = text::trim(args[0]);
    std::int64_t stride = 0;
    if (!raw.empty() && raw[0] == '-') {
      stride = -static_cast<std::int64_t>(parse_size(raw.substr(1)));
    } else {
      stride = static_cast<std::int64_t>(parse_size(raw));
    }
    return Strided{stride, args.size() > 1 ? arg(1) : 0};
  }
  if (name == "chase") {
    need(1, 2);
    return PointerChase{arg(0), args.size() > 1 ? arg(1) : 64};
  }
  if (name == "stream") {
    need(1, 1);
    return Streaming{arg(0)};
  }
  if (name == "loop") {
    need(1, 1);
    return LoopCode{arg(0)};
  }
  throw Error("unknown pattern '" + name + "'");
}

Psc parse_psc(std::string_view s, const PrefetcherRegistry& registry) {
  return parse_psc_label(text::trim(s), registry);
}

std::vector<Psc> parse_psc_list(std::string_view s, const PrefetcherRegistry& registry) {
  std::vector<Psc> out;
  for (const auto& item : split_top(s, ',')) {
    if (!item.empty()) out.push_back(parse_psc(item, registry));
  }
  return out;
}

}  // namespace

Pattern parse_pattern(std::string_view s) {
  s = text::trim(s);
  if (s.rfind("mix(", 0) == 0) {
    const auto [name, body] = call_parts(s);
    Mixed m;
    for (const auto& part : split_top(body, '+')) {
      const auto star = part.find('*');
      if (star == std::string::npos) throw Error("mix part needs weight*pattern: '" + part + "'");
      m.parts.push_back({parse_number(part.substr(0, star)), parse_basic(part.substr(star + 1))});
    }
    return m;
  }
  return std::visit([](const auto& b) -> Pattern { return b; }, parse_basic(s));
}

PhaseSpec parse_phase(std::string_view s) {
  std::vector<std::string> tokens;
  {
    // Whitespace-separated at parenthesis depth zero.
    int depth = 0;
    std::string cur;
    for (char c : s) {
      if (c == '(') ++depth;
      if (c == ')') --depth;
      if (std::isspace(static_cast<unsigned char>(c)) && depth == 0) {
        if (!cur.empty()) tokens.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
  }
  if (tokens.size() < 2) throw Error("phase needs a length and a pattern");
  PhaseSpec p;
  p.length = parse_count(tokens[0]);
  p.pattern = parse_pattern(tokens[1]);
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string::npos) throw Error("phase option '" + tokens[i] + "' needs key=value");
    const std::string key = tokens[i].substr(0, eq);
    const std::string value = tokens[i].substr(eq + 1);
    if (key == "cond") p.branch_mix.conditional = parse_number(value);
    else if (key == "ret") p.branch_mix.ret = parse_number(value);
    else if (key == "other") p.branch_mix.other = parse_number(value);
    else if (key == "loads") p.load_store_ratio = parse_number(value);
    else if (key == "mem") p.mem_fraction = parse_number(value);
    else if (key == "code") p.code_footprint = parse_size(value);
    else if (key == "data_base") p.data_base = parse_size(value);
    else if (key == "code_base") p.code_base = parse_size(value);
    else if (key == "stores") p.store_pattern = parse_basic(value);
    else throw Error("unknown phase option '" + key + "'");
  }
  return p;
}

void ExperimentConfig::validate() const {
  hierarchy.validate();
  registry.validate();
  if (window_size == 0) throw Error("window_size must be positive");
  if (traces.empty()) throw Error("config lists no traces");
  if (deployment.empty() && !prune_top_k) throw Error("config needs a deployment list or prune(k)");
  if (prune_top_k && *prune_top_k == 0) throw Error("prune top_k must be positive");
  if (!prune_top_k) {
    if (carrier >= deployment.size()) throw Error("carrier index outside the deployment set");
    if (first_psc >= deployment.size()) throw Error("first_psc outside the deployment set");
  }
  const auto sizes = registry.sizes();
  psc_id(baseline, sizes);
  const bool baseline_none = baseline.active_count() == 0;
  if (!prune_top_k && !baseline_none &&
      std::find(deployment.begin(), deployment.end(), baseline) == deployment.end()) {
    throw Error("baseline PSC must be in the deployment set or all-none");
  }
  if (managers.empty()) throw Error("config lists no managers");
  for (const auto& m : managers) {
    if (std::find(std::begin(kManagerNames), std::end(kManagerNames), m) == std::end(kManagerNames)) {
      throw Error("unknown manager '" + m + "'");
    }
  }
  if (trial_windows == 0 || exploit_windows == 0) throw Error("trial parameters must be >= 1");
  train.validate();
  std::vector<std::string> ids;
  for (const auto& t : traces) {
    if (std::find(ids.begin(), ids.end(), t.id) != ids.end()) throw Error("duplicate trace id " + t.id);
    ids.push_back(t.id);
    if (!t.file) pfm::validate(t.workload);
  }
}

ExperimentConfig parse_config(std::string_view source) {
  ExperimentConfig cfg;
  cfg.text = std::string(source);
  const auto rows = text::lines(source);
  std::string section;
  TraceSource* trace = nullptr;
  std::string deployment_text;
  std::string candidates_text;
  std::string baseline_text;

  for (std::size_t n = 0; n < rows.size(); ++n) {
    std::string_view line = rows[n];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(n + 1) + ": ";
    try {
      if (line.front() == '[') {
        if (line.back() != ']') throw Error("unterminated section header");
        const auto name = text::trim(line.substr(1, line.size() - 2));
        if (name == "hierarchy") {
          section = "hierarchy";
          trace = nullptr;
        } else if (name.rfind("trace ", 0) == 0) {
          section = "trace";
          cfg.traces.push_back({});
          trace = &cfg.traces.back();
          trace->id = std::string(text::trim(name.substr(6)));
          trace->benchmark = trace->id;
          if (trace->id.empty()) throw Error("trace section needs a name");
          if (trace->id.find_first_of(",/\\ ") != std::string::npos) {
            throw Error("trace name may not contain ',', '/', '\\' or spaces");
          }
        } else {
          throw Error("unknown section [" + std::string(name) + "]");
        }
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw Error("expected key = value");
      const std::string key(text::trim(line.substr(0, eq)));
      const std::string value(text::trim(line.substr(eq + 1)));

      if (section == "hierarchy") {
        auto& h = cfg.hierarchy;
        auto geometry = [&](Level l) {
          const auto f = split_top(value, ',');
          if (f.size() != 3) throw Error(key + " needs size, ways, latency");
          h.levels[index_of(l)] = {parse_size(f[0]), static_cast<std::uint32_t>(parse_size(f[1])),
                                   static_cast<std::uint32_t>(parse_size(f[2]))};
        };
        if (key == "l1i") geometry(Level::l1i);
        else if (key == "l1d") geometry(Level::l1d);
        else if (key == "l2") geometry(Level::l2);
        else if (key == "llc") geometry(Level::llc);
        else if (key == "dram_latency") h.dram_latency = static_cast<std::uint32_t>(parse_size(value));
        else if (key == "issue_width") h.issue_width = static_cast<std::uint32_t>(parse_size(value));
        else if (key == "exposure") h.exposure = parse_number(value);
        else throw Error("unknown hierarchy key '" + key + "'");
        continue;
      }
      if (section == "trace") {
        if (key == "benchmark") trace->benchmark = value;
        else if (key == "file") trace->file = value;
        else if (key == "seed") trace->workload.seed = parse_size(value);
        else if (key == "phase") {
          trace->workload.phases.push_back(parse_phase(value));
          trace->workload.total_instructions += trace->workload.phases.back().length;
        } else {
          throw Error("unknown trace key '" + key + "'");
        }
        continue;
      }

      if (key == "seed") cfg.seed = parse_size(value);
      else if (key == "window_size") cfg.window_size = parse_count(value);
      else if (key == "registry") {
        if (value == "standard") cfg.registry = PrefetcherRegistry::standard();
        else if (value == "wide") cfg.registry = PrefetcherRegistry::wide();
        else throw Error("unknown registry '" + value + "'");
        cfg.registry_name = value;
      } else if (key == "deployment") deployment_text = value;
      else if (key == "candidates") candidates_text = value;
      else if (key == "baseline") baseline_text = value;
      else if (key == "carrier") cfg.carrier = parse_size(value);
      else if (key == "first_psc") cfg.first_psc = parse_size(value);
      else if (key == "managers") {
        cfg.managers.clear();
        for (const auto& m : split_top(value, ',')) {
          if (!m.empty()) cfg.managers.push_back(m);
        }
      } else if (key == "trial") {
        const auto f = split_top(value, ',');
        if (f.size() != 2) throw Error("trial needs trial_windows, exploit_windows");
        cfg.trial_windows = parse_size(f[0]);
        cfg.exploit_windows = parse_size(f[1]);
      } else if (key == "approach") cfg.dataset.approach = parse_approach(value);
      else if (key == "label_alignment") {
        if (value == "same_window") cfg.label_alignment = LabelAlignment::same_window;
        else if (value == "next_window") cfg.label_alignment = LabelAlignment::next_window;
        else throw Error("unknown label alignment '" + value + "'");
      } else if (key == "label_threshold") cfg.label_threshold = parse_number(value);
      else if (key == "outlier_threshold") cfg.outlier_threshold = parse_number(value);
      else if (key == "trees_per_forest") cfg.train.trees_per_forest = parse_size(value);
      else if (key == "max_nodes_per_tree") cfg.train.max_nodes_per_tree = parse_size(value);
      else if (key == "max_depth") cfg.train.max_depth = parse_size(value);
      else if (key == "min_samples_leaf") cfg.train.min_samples_leaf = parse_size(value);
      else if (key == "bootstrap") cfg.train.bootstrap = parse_bool(value);
      else if (key == "leaf_scale") cfg.quant.leaf_scale = parse_number(value);
      else throw Error("unknown key '" + key + "'");
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
  }

  // PSC labels depend on the registry, which may be set after them.
  if (deployment_text.rfind("prune(", 0) == 0) {
    const auto [name, arg] = call_parts(deployment_text);
    cfg.prune_top_k = parse_size(arg);
  } else if (!deployment_text.empty()) {
    cfg.deployment = parse_psc_list(deployment_text, cfg.registry);
  }
  if (!candidates_text.empty() && candidates_text != "catalog") {
    cfg.candidates = parse_psc_list(candidates_text, cfg.registry);
  }
  if (!baseline_text.empty()) cfg.baseline = parse_psc(baseline_text, cfg.registry);
  if (cfg.managers.empty()) cfg.managers = {"static", "puppeteer"};
  cfg.dataset.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(text::read_file(path));
}

}  // namespace pfm
