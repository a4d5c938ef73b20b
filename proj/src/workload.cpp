#include "pfm/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pfm/error.hpp"
#include "pfm/rng.hpp"

namespace pfm {
namespace {

constexpr std::uint64_t kLineBytes = 64;
constexpr std::uint64_t kDefaultCodeBase = 0x400000;
constexpr std::uint64_t kCodeBaseStride = 0x1000000;
constexpr std::uint64_t kHotBufferBytes = 4096;

bool in_unit(double f) { return f >= 0.0 && f <= 1.0; }

void validate_basic(const BasicPattern& pattern, std::size_t phase) {
  const auto where = "phase " + std::to_string(phase) + ": ";
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Strided>) {
          if (p.span != 0 && p.span < kLineBytes) {
            throw Error(where + "strided span smaller than one cache line");
          }
        } else if constexpr (std::is_same_v<T, PointerChase>) {
          if (p.working_set < kLineBytes) {
            throw Error(where + "working set smaller than one cache line");
          }
          if (p.node_bytes == 0 || p.node_bytes > p.working_set) {
            throw Error(where + "node size must be in [1, working set]");
          }
        } else if constexpr (std::is_same_v<T, Streaming>) {
          if (p.region < kLineBytes) {
            throw Error(where + "streaming region smaller than one cache line");
          }
        } else {
          if (p.footprint < 4) throw Error(where + "loop footprint below one instruction");
        }
      },
      pattern);
}

// Generates data addresses for one basic pattern.
class AddressStream {
 public:
  AddressStream(const BasicPattern& pattern, std::uint64_t base, Rng& rng)
      : pattern_(pattern), base_(base) {
    if (const auto* pc = std::get_if<PointerChase>(&pattern_)) {
      const std::uint64_t nodes = pc->working_set / pc->node_bytes;
      next_.resize(nodes);
      std::iota(next_.begin(), next_.end(), std::uint32_t{0});
      // Sattolo's algorithm: a uniformly random single cycle.
      for (std::uint64_t i = nodes; i > 1; --i) {
        std::swap(next_[i - 1], next_[rng.below(i - 1)]);
      }
    }
  }

  std::uint64_t next(Rng& rng) {
    return std::visit(
        [&](const auto& p) -> std::uint64_t {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, Strided>) {
            auto offset = static_cast<std::uint64_t>(
                static_cast<std::int64_t>(count_++) * p.stride);
            if (p.span != 0) {
              const auto s = static_cast<std::int64_t>(p.span);
              const auto signed_off =
                  (static_cast<std::int64_t>(offset) % s + s) % s;
              offset = static_cast<std::uint64_t>(signed_off);
            }
            return base_ + offset;
          } else if constexpr (std::is_same_v<T, PointerChase>) {
            const std::uint64_t addr = base_ + cursor_ * p.node_bytes;
            cursor_ = next_[cursor_];
            return addr;
          } else if constexpr (std::is_same_v<T, Streaming>) {
            const std::uint64_t addr = base_ + cursor_;
            cursor_ = (cursor_ + 8 * (1 + rng.below(4))) % p.region;
            return addr;
          } else {
            const std::uint64_t addr = base_ + cursor_;
            cursor_ = (cursor_ + 8) % kHotBufferBytes;
            return addr;
          }
        },
        pattern_);
  }

 private:
  BasicPattern pattern_;
  std::uint64_t base_;
  std::uint64_t count_ = 0;
  std::uint64_t cursor_ = 0;
  std::vector<std::uint32_t> next_;
};

std::vector<std::pair<double, BasicPattern>> parts_of(const Pattern& pattern) {
  return std::visit(
      [](const auto& p) -> std::vector<std::pair<double, BasicPattern>> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Mixed>) {
          return p.parts;
        } else {
          return {{1.0, BasicPattern{p}}};
        }
      },
      pattern);
}

std::uint64_t code_footprint_of(const PhaseSpec& phase) {
  if (const auto* loop = std::get_if<LoopCode>(&phase.pattern)) {
    return loop->footprint;
  }
  return phase.code_footprint;
}

// Static instruction kinds of one loop body; counts follow the phase fractions.
std::vector<Kind> make_body(const PhaseSpec& phase, std::size_t n, Rng& rng) {
  const auto count = [](double f, std::size_t total) {
    return static_cast<std::size_t>(std::llround(f * static_cast<double>(total)));
  };
  std::size_t cond = count(phase.branch_mix.conditional, n);
  std::size_t ret = std::min(count(phase.branch_mix.ret, n), n - cond);
  std::size_t other_branch =
      std::min(count(phase.branch_mix.other, n), n - cond - ret);
  const std::size_t non_branch = n - cond - ret - other_branch;
  const std::size_t mem = count(phase.mem_fraction, non_branch);
  const std::size_t loads = count(phase.load_store_ratio, mem);

  std::vector<Kind> body;
  body.reserve(n);
  body.insert(body.end(), cond, Kind::branch_conditional);
  body.insert(body.end(), ret, Kind::branch_return);
  body.insert(body.end(), other_branch, Kind::branch_other);
  body.insert(body.end(), loads, Kind::load);
  body.insert(body.end(), mem - loads, Kind::store);
  body.insert(body.end(), non_branch - mem, Kind::other);
  rng.shuffle(std::span<Kind>(body));
  return body;
}

// Binds each static memory instruction of the body to one mixture part, with
// per-part counts proportional to the weights (largest remainder).
std::vector<std::uint8_t> assign_parts(const std::vector<Kind>& body,
                                       const std::vector<double>& weights, bool loads_only,
                                       Rng& rng) {
  std::vector<std::size_t> mem_positions;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (loads_only ? body[i] == Kind::load : is_memory(body[i])) mem_positions.push_back(i);
  }
  std::vector<std::uint8_t> part(body.size(), 0);
  if (weights.size() <= 1 || mem_positions.empty()) return part;

  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const auto n = static_cast<double>(mem_positions.size());
  std::vector<std::size_t> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double exact = weights[k] / total * n;
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[k];
    remainders.push_back({exact - std::floor(exact), k});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < mem_positions.size(); ++r, ++assigned) {
    ++counts[remainders[r % remainders.size()].second];
  }

  std::vector<std::uint8_t> labels;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    labels.insert(labels.end(), counts[k], static_cast<std::uint8_t>(k));
  }
  rng.shuffle(std::span<std::uint8_t>(labels));
  for (std::size_t j = 0; j < mem_positions.size(); ++j) part[mem_positions[j]] = labels[j];
  return part;
}

}  // namespace

void validate(const WorkloadSpec& spec) {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < spec.phases.size(); ++i) {
    const auto& phase = spec.phases[i];
    const auto where = "phase " + std::to_string(i) + ": ";
    if (phase.length == 0) throw Error(where + "zero-length phase");
    const auto& mix = phase.branch_mix;
    if (!in_unit(mix.conditional) || !in_unit(mix.ret) || !in_unit(mix.other) ||
        mix.total() > 1.0 + 1e-12) {
      throw Error(where + "branch fractions must lie in [0,1] and sum to <= 1");
    }
    if (!in_unit(phase.load_store_ratio) || !in_unit(phase.mem_fraction)) {
      throw Error(where + "load/store and memory fractions must lie in [0,1]");
    }
    if (code_footprint_of(phase) < 4) throw Error(where + "code footprint below one instruction");
    for (const auto& [weight, part] : parts_of(phase.pattern)) {
      if (!(weight >= 0.0)) throw Error(where + "negative mixture weight");
      validate_basic(part, i);
    }
    if (phase.store_pattern) validate_basic(*phase.store_pattern, i);
    if (const auto* mixed = std::get_if<Mixed>(&phase.pattern)) {
      double total = 0;
      for (const auto& part : mixed->parts) total += part.first;
      if (total <= 0.0) throw Error(where + "mixture weights sum to zero");
    }
    sum += phase.length;
  }
  if (sum != spec.total_instructions) {
    throw Error("phase lengths sum to " + std::to_string(sum) +
                ", expected total_instructions " +
                std::to_string(spec.total_instructions));
  }
}

WorkloadSpec make_workload(std::vector<PhaseSpec> phases, std::uint64_t seed) {
  WorkloadSpec spec{std::move(phases), seed, 0};
  for (const auto& p : spec.phases) spec.total_instructions += p.length;
  return spec;
}

Trace generate_synthetic(const WorkloadSpec& spec) {
  validate(spec);
  Trace trace;
  trace.reserve(spec.total_instructions);
  for (std::size_t p = 0; p < spec.phases.size(); ++p) {
    const auto& phase = spec.phases[p];
    Rng rng(derive_seed(spec.seed, p));
    const std::uint64_t code_base =
        phase.code_base.value_or(kDefaultCodeBase + p * kCodeBaseStride);
    const std::uint64_t data_base =
        phase.data_base.value_or(static_cast<std::uint64_t>(p + 1) << 36);
    const std::size_t body_len =
        static_cast<std::size_t>(std::max<std::uint64_t>(1, code_footprint_of(phase) / 4));
    const auto body = make_body(phase, body_len, rng);

    const auto parts = parts_of(phase.pattern);
    std::vector<AddressStream> streams;
    std::vector<double> weights;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      streams.emplace_back(parts[k].second, data_base + (std::uint64_t{k} << 32), rng);
      weights.push_back(parts[k].first);
    }
    const bool split_stores = phase.store_pattern.has_value();
    auto part_of = assign_parts(body, weights, split_stores, rng);
    if (split_stores) {
      streams.emplace_back(*phase.store_pattern,
                           data_base + (std::uint64_t{parts.size()} << 32), rng);
      for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] == Kind::store) part_of[i] = static_cast<std::uint8_t>(parts.size());
      }
    }

    for (std::uint64_t i = 0; i < phase.length; ++i) {
      const std::size_t pos = i % body_len;
      TraceRecord r{code_base + 4 * pos, body[pos], 0};
      if (is_memory(r.kind)) r.data_addr = streams[part_of[pos]].next(rng);
      trace.push_back(r);
    }
  }
  return trace;
}

}  // namespace pfm
