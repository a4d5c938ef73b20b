#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "pfm/trace.hpp"

namespace pfm {

// Constant-stride scan. span == 0 means unbounded; otherwise addresses wrap
// modulo span.
struct Strided {
  std::int64_t stride = 64;
  std::uint64_t span = 0;
};

// Walk of a single random cycle over the nodes of the working set.
struct PointerChase {
  std::uint64_t working_set = 0;
  std::uint64_t node_bytes = 64;
};

// Forward scan over a region with irregular element sizes (8-32 bytes),
// wrapping at the region end.
struct Streaming {
  std::uint64_t region = 0;
};

// Large instruction loop; data traffic stays in a small hot buffer.
struct LoopCode {
  std::uint64_t footprint = 0;
};

using BasicPattern = std::variant<Strided, PointerChase, Streaming, LoopCode>;

// Each static memory instruction of the loop body is bound to one part; the
// number of instructions per part is proportional to its weight.
struct Mixed {
  std::vector<std::pair<double, BasicPattern>> parts;
};

using Pattern = std::variant<Strided, PointerChase, Streaming, LoopCode, Mixed>;

struct BranchMix {
  double conditional = 0.0;
  double ret = 0.0;
  double other = 0.0;

  double total() const { return conditional + ret + other; }
};

struct PhaseSpec {
  std::uint64_t length = 0;
  Pattern pattern = Strided{};
  BranchMix branch_mix;
  // Fraction of memory accesses that are loads (the rest are stores).
  double load_store_ratio = 1.0;
  // Fraction of non-branch instructions that access memory.
  double mem_fraction = 1.0;
  // Bytes of straight-line code executed as a loop; 4 bytes per instruction.
  // A LoopCode pattern overrides this with its footprint.
  std::uint64_t code_footprint = 4096;
  // When set, stores draw addresses from this pattern and only loads use
  // `pattern`.
  std::optional<BasicPattern> store_pattern;
  // Overrides the per-phase default data base address (lets phases share data).
  std::optional<std::uint64_t> data_base;
  // Overrides the per-phase default code base address.
  std::optional<std::uint64_t> code_base;
};

struct WorkloadSpec {
  std::vector<PhaseSpec> phases;
  std::uint64_t seed = 0;
  std::uint64_t total_instructions = 0;
};

// Throws Error if the spec violates its invariants.
void validate(const WorkloadSpec& spec);

// Deterministic in (spec, seed).
Trace generate_synthetic(const WorkloadSpec& spec);

// Convenience: builds a spec whose total is the sum of the phase lengths.
WorkloadSpec make_workload(std::vector<PhaseSpec> phases, std::uint64_t seed);

}  // namespace pfm
