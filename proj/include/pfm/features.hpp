#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string_view>

namespace pfm {

// The six PSC-invariant per-window events, in hpc_id order.
enum class Feature : std::uint8_t {
  l1i_pages_read_load = 0,
  l1d_pages_read_load = 1,
  l1d_rfo_access = 2,
  branch_return = 3,
  not_branch = 4,
  branch_conditional = 5,
};

inline constexpr std::size_t kNumFeatures = 6;
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "l1i_pages_read_load", "l1d_pages_read_load", "l1d_rfo_access",
    "branch_return",       "not_branch",          "branch_conditional"};

inline constexpr std::uint16_t saturate16(std::uint64_t v) {
  return v > std::numeric_limits<std::uint16_t>::max()
             ? std::numeric_limits<std::uint16_t>::max()
             : static_cast<std::uint16_t>(v);
}

// Saturating 16-bit per-window counts.
struct FeatureVector {
  std::array<std::uint16_t, kNumFeatures> values{};

  std::uint16_t operator[](std::size_t i) const { return values[i]; }
  std::uint16_t& operator[](std::size_t i) { return values[i]; }
  std::uint16_t operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

}  // namespace pfm
