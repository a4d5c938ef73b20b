#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pfm/features.hpp"
#include "pfm/forest.hpp"

namespace pfm {

struct QuantSpec {
  double leaf_scale = 1024.0;  // IPC -> fixed point
  std::uint16_t leaf_max = 4095;

  std::uint16_t threshold(double t) const;
  std::uint16_t leaf(double ipc) const;
};

// 45-bit packed node:
//   [44:42] hpc_id  [41:26] threshold  [25:14] lnv  [13:2] rnv
//   [1] lnv_type  [0] rnv_type
// A type bit of 1 means the matching field holds a leaf value; 0 means it is
// the index of the child entry.
struct NodeMemEntry {
  std::uint8_t hpc_id = 0;
  std::uint16_t threshold = 0;
  std::uint16_t lnv = 0;
  std::uint16_t rnv = 0;
  bool lnv_leaf = false;
  bool rnv_leaf = false;

  std::uint64_t pack() const;
  static NodeMemEntry unpack(std::uint64_t word);
  friend bool operator==(const NodeMemEntry&, const NodeMemEntry&) = default;
};

inline constexpr std::size_t kEntryBits = 45;
inline constexpr std::size_t kRitBits = 13;
inline constexpr std::size_t kMaxEntries = 4096;  // 12-bit child and root indices

// Root Index Table: one 13-bit word per (forest, tree) = valid bit + root.
struct RootIndexTable {
  std::size_t num_pscs = 0;
  std::size_t trees_per_forest = 0;
  std::vector<std::uint16_t> words;  // bit 12 = valid, bits 11:0 = root index

  static std::uint16_t encode(std::uint16_t root) { return static_cast<std::uint16_t>(0x1000 | root); }
  bool valid(std::size_t psc, std::size_t tree) const;
  std::uint16_t root(std::size_t psc, std::size_t tree) const;
  friend bool operator==(const RootIndexTable&, const RootIndexTable&) = default;
};

struct NodeMemImage {
  std::uint8_t feature_count = kNumFeatures;
  std::vector<NodeMemEntry> entries;
  RootIndexTable rit;
  friend bool operator==(const NodeMemImage&, const NodeMemImage&) = default;
};

// Tree with quantized thresholds and leaves; the reference the image must
// reproduce bit for bit.
struct QuantizedTree {
  struct Node {
    int feature = -1;
    std::uint16_t threshold = 0;
    int left = -1;
    int right = -1;
    std::uint16_t value = 0;
  };
  std::vector<Node> nodes;

  std::uint16_t predict(const FeatureVector& f) const;
};

struct QuantizedSuite {
  std::vector<std::vector<QuantizedTree>> forests;

  // floor of the mean over the forest's trees.
  std::uint32_t predict(std::size_t psc, const FeatureVector& f) const;
};

struct QuantizedModel {
  NodeMemImage image;
  QuantizedSuite reference;
};

// Lays out every forest, tree-major, with each tree's internal nodes in
// breadth-first order. Leaves are stored inline in their parent. A tree that
// is a single leaf becomes one degenerate entry whose both sides hold the leaf.
QuantizedModel quantize(const SuiteModel& model, const QuantSpec& spec = {});

struct Traversal {
  std::uint32_t prediction = 0;
  std::uint32_t comparisons = 0;
};

Traversal traverse(const NodeMemImage& image, std::size_t psc, const FeatureVector& f);

struct BestPsc {
  std::size_t psc = 0;
  std::uint32_t prediction = 0;
  std::uint32_t comparisons = 0;
};

// Strictly greater prediction replaces the incumbent, so ties keep the lower index.
BestPsc select_best_psc(const NodeMemImage& image, const FeatureVector& f);

inline constexpr std::uint8_t kPmemVersion = 1;

// "PMEM", version u8, feature count u8, PSC count u8, trees per forest u8,
// entry count u16, RIT words u16[psc*trees], entries u64[count]; little endian.
std::string serialize_image(const NodeMemImage& image);
NodeMemImage deserialize_image(std::string_view bytes);
// Throws Error on any structural violation of the image.
void validate_image(const NodeMemImage& image);

struct SizeReport {
  std::size_t entries = 0;
  std::size_t entry_bits = 0;
  std::size_t rit_bits = 0;
  double entry_kib = 0.0;
  double total_kib = 0.0;
};

SizeReport size_report(const NodeMemImage& image);
std::string format_size_report(const SizeReport& r);

// Model-size budget in KiB -> internal nodes allowed per tree.
std::size_t internal_nodes_for_budget(double kib, std::size_t num_pscs,
                                      std::size_t trees_per_forest);

}  // namespace pfm
