#include "pfm/nodemem.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <sstream>

#include "pfm/error.hpp"

namespace pfm {

std::uint16_t QuantSpec::threshold(double t) const {
  // Round half up. Split thresholds sit on integers or half-integers, so for
  // integer features x < t holds exactly when x < round(t).
  if (!(t > 0.0)) return 0;
  const double c = std::floor(t + 0.5);
  return c >= 65535.0 ? 65535 : static_cast<std::uint16_t>(c);
}

std::uint16_t QuantSpec::leaf(double ipc) const {
  if (!(ipc > 0.0)) return 0;
  const double v = std::round(ipc * leaf_scale);
  return v >= leaf_max ? leaf_max : static_cast<std::uint16_t>(v);
}

std::uint64_t NodeMemEntry::pack() const {
  if (hpc_id > 7 || lnv > 0xFFF || rnv > 0xFFF) throw Error("node entry field out of range");
  return (std::uint64_t{hpc_id} << 42) | (std::uint64_t{threshold} << 26) |
         (std::uint64_t{lnv} << 14) | (std::uint64_t{rnv} << 2) |
         (std::uint64_t{lnv_leaf} << 1) | std::uint64_t{rnv_leaf};
}

NodeMemEntry NodeMemEntry::unpack(std::uint64_t w) {
  if (w >> kEntryBits) throw Error("node entry has bits set above bit 44");
  NodeMemEntry e;
  e.hpc_id = static_cast<std::uint8_t>((w >> 42) & 0x7);
  e.threshold = static_cast<std::uint16_t>((w >> 26) & 0xFFFF);
  e.lnv = static_cast<std::uint16_t>((w >> 14) & 0xFFF);
  e.rnv = static_cast<std::uint16_t>((w >> 2) & 0xFFF);
  e.lnv_leaf = (w >> 1) & 1;
  e.rnv_leaf = w & 1;
  return e;
}

bool RootIndexTable::valid(std::size_t psc, std::size_t tree) const {
  if (psc >= num_pscs || tree >= trees_per_forest) return false;
  return (words[psc * trees_per_forest + tree] & 0x1000) != 0;
}

std::uint16_t RootIndexTable::root(std::size_t psc, std::size_t tree) const {
  if (!valid(psc, tree)) {
    throw Error("no root for forest " + std::to_string(psc) + " tree " + std::to_string(tree));
  }
  return words[psc * trees_per_forest + tree] & 0xFFF;
}

std::uint16_t QuantizedTree::predict(const FeatureVector& f) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(f[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                                      : n.right);
  }
  return nodes[i].value;
}

std::uint32_t QuantizedSuite::predict(std::size_t psc, const FeatureVector& f) const {
  const auto& trees = forests.at(psc);
  std::uint32_t sum = 0;
  for (const auto& t : trees) sum += t.predict(f);
  return trees.empty() ? 0 : sum / static_cast<std::uint32_t>(trees.size());
}

QuantizedModel quantize(const SuiteModel& model, const QuantSpec& spec) {
  if (model.forests.empty()) throw Error("quantize: model has no forests");
  const std::size_t trees = model.forests.front().trees.size();
  for (const auto& f : model.forests) {
    if (f.trees.size() != trees) throw Error("quantize: forests differ in tree count");
  }
  if (model.forests.size() > 255 || trees > 255) throw Error("quantize: too many forests or trees");

  QuantizedModel out;
  auto& img = out.image;
  img.rit.num_pscs = model.forests.size();
  img.rit.trees_per_forest = trees;
  img.rit.words.assign(model.forests.size() * trees, 0);

  for (std::size_t p = 0; p < model.forests.size(); ++p) {
    std::vector<QuantizedTree> qforest;
    for (std::size_t t = 0; t < trees; ++t) {
      const Tree& tree = model.forests[p].trees[t];
      QuantizedTree qt;
      for (const auto& n : tree.nodes) {
        if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= kNumFeatures) {
          throw Error("quantize: tree uses a feature outside the hardware counters");
        }
        qt.nodes.push_back({n.feature, n.is_leaf() ? std::uint16_t{0} : spec.threshold(n.threshold),
                            n.left, n.right, n.is_leaf() ? spec.leaf(n.value) : std::uint16_t{0}});
      }

      const std::size_t base = img.entries.size();
      if (tree.nodes.front().is_leaf()) {
        const auto v = qt.nodes.front().value;
        img.entries.push_back({0, 0, v, v, true, true});
      } else {
        // Breadth-first numbering of internal nodes.
        std::vector<std::size_t> order;
        std::vector<std::size_t> slot(tree.nodes.size(), 0);
        std::deque<std::size_t> queue{0};
        while (!queue.empty()) {
          const std::size_t i = queue.front();
          queue.pop_front();
          slot[i] = base + order.size();
          order.push_back(i);
          for (int c : {tree.nodes[i].left, tree.nodes[i].right}) {
            if (!tree.nodes[static_cast<std::size_t>(c)].is_leaf()) {
              queue.push_back(static_cast<std::size_t>(c));
            }
          }
        }
        if (base + order.size() > kMaxEntries) {
          throw Error("quantize: model needs more than " + std::to_string(kMaxEntries) +
                      " node entries");
        }
        for (std::size_t i : order) {
          const auto& q = qt.nodes[i];
          NodeMemEntry e;
          e.hpc_id = static_cast<std::uint8_t>(q.feature);
          e.threshold = q.threshold;
          const auto& l = qt.nodes[static_cast<std::size_t>(q.left)];
          const auto& r = qt.nodes[static_cast<std::size_t>(q.right)];
          e.lnv_leaf = l.feature < 0;
          e.rnv_leaf = r.feature < 0;
          e.lnv = static_cast<std::uint16_t>(e.lnv_leaf ? l.value : slot[static_cast<std::size_t>(q.left)]);
          e.rnv = static_cast<std::uint16_t>(e.rnv_leaf ? r.value : slot[static_cast<std::size_t>(q.right)]);
          img.entries.push_back(e);
        }
      }
      if (img.entries.size() > kMaxEntries) {
        throw Error("quantize: model needs more than " + std::to_string(kMaxEntries) +
                    " node entries");
      }
      img.rit.words[p * trees + t] = RootIndexTable::encode(static_cast<std::uint16_t>(base));
      qforest.push_back(std::move(qt));
    }
    out.reference.forests.push_back(std::move(qforest));
  }
  return out;
}

Traversal traverse(const NodeMemImage& image, std::size_t psc, const FeatureVector& f) {
  const auto& rit = image.rit;
  if (psc >= rit.num_pscs) throw Error("traverse: forest index out of range");
  if (rit.trees_per_forest == 0) throw Error("traverse: forest has no trees");
  Traversal out;
  std::uint32_t sum = 0;
  for (std::size_t t = 0; t < rit.trees_per_forest; ++t) {
    std::size_t idx = rit.root(psc, t);
    // More steps than entries means some entry was revisited.
    for (std::size_t steps = 0;; ++steps) {
      if (steps >= image.entries.size()) throw Error("traverse: cycle in node memory");
      if (idx >= image.entries.size()) throw Error("traverse: entry index out of range");
      const auto& e = image.entries[idx];
      if (e.hpc_id >= image.feature_count) throw Error("traverse: hpc_id out of range");
      ++out.comparisons;
      const bool go_left = f[e.hpc_id] < e.threshold;
      const bool leaf = go_left ? e.lnv_leaf : e.rnv_leaf;
      const std::uint16_t v = go_left ? e.lnv : e.rnv;
      if (leaf) {
        sum += v;
        break;
      }
      idx = v;
    }
  }
  out.prediction = sum / static_cast<std::uint32_t>(rit.trees_per_forest);
  return out;
}

BestPsc select_best_psc(const NodeMemImage& image, const FeatureVector& f) {
  if (image.rit.num_pscs == 0) throw Error("select_best_psc: empty image");
  BestPsc best;
  for (std::size_t p = 0; p < image.rit.num_pscs; ++p) {
    const auto r = traverse(image, p, f);
    best.comparisons += r.comparisons;
    if (p == 0 || r.prediction > best.prediction) {
      best.psc = p;
      best.prediction = r.prediction;
    }
  }
  return best;
}

namespace {

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>(v >> 8));
}

std::uint64_t get_le(std::string_view b, std::size_t at, std::size_t n) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    v |= std::uint64_t{static_cast<unsigned char>(b[at + i])} << (8 * i);
  }
  return v;
}

}  // namespace

void validate_image(const NodeMemImage& img) {
  const auto& rit = img.rit;
  if (rit.words.size() != rit.num_pscs * rit.trees_per_forest) {
    throw Error("image: RIT size does not match forest shape");
  }
  if (img.entries.size() > kMaxEntries) throw Error("image: too many entries");
  for (auto w : rit.words) {
    if (w >> kRitBits) throw Error("image: nonzero reserved bits in a RIT word");
    if ((w & 0x1000) && (w & 0xFFF) >= img.entries.size()) {
      throw Error("image: RIT root index out of range");
    }
  }
  for (std::size_t i = 0; i < img.entries.size(); ++i) {
    const auto& e = img.entries[i];
    if (e.hpc_id >= img.feature_count) {
      throw Error("image: entry " + std::to_string(i) + " uses an unknown counter");
    }
    if (e.lnv > 0xFFF || e.rnv > 0xFFF) throw Error("image: entry field exceeds 12 bits");
    if ((!e.lnv_leaf && e.lnv >= img.entries.size()) ||
        (!e.rnv_leaf && e.rnv >= img.entries.size())) {
      throw Error("image: entry " + std::to_string(i) + " points past the end");
    }
  }
}

std::string serialize_image(const NodeMemImage& img) {
  validate_image(img);
  if (img.rit.num_pscs > 255 || img.rit.trees_per_forest > 255) {
    throw Error("image: forest shape does not fit the header");
  }
  std::string out = "PMEM";
  out.push_back(static_cast<char>(kPmemVersion));
  out.push_back(static_cast<char>(img.feature_count));
  out.push_back(static_cast<char>(img.rit.num_pscs));
  out.push_back(static_cast<char>(img.rit.trees_per_forest));
  put_u16(out, static_cast<std::uint16_t>(img.entries.size()));
  for (auto w : img.rit.words) put_u16(out, w);
  for (const auto& e : img.entries) {
    const std::uint64_t w = e.pack();
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((w >> (8 * i)) & 0xFF));
  }
  return out;
}

NodeMemImage deserialize_image(std::string_view b) {
  constexpr std::size_t header = 10;
  if (b.size() < 4 || b.substr(0, 4) != "PMEM") throw Error("image: bad magic");
  if (b.size() < header) throw Error("image: truncated header");
  if (static_cast<std::uint8_t>(b[4]) != kPmemVersion) {
    throw Error("image: unsupported version " + std::to_string(static_cast<std::uint8_t>(b[4])));
  }
  NodeMemImage img;
  img.feature_count = static_cast<std::uint8_t>(b[5]);
  img.rit.num_pscs = static_cast<std::uint8_t>(b[6]);
  img.rit.trees_per_forest = static_cast<std::uint8_t>(b[7]);
  const std::size_t count = get_le(b, 8, 2);
  const std::size_t rit_words = img.rit.num_pscs * img.rit.trees_per_forest;
  const std::size_t expected = header + 2 * rit_words + 8 * count;
  if (b.size() < expected) throw Error("image: truncated body");
  if (b.size() > expected) throw Error("image: trailing bytes after the last entry");
  std::size_t at = header;
  for (std::size_t i = 0; i < rit_words; ++i, at += 2) {
    img.rit.words.push_back(static_cast<std::uint16_t>(get_le(b, at, 2)));
  }
  for (std::size_t i = 0; i < count; ++i, at += 8) {
    const std::uint64_t w = get_le(b, at, 8);
    if (w >> kEntryBits) throw Error("image: nonzero reserved bits in entry " + std::to_string(i));
    img.entries.push_back(NodeMemEntry::unpack(w));
  }
  validate_image(img);
  return img;
}

SizeReport size_report(const NodeMemImage& img) {
  SizeReport r;
  r.entries = img.entries.size();
  r.entry_bits = r.entries * kEntryBits;
  r.rit_bits = img.rit.words.size() * kRitBits;
  r.entry_kib = static_cast<double>(r.entry_bits) / 8.0 / 1024.0;
  r.total_kib = static_cast<double>(r.entry_bits + r.rit_bits) / 8.0 / 1024.0;
  return r;
}

std::string format_size_report(const SizeReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "entries=%zu entry_bits=%zu rit_bits=%zu entry_kib=%.3f total_kib=%.3f", r.entries,
                r.entry_bits, r.rit_bits, r.entry_kib, r.total_kib);
  return buf;
}

std::size_t internal_nodes_for_budget(double kib, std::size_t num_pscs,
                                      std::size_t trees_per_forest) {
  if (num_pscs == 0 || trees_per_forest == 0) throw Error("budget: empty model shape");
  if (!(kib > 0.0)) throw Error("budget: size must be positive");
  const auto entries = static_cast<std::size_t>(std::floor(kib * 8192.0 / kEntryBits));
  return std::min(entries, kMaxEntries) / (num_pscs * trees_per_forest);
}

}  // namespace pfm
