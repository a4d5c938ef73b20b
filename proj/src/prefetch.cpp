#include "pfm/prefetch.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "pfm/error.hpp"

namespace pfm {
namespace {

constexpr std::uint64_t kStreamWindowLines = 16;
constexpr std::size_t kStreamTrackers = 16;

std::vector<std::uint64_t> parse_args(std::string_view args, std::string_view text) {
  std::vector<std::uint64_t> values;
  while (!args.empty()) {
    const auto comma = args.find(',');
    auto field = args.substr(0, comma);
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
      throw Error("bad prefetcher parameter in '" + std::string(text) + "'");
    }
    values.push_back(v);
    if (comma == std::string_view::npos) break;
    args.remove_prefix(comma + 1);
  }
  return values;
}

}  // namespace

PrefetcherKind parse_prefetcher_kind(std::string_view text) {
  std::string_view name = text;
  std::vector<std::uint64_t> args;
  if (const auto open = text.find('('); open != std::string_view::npos) {
    if (text.back() != ')') throw Error("unbalanced parentheses in '" + std::string(text) + "'");
    name = text.substr(0, open);
    args = parse_args(text.substr(open + 1, text.size() - open - 2), text);
  }
  const auto arg = [&](std::size_t i, std::uint64_t fallback) {
    return i < args.size() ? args[i] : fallback;
  };
  PrefetcherKind kind;
  std::size_t max_args = 0;
  if (name == "none" || name == "no") {
    kind = NoPrefetch{};
  } else if (name == "next_line" || name == "nl") {
    kind = NextLine{};
  } else if (name == "ip_stride") {
    kind = IpStride{static_cast<std::uint32_t>(arg(0, 256)),
                    static_cast<std::uint32_t>(arg(1, 2))};
    max_args = 2;
  } else if (name == "stream") {
    kind = Stream{static_cast<std::uint32_t>(arg(0, 3)),
                  static_cast<std::uint32_t>(arg(1, 4))};
    max_args = 2;
  } else if (name == "region") {
    kind = Region{arg(0, 4096), static_cast<std::uint32_t>(arg(1, 64))};
    max_args = 2;
  } else {
    throw Error("unknown prefetcher '" + std::string(name) + "'");
  }
  if (args.size() > max_args) throw Error("too many parameters in '" + std::string(text) + "'");
  validate(kind);
  return kind;
}

std::string describe(const PrefetcherKind& kind) {
  return std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        std::ostringstream os;
        if constexpr (std::is_same_v<T, NoPrefetch>) {
          os << "none";
        } else if constexpr (std::is_same_v<T, NextLine>) {
          os << "next_line";
        } else if constexpr (std::is_same_v<T, IpStride>) {
          os << "ip_stride(" << k.table_entries << ',' << k.degree << ')';
        } else if constexpr (std::is_same_v<T, Stream>) {
          os << "stream(" << k.detect_len << ',' << k.degree << ')';
        } else {
          os << "region(" << k.region_bytes << ',' << k.table_entries << ')';
        }
        return os.str();
      },
      kind);
}

void validate(const PrefetcherKind& kind) {
  std::visit(
      [](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IpStride>) {
          if (k.degree < 1) throw Error("ip_stride degree must be >= 1");
          if (k.table_entries == 0 || (k.table_entries & (k.table_entries - 1)) != 0) {
            throw Error("ip_stride table entries must be a power of two");
          }
        } else if constexpr (std::is_same_v<T, Stream>) {
          if (k.degree < 1) throw Error("stream degree must be >= 1");
          if (k.detect_len < 2) throw Error("stream detect length must be >= 2");
        } else if constexpr (std::is_same_v<T, Region>) {
          if (k.region_bytes < kLineBytes || k.region_bytes > 64 * kLineBytes ||
              k.region_bytes % kLineBytes != 0) {
            throw Error("region size must be a multiple of 64B up to 4KB");
          }
          if (k.table_entries == 0) throw Error("region table needs at least one entry");
        }
      },
      kind);
}

Prefetcher::Prefetcher(const PrefetcherKind& kind, Level level) : kind_(kind), level_(level) {
  validate(kind_);
  if (const auto* p = std::get_if<IpStride>(&kind_)) stride_table_.resize(p->table_entries);
  if (std::holds_alternative<Stream>(kind_)) streams_.resize(kStreamTrackers);
  if (const auto* p = std::get_if<Region>(&kind_)) regions_.resize(p->table_entries);
}

void Prefetcher::emit(std::uint64_t line, std::vector<PrefetchRequest>& out) const {
  out.push_back({line * kLineBytes, level_});
}

void Prefetcher::observe(const DemandAccess& access, std::vector<PrefetchRequest>& out) {
  ++clock_;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, NextLine>) {
          const std::uint64_t line = line_number(access.address);
          if (line + 1 != 0 && line + 1 <= line_number(~std::uint64_t{0})) emit(line + 1, out);
        } else if constexpr (std::is_same_v<T, IpStride>) {
          observe_ip_stride(k, access, out);
        } else if constexpr (std::is_same_v<T, Stream>) {
          observe_stream(k, access, out);
        } else if constexpr (std::is_same_v<T, Region>) {
          observe_region(k, access, out);
        }
      },
      kind_);
}

void Prefetcher::observe_ip_stride(const IpStride& p, const DemandAccess& a,
                                   std::vector<PrefetchRequest>& out) {
  auto& e = stride_table_[(a.ip >> 2) & (p.table_entries - 1)];
  if (!e.valid || e.ip != a.ip) {
    e = {a.ip, a.address, 0, true};
    return;
  }
  const auto stride = static_cast<std::int64_t>(a.address - e.last_addr);
  if (stride != 0 && stride == e.stride) {
    const std::uint64_t current = line_number(a.address);
    std::uint64_t previous = current;
    std::uint64_t target = a.address;
    for (std::uint32_t k = 1; k <= p.degree; ++k) {
      const std::uint64_t next = target + static_cast<std::uint64_t>(stride);
      // Stop at wrap-around of the address space.
      if ((stride > 0 && next < target) || (stride < 0 && next > target)) break;
      target = next;
      const std::uint64_t line = line_number(target);
      if (line != previous && line != current) emit(line, out);
      previous = line;
    }
  }
  e.stride = stride;
  e.last_addr = a.address;
}

void Prefetcher::observe_stream(const Stream& p, const DemandAccess& a,
                                std::vector<PrefetchRequest>& out) {
  const std::uint64_t line = line_number(a.address);
  StreamTracker* match = nullptr;
  std::uint64_t best_distance = kStreamWindowLines + 1;
  for (auto& t : streams_) {
    if (!t.valid) continue;
    const std::uint64_t d = line > t.last_line ? line - t.last_line : t.last_line - line;
    if (d < best_distance) {
      best_distance = d;
      match = &t;
    }
  }
  if (match == nullptr) {
    auto victim = std::min_element(streams_.begin(), streams_.end(),
                                   [](const StreamTracker& x, const StreamTracker& y) {
                                     if (x.valid != y.valid) return !x.valid;
                                     return x.stamp < y.stamp;
                                   });
    *victim = {line, clock_, 0, 1, true};
    return;
  }
  match->stamp = clock_;
  if (line == match->last_line) return;
  const int direction = line > match->last_line ? 1 : -1;
  if (direction == match->direction) {
    ++match->run;
  } else {
    match->direction = direction;
    match->run = 2;
  }
  match->last_line = line;
  if (match->run < p.detect_len) return;
  const std::uint64_t max_line = line_number(~std::uint64_t{0});
  for (std::uint32_t k = 1; k <= p.degree; ++k) {
    if (direction > 0 && line + k > max_line) break;
    if (direction < 0 && line < k) break;
    emit(direction > 0 ? line + k : line - k, out);
  }
}

void Prefetcher::observe_region(const Region& p, const DemandAccess& a,
                                std::vector<PrefetchRequest>& out) {
  const std::uint64_t region = a.address / p.region_bytes;
  const auto bit = static_cast<unsigned>((a.address % p.region_bytes) / kLineBytes);
  auto it = std::find_if(regions_.begin(), regions_.end(), [&](const RegionEntry& e) {
    return e.valid && e.region == region;
  });
  if (region != current_region_) {
    current_region_ = region;
    if (it != regions_.end()) {
      const std::uint64_t first_line = region * (p.region_bytes / kLineBytes);
      for (unsigned b = 0; b < 64; ++b) {
        if (b != bit && ((it->bitmap >> b) & 1U) != 0) emit(first_line + b, out);
      }
    }
  }
  if (it == regions_.end()) {
    it = std::min_element(regions_.begin(), regions_.end(),
                          [](const RegionEntry& x, const RegionEntry& y) {
                            if (x.valid != y.valid) return !x.valid;
                            return x.stamp < y.stamp;
                          });
    *it = {region, 0, 0, true};
  }
  it->bitmap |= std::uint64_t{1} << bit;
  it->stamp = clock_;
}

RegistrySizes PrefetcherRegistry::sizes() const {
  RegistrySizes s{};
  for (std::size_t l = 0; l < kNumLevels; ++l) s[l] = levels[l].size();
  return s;
}

void PrefetcherRegistry::validate() const {
  for (Level level : kAllLevels) {
    const auto& options = at(level);
    if (options.empty() || !std::holds_alternative<NoPrefetch>(options.front())) {
      throw Error(std::string("registry at ") + std::string(level_name(level)) +
                  ": index 0 must be 'none'");
    }
    if (options.size() > 256) throw Error("too many prefetcher options at one level");
    for (const auto& k : options) pfm::validate(k);
  }
}

PrefetcherRegistry PrefetcherRegistry::standard() {
  PrefetcherRegistry r;
  r.levels[index_of(Level::l1i)] = {NoPrefetch{}, NextLine{}};
  r.levels[index_of(Level::l1d)] = {NoPrefetch{}, NextLine{}, IpStride{}, Stream{}};
  r.levels[index_of(Level::l2)] = {NoPrefetch{}, NextLine{}, IpStride{}, Stream{}, Region{}};
  r.levels[index_of(Level::llc)] = {NoPrefetch{}, NextLine{}};
  return r;
}

PrefetcherRegistry PrefetcherRegistry::wide() {
  PrefetcherRegistry r;
  r.levels[index_of(Level::l1i)] = {NoPrefetch{}, NextLine{}, Stream{3, 4}, Stream{2, 8},
                                    Region{}};
  r.levels[index_of(Level::l1d)] = {NoPrefetch{}, NextLine{}, IpStride{256, 2}, Stream{3, 4},
                                    Region{}};
  r.levels[index_of(Level::l2)] = {NoPrefetch{}, NextLine{}, IpStride{256, 2},
                                   IpStride{256, 4}, Stream{3, 4}, Region{}};
  r.levels[index_of(Level::llc)] = {NoPrefetch{}, NextLine{}};
  return r;
}

std::string psc_label(const Psc& psc, const PrefetcherRegistry& registry) {
  std::string label;
  for (Level level : kAllLevels) {
    if (!label.empty()) label += '/';
    label += describe(registry.at(level).at(psc.at(level)));
  }
  return label;
}

Psc parse_psc_label(std::string_view label, const PrefetcherRegistry& registry) {
  Psc psc;
  std::size_t level = 0;
  while (true) {
    if (level >= kNumLevels) throw Error("too many levels in PSC '" + std::string(label) + "'");
    const auto slash = label.find('/');
    const auto kind = parse_prefetcher_kind(label.substr(0, slash));
    const auto& options = registry.levels[level];
    const auto it = std::find(options.begin(), options.end(), kind);
    if (it == options.end()) {
      throw Error("prefetcher '" + describe(kind) + "' not registered at " +
                  std::string(level_name(static_cast<Level>(level))));
    }
    psc.slot[level++] = static_cast<std::uint8_t>(it - options.begin());
    if (slash == std::string_view::npos) break;
    label.remove_prefix(slash + 1);
  }
  if (level != kNumLevels) throw Error("PSC label needs 4 levels");
  return psc;
}

bool gate(const Psc& psc, Level level, std::size_t prefetcher_id,
          const RegistrySizes& sizes) {
  if (prefetcher_id >= sizes[index_of(level)]) {
    throw Error("unknown prefetcher id " + std::to_string(prefetcher_id) + " at " +
                std::string(level_name(level)));
  }
  return psc.at(level) == prefetcher_id;
}

PrefetcherBank::PrefetcherBank(const PrefetcherRegistry& registry) : registry_(registry) {
  registry_.validate();
  for (Level level : kAllLevels) {
    for (const auto& kind : registry_.at(level)) {
      prefetchers_[index_of(level)].emplace_back(kind, level);
    }
  }
}

void PrefetcherBank::observe(Level level, const DemandAccess& access, const Psc& psc,
                             std::vector<PrefetchRequest>& out) {
  auto& bank = prefetchers_[index_of(level)];
  const std::size_t active = psc.at(level);
  for (std::size_t i = 1; i < bank.size(); ++i) {
    if (i == active) {
      bank[i].observe(access, out);
    } else {
      scratch_.clear();
      bank[i].observe(access, scratch_);
    }
  }
}

}  // namespace pfm
