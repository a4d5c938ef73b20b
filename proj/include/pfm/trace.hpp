#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pfm {

// Record kinds; the numeric value is the on-disk kind code.
enum class Kind : std::uint8_t {
  load = 0,
  store = 1,
  branch_conditional = 2,
  branch_return = 3,
  branch_other = 4,
  other = 5,
};

inline constexpr std::uint8_t kNumKinds = 6;

constexpr bool is_memory(Kind k) { return k == Kind::load || k == Kind::store; }
constexpr bool is_branch(Kind k) {
  return k == Kind::branch_conditional || k == Kind::branch_return ||
         k == Kind::branch_other;
}

std::string_view kind_name(Kind k);
std::optional<Kind> kind_from_name(std::string_view name);

// One retired instruction.
struct TraceRecord {
  std::uint64_t ip = 0;
  Kind kind = Kind::other;
  std::uint64_t data_addr = 0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

using Trace = std::vector<TraceRecord>;

enum class TraceFormat { binary, csv };

// Binary records are 17 bytes: u64 ip (LE), u64 data_addr (LE), u8 kind.
inline constexpr std::size_t kBinaryRecordBytes = 17;

// Throws ParseError naming the offending record.
Trace parse_trace(std::string_view bytes, TraceFormat format);
std::string serialize_trace(const Trace& trace, TraceFormat format);

// Format is chosen by extension: ".csv" is CSV, anything else binary.
TraceFormat format_for_path(const std::filesystem::path& path);
Trace read_trace_file(const std::filesystem::path& path);
void write_trace_file(const std::filesystem::path& path, const Trace& trace);

// Half-open record range [begin, end).
struct WindowRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const WindowRange&, const WindowRange&) = default;
};

// Partitions [0, record_count) into consecutive windows of window_size; the
// last window may be shorter.
std::vector<WindowRange> slice_windows(std::size_t record_count,
                                       std::size_t window_size);

}  // namespace pfm
