#include "pfm/trace.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "pfm/error.hpp"
#include "text.hpp"

namespace pfm {
namespace {

constexpr std::array<std::string_view, kNumKinds> kKindNames = {
    "load", "store", "branch-conditional", "branch-return", "branch-other",
    "other"};

std::uint64_t read_le64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | static_cast<unsigned char>(p[i]);
  }
  return v;
}

void append_le64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

void check_record(const TraceRecord& r, std::size_t index) {
  if (r.ip == 0) throw ParseError(index, "instruction address is zero");
  if (!is_memory(r.kind) && r.data_addr != 0) {
    throw ParseError(index, "data address set on a non-memory record");
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::uint64_t parse_hex(std::string_view field, std::size_t index,
                        const char* what) {
  field = trim(field);
  if (field.starts_with("0x") || field.starts_with("0X")) field.remove_prefix(2);
  std::uint64_t v = 0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), v, 16);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError(index, std::string("non-hex ") + what + " field '" +
                                std::string(field) + "'");
  }
  return v;
}

Kind parse_kind_field(std::string_view field, std::size_t index) {
  field = trim(field);
  if (auto k = kind_from_name(field)) return *k;
  unsigned code = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), code);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() ||
      code >= kNumKinds) {
    throw ParseError(index, "unknown kind '" + std::string(field) + "'");
  }
  return static_cast<Kind>(code);
}

Trace parse_binary(std::string_view bytes) {
  if (bytes.size() % kBinaryRecordBytes != 0) {
    throw ParseError(bytes.size() / kBinaryRecordBytes,
                     "malformed record length (" +
                         std::to_string(bytes.size() % kBinaryRecordBytes) +
                         " trailing bytes)");
  }
  Trace trace;
  trace.reserve(bytes.size() / kBinaryRecordBytes);
  for (std::size_t off = 0, i = 0; off < bytes.size();
       off += kBinaryRecordBytes, ++i) {
    const char* p = bytes.data() + off;
    const auto code = static_cast<unsigned char>(p[16]);
    if (code >= kNumKinds) {
      throw ParseError(i, "unknown kind code " + std::to_string(code));
    }
    TraceRecord r{read_le64(p), static_cast<Kind>(code), read_le64(p + 8)};
    check_record(r, i);
    trace.push_back(r);
  }
  return trace;
}

Trace parse_csv(std::string_view text) {
  Trace trace;
  std::size_t line_no = 0;
  std::size_t index = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    line = trim(line);
    if (line.empty()) continue;
    if (line_no++ == 0) {
      if (line != "ip,kind,data_addr") {
        throw ParseError(0, "missing CSV header 'ip,kind,data_addr'");
      }
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos ||
        line.find(',', c2 + 1) != std::string_view::npos) {
      throw ParseError(index, "expected 3 fields");
    }
    TraceRecord r{parse_hex(line.substr(0, c1), index, "ip"),
                  parse_kind_field(line.substr(c1 + 1, c2 - c1 - 1), index),
                  parse_hex(line.substr(c2 + 1), index, "data_addr")};
    check_record(r, index);
    trace.push_back(r);
    ++index;
  }
  return trace;
}

}  // namespace

std::string_view kind_name(Kind k) {
  return kKindNames[static_cast<std::size_t>(k)];
}

std::optional<Kind> kind_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<Kind>(i);
  }
  return std::nullopt;
}

Trace parse_trace(std::string_view bytes, TraceFormat format) {
  return format == TraceFormat::binary ? parse_binary(bytes) : parse_csv(bytes);
}

std::string serialize_trace(const Trace& trace, TraceFormat format) {
  std::string out;
  if (format == TraceFormat::binary) {
    out.reserve(trace.size() * kBinaryRecordBytes);
    for (const auto& r : trace) {
      append_le64(out, r.ip);
      append_le64(out, r.data_addr);
      out.push_back(static_cast<char>(r.kind));
    }
    return out;
  }
  std::ostringstream os;
  os << "ip,kind,data_addr\n" << std::hex;
  for (const auto& r : trace) {
    os << "0x" << r.ip << ',' << kind_name(r.kind) << ",0x" << r.data_addr
       << '\n';
  }
  return os.str();
}

TraceFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? TraceFormat::csv : TraceFormat::binary;
}

Trace read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open trace file " + path.string());
  std::string bytes{std::istreambuf_iterator<char>(in),
                    std::istreambuf_iterator<char>()};
  return parse_trace(bytes, format_for_path(path));
}

void write_trace_file(const std::filesystem::path& path, const Trace& trace) {
  text::write_file(path, serialize_trace(trace, format_for_path(path)));
}

std::vector<WindowRange> slice_windows(std::size_t record_count,
                                       std::size_t window_size) {
  if (window_size == 0) throw Error("window size must be at least 1");
  std::vector<WindowRange> windows;
  windows.reserve(record_count / window_size + 1);
  for (std::size_t b = 0; b < record_count; b += window_size) {
    windows.push_back({b, std::min(record_count, b + window_size)});
  }
  return windows;
}

}  // namespace pfm
