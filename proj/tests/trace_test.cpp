#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "pfm/error.hpp"
#include "pfm/trace.hpp"

namespace pfm {
namespace {

std::string record_bytes(std::uint64_t ip, std::uint64_t addr, std::uint8_t kind) {
  std::string s;
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>(ip >> (8 * i)));
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>(addr >> (8 * i)));
  s.push_back(static_cast<char>(kind));
  return s;
}

Trace random_trace(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  Trace t;
  for (std::size_t i = 0; i < n; ++i) {
    TraceRecord r;
    r.ip = g() | 1;
    r.kind = static_cast<Kind>(g() % kNumKinds);
    r.data_addr = is_memory(r.kind) ? g() : 0;
    t.push_back(r);
  }
  return t;
}

TEST(TraceParse, DecodesSingleBinaryRecord) {
  const auto t = parse_trace(record_bytes(0x400000, 0, 3), TraceFormat::binary);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].ip, 0x400000u);
  EXPECT_EQ(t[0].kind, Kind::branch_return);
  EXPECT_EQ(t[0].data_addr, 0u);
}

TEST(TraceParse, FieldsAreLittleEndian) {
  const auto t = parse_trace(record_bytes(0x0102030405060708, 0x1122334455667788, 0),
                             TraceFormat::binary);
  EXPECT_EQ(t[0].ip, 0x0102030405060708u);
  EXPECT_EQ(t[0].data_addr, 0x1122334455667788u);
  EXPECT_EQ(static_cast<unsigned char>(record_bytes(0x0102030405060708, 0, 0)[0]), 0x08);
}

TEST(TraceParse, EmptyStreamIsEmptyTrace) {
  EXPECT_TRUE(parse_trace("", TraceFormat::binary).empty());
  EXPECT_TRUE(parse_trace("ip,kind,data_addr\n", TraceFormat::csv).empty());
}

TEST(TraceParse, BinaryRoundTripOfRandomRecords) {
  const auto t = random_trace(1000, 42);
  const auto bytes = serialize_trace(t, TraceFormat::binary);
  EXPECT_EQ(bytes.size(), 1000 * kBinaryRecordBytes);
  EXPECT_EQ(parse_trace(bytes, TraceFormat::binary), t);
}

TEST(TraceParse, CsvRoundTripOfRandomRecords) {
  const auto t = random_trace(500, 7);
  EXPECT_EQ(parse_trace(serialize_trace(t, TraceFormat::csv), TraceFormat::csv), t);
}

TEST(TraceParse, CsvAcceptsKindCodesAndNames) {
  const auto t = parse_trace("ip,kind,data_addr\n0x10,0,0x40\n20,store,ff\n", TraceFormat::csv);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].kind, Kind::load);
  EXPECT_EQ(t[0].data_addr, 0x40u);
  EXPECT_EQ(t[1].ip, 0x20u);
  EXPECT_EQ(t[1].data_addr, 0xffu);
}

TEST(TraceParse, TruncatedBinaryNamesRecord) {
  auto bytes = record_bytes(0x10, 0, 5) + record_bytes(0x14, 0, 5);
  bytes.pop_back();
  try {
    parse_trace(bytes, TraceFormat::binary);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.record_index(), 1u);
  }
}

TEST(TraceParse, UnknownKindCodeRejected) {
  const auto bytes = record_bytes(0x10, 0, 5) + record_bytes(0x14, 0, 6);
  try {
    parse_trace(bytes, TraceFormat::binary);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.record_index(), 1u);
  }
}

TEST(TraceParse, NonHexCsvFieldRejected) {
  try {
    parse_trace("ip,kind,data_addr\n0x10,load,0x40\n0x14,load,0xZZ\n", TraceFormat::csv);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.record_index(), 1u);
  }
}

TEST(TraceParse, InvariantsEnforced) {
  EXPECT_THROW(parse_trace(record_bytes(0, 0, 5), TraceFormat::binary), ParseError);
  EXPECT_THROW(parse_trace(record_bytes(0x10, 0x40, 2), TraceFormat::binary), ParseError);
  EXPECT_THROW(parse_trace("ip,kind\n", TraceFormat::csv), ParseError);
}

TEST(TraceFile, ExtensionSelectsFormat) {
  const auto dir = std::filesystem::temp_directory_path() / "pfm_trace_test";
  std::filesystem::create_directories(dir);
  const auto t = random_trace(64, 3);
  for (const char* name : {"t.bin", "t.csv"}) {
    write_trace_file(dir / name, t);
    EXPECT_EQ(read_trace_file(dir / name), t);
  }
  EXPECT_EQ(std::filesystem::file_size(dir / "t.bin"), 64 * kBinaryRecordBytes);
  std::filesystem::remove_all(dir);
}

TEST(SliceWindows, ShortTail) {
  const auto w = slice_windows(250000, 100000);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0].size(), 100000u);
  EXPECT_EQ(w[1].size(), 100000u);
  EXPECT_EQ(w[2].size(), 50000u);
}

TEST(SliceWindows, SingleShortWindow) {
  const auto w = slice_windows(100, 100000);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0], (WindowRange{0, 100}));
}

TEST(SliceWindows, ConcatenationIsExhaustive) {
  const auto w = slice_windows(1000000, 100000);
  ASSERT_EQ(w.size(), 10u);
  std::size_t next = 0;
  for (const auto& r : w) {
    EXPECT_EQ(r.begin, next);
    EXPECT_EQ(r.size(), 100000u);
    next = r.end;
  }
  EXPECT_EQ(next, 1000000u);
}

TEST(SliceWindows, EmptyAndZeroWindow) {
  EXPECT_TRUE(slice_windows(0, 10).empty());
  EXPECT_THROW(slice_windows(10, 0), Error);
}

}  // namespace
}  // namespace pfm
