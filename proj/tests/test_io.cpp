#include "essop/io.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

using essop::Binary16;
using essop::HalfMatrix;
namespace io = essop::io;

namespace {

std::vector<Binary16> random_halves(std::mt19937_64& gen, std::size_t n) {
  std::vector<Binary16> v(n);
  // Every finite pattern, both signs.
  for (auto& e : v) {
    auto b = static_cast<std::uint16_t>(gen());
    if ((b & 0x7C00) == 0x7C00) b &= 0xBFFF;
    e = Binary16::from_bits(b);
  }
  return v;
}

}  // namespace

TEST(Io, VectorRoundTripsInBothFormats) {
  std::mt19937_64 gen(4);
  for (int n = 0; n < 200; ++n) {
    const auto v = random_halves(gen, gen() % 40);
    for (const auto fmt : {io::Format::kBinary, io::Format::kCsv}) {
      ASSERT_EQ(io::decode_vector(io::encode_vector(v, fmt)), v);
    }
  }
}

TEST(Io, MatrixRoundTripsInBothFormats) {
  std::mt19937_64 gen(5);
  for (int n = 0; n < 100; ++n) {
    HalfMatrix m(1 + gen() % 6, 1 + gen() % 6);
    m.data = random_halves(gen, m.rows * m.cols);
    for (const auto fmt : {io::Format::kBinary, io::Format::kCsv}) {
      const auto back = io::decode_matrix(io::encode_matrix(m, fmt));
      ASSERT_EQ(back.rows, m.rows);
      ASSERT_EQ(back.cols, m.cols);
      ASSERT_EQ(back.data, m.data);
    }
  }
}

TEST(Io, BinaryLayout) {
  const std::vector<Binary16> v{essop::quantize_to_binary16(1.0), essop::quantize_to_binary16(-2.0)};
  const std::string bytes = io::encode_vector(v, io::Format::kBinary);
  const std::string expected("ESOV\x01\x00\x00\x00\x02\x00\x00\x00\x00\x3C\x00\xC0", 16);
  EXPECT_EQ(bytes, expected);
}

TEST(Io, CsvText) {
  HalfMatrix m(2, 2);
  m.data = {essop::quantize_to_binary16(0.5), essop::quantize_to_binary16(-1.0), Binary16{},
            essop::quantize_to_binary16(0.1)};
  EXPECT_EQ(io::encode_matrix(m, io::Format::kCsv), "0.5,-1\n0,0.0999755859375\n");
  const auto parsed = io::decode_matrix("# header\n1, 2\n\n3,4\n");
  EXPECT_EQ(parsed.rows, 2u);
  EXPECT_EQ(parsed.at(1, 0).to_double(), 3.0);
}

TEST(Io, SpecialValues) {
  EXPECT_TRUE(io::parse_value("nan").is_nan());
  EXPECT_EQ(io::parse_value("-inf").bits(), 0xFC00);
  EXPECT_EQ(io::parse_value("1e9").bits(), 0x7C00);
  EXPECT_EQ(io::format_value(Binary16::from_bits(0x7C00)), "inf");
}

TEST(Io, MalformedInputs) {
  EXPECT_THROW((void)io::decode_vector(std::string("ESOV\x01\x00\x00\x00\x03\x00\x00\x00\x00\x3C", 14)),
               essop::IoError);
  EXPECT_THROW((void)io::decode_vector(std::string("ESOV\x01\x00", 6)), essop::IoError);
  EXPECT_THROW((void)io::decode_vector(std::string("ESOV\x02\x00\x00\x00\x00\x00\x00\x00", 12)), essop::IoError);
  EXPECT_THROW((void)io::decode_matrix(std::string("ESOM\x01\x00\x00\x00\x01\x00\x00\x00\x02\x00\x00\x00\x00\x3C", 18)),
               essop::IoError);
  EXPECT_THROW((void)io::decode_matrix("1,2\n3\n"), essop::IoError);
  EXPECT_THROW((void)io::decode_vector("0.5\nabc\n"), essop::IoError);
}

TEST(Io, Files) {
  const auto path = (std::filesystem::temp_directory_path() / "essop_io_test.bin").string();
  io::write_file(path, "abc");
  EXPECT_EQ(io::read_file(path), "abc");
  std::remove(path.c_str());
  EXPECT_THROW((void)io::read_file("/nonexistent/dir/file"), essop::IoError);
}
