#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "essop/engine.hpp"
#include "essop/errors.hpp"
#include "essop/numeric.hpp"

// Binary layouts (all integers little-endian):
//   vector: "ESOV" | u32 version=1 | u32 count              | count x u16 binary16
//   matrix: "ESOM" | u32 version=1 | u32 rows | u32 cols    | rows*cols x u16, row-major
// CSV alternatives hold decimal literals: one vector element per line, one
// matrix row per line with comma-separated columns. Lines starting with '#'
// and blank lines are ignored on read.

namespace essop::io {

inline constexpr std::uint32_t kFormatVersion = 1;

enum class Format { kBinary, kCsv };

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += 4;
    return v;
  }

  std::uint16_t u16() {
    need(2);
    const auto lo = static_cast<unsigned char>(bytes_[pos_]);
    const auto hi = static_cast<unsigned char>(bytes_[pos_ + 1]);
    pos_ += 2;
    return static_cast<std::uint16_t>(lo | (hi << 8));
  }

  void expect_magic(std::string_view magic) {
    need(magic.size());
    if (bytes_.substr(pos_, magic.size()) != magic) throw IoError("bad magic, expected " + std::string(magic));
    pos_ += magic.size();
  }

  [[nodiscard]] std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("truncated file");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// Shortest decimal that reads back to the same binary16 bits.
[[nodiscard]] inline std::string format_value(Binary16 v) {
  if (v.is_nan()) return "nan";
  if (v.is_inf()) return v.sign_bit() ? "-inf" : "inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v.to_double());
  return std::string(buf.data(), res.ptr);
}

[[nodiscard]] inline Binary16 parse_value(std::string_view text) {
  const std::string s = detail::trim(text);
  if (s == "nan" || s == "NaN") return Binary16::from_bits(0x7E00);
  if (s == "inf" || s == "+inf") return Binary16::from_bits(0x7C00);
  if (s == "-inf") return Binary16::from_bits(0xFC00);
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw IoError("cannot parse number '" + s + "'");
  }
  return quantize_to_binary16(v);
}

[[nodiscard]] inline std::string encode_vector(std::span<const Binary16> v, Format format) {
  std::string out;
  if (format == Format::kBinary) {
    out = "ESOV";
    detail::put_u32(out, kFormatVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(v.size()));
    for (const auto e : v) detail::put_u16(out, e.bits());
  } else {
    for (const auto e : v) out += format_value(e) + "\n";
  }
  return out;
}

[[nodiscard]] inline std::string encode_matrix(const HalfMatrix& m, Format format) {
  std::string out;
  if (format == Format::kBinary) {
    out = "ESOM";
    detail::put_u32(out, kFormatVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(m.rows));
    detail::put_u32(out, static_cast<std::uint32_t>(m.cols));
    for (const auto e : m.data) detail::put_u16(out, e.bits());
  } else {
    for (std::size_t r = 0; r < m.rows; ++r) {
      for (std::size_t c = 0; c < m.cols; ++c) {
        if (c) out += ',';
        out += format_value(m.at(r, c));
      }
      out += '\n';
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::vector<Binary16>> parse_csv_rows(std::string_view text) {
  std::vector<std::vector<Binary16>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<Binary16> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = t.find(',', start);
      row.push_back(parse_value(std::string_view(t).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// Reads either layout; binary is recognized by its magic.
[[nodiscard]] inline std::vector<Binary16> decode_vector(std::string_view bytes) {
  if (bytes.substr(0, 4) == "ESOV") {
    detail::Reader r(bytes);
    r.expect_magic("ESOV");
    if (r.u32() != kFormatVersion) throw IoError("unsupported vector format version");
    const std::uint32_t count = r.u32();
    if (r.remaining() != 2ull * count) throw IoError("vector payload length does not match count");
    std::vector<Binary16> v(count);
    for (auto& e : v) e = Binary16::from_bits(r.u16());
    return v;
  }
  std::vector<Binary16> v;
  for (const auto& row : detail::parse_csv_rows(bytes)) v.insert(v.end(), row.begin(), row.end());
  return v;
}

[[nodiscard]] inline HalfMatrix decode_matrix(std::string_view bytes) {
  if (bytes.substr(0, 4) == "ESOM") {
    detail::Reader r(bytes);
    r.expect_magic("ESOM");
    if (r.u32() != kFormatVersion) throw IoError("unsupported matrix format version");
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (r.remaining() != 2ull * rows * cols) throw IoError("matrix payload length does not match shape");
    HalfMatrix m(rows, cols);
    for (auto& e : m.data) e = Binary16::from_bits(r.u16());
    return m;
  }
  const auto rows = detail::parse_csv_rows(bytes);
  HalfMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols) throw IoError("ragged CSV matrix at row " + std::to_string(r));
    std::copy(rows[r].begin(), rows[r].end(), m.data.begin() + static_cast<std::ptrdiff_t>(r * m.cols));
  }
  return m;
}

[[nodiscard]] inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace essop::io
