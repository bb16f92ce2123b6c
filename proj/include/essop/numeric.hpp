#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>

#include "essop/errors.hpp"

namespace essop {

/// IEEE 754 binary16 value held as its raw 16-bit pattern.
///
/// Arithmetic is emulated: operands are decoded to double, the operation is
/// evaluated there (exactly for +, -, *; correctly rounded for /), and the
/// result is re-encoded with round-to-nearest-even. Results therefore do not
/// depend on host half-precision support.
///
/// `operator==` compares bit patterns, so +0 != -0 and NaN == NaN when the
/// payloads agree. Use `to_double()` for numeric comparison.
class Binary16 {
 public:
  static constexpr std::uint16_t kSignMask = 0x8000;
  static constexpr std::uint16_t kExponentMask = 0x7C00;
  static constexpr std::uint16_t kMantissaMask = 0x03FF;
  static constexpr int kMantissaBits = 10;
  static constexpr int kExponentBias = 15;
  static constexpr int kMaxExponentField = 0x1F;
  static constexpr double kMaxFinite = 65504.0;

  constexpr Binary16() noexcept = default;

  [[nodiscard]] static constexpr Binary16 from_bits(std::uint16_t bits) noexcept {
    Binary16 h;
    h.bits_ = bits;
    return h;
  }

  [[nodiscard]] static constexpr Binary16 from_fields(bool negative, unsigned exponent_field,
                                                      unsigned mantissa_field) noexcept {
    return from_bits(static_cast<std::uint16_t>((negative ? kSignMask : 0u) |
                                                ((exponent_field & 0x1Fu) << kMantissaBits) |
                                                (mantissa_field & kMantissaMask)));
  }

  [[nodiscard]] static Binary16 from_double(double v) noexcept;

  [[nodiscard]] constexpr std::uint16_t bits() const noexcept { return bits_; }
  [[nodiscard]] constexpr bool sign_bit() const noexcept { return (bits_ & kSignMask) != 0; }
  [[nodiscard]] constexpr unsigned exponent_field() const noexcept {
    return (bits_ & kExponentMask) >> kMantissaBits;
  }
  [[nodiscard]] constexpr unsigned mantissa_field() const noexcept { return bits_ & kMantissaMask; }

  [[nodiscard]] constexpr bool is_nan() const noexcept {
    return exponent_field() == kMaxExponentField && mantissa_field() != 0;
  }
  [[nodiscard]] constexpr bool is_inf() const noexcept {
    return exponent_field() == kMaxExponentField && mantissa_field() == 0;
  }
  [[nodiscard]] constexpr bool is_finite() const noexcept {
    return exponent_field() != kMaxExponentField;
  }
  [[nodiscard]] constexpr bool is_zero() const noexcept { return (bits_ & ~kSignMask) == 0; }
  [[nodiscard]] constexpr bool is_subnormal() const noexcept {
    return exponent_field() == 0 && mantissa_field() != 0;
  }

  [[nodiscard]] constexpr Binary16 abs() const noexcept {
    return from_bits(static_cast<std::uint16_t>(bits_ & ~kSignMask));
  }
  [[nodiscard]] constexpr Binary16 operator-() const noexcept {
    return from_bits(static_cast<std::uint16_t>(bits_ ^ kSignMask));
  }

  /// Integer significand including the implicit bit (0 for zero).
  [[nodiscard]] constexpr std::uint32_t significand() const noexcept {
    return exponent_field() == 0 ? mantissa_field() : (mantissa_field() | 0x400u);
  }
  /// Exponent of the significand's unit in the last place: |v| = significand * 2^ulp_exponent.
  [[nodiscard]] constexpr int ulp_exponent() const noexcept {
    const int field = static_cast<int>(exponent_field());
    return (field == 0 ? 1 : field) - kExponentBias - kMantissaBits;
  }

  [[nodiscard]] double to_double() const noexcept {
    if (is_nan()) return std::numeric_limits<double>::quiet_NaN();
    const double magnitude = is_inf() ? std::numeric_limits<double>::infinity()
                                      : std::ldexp(static_cast<double>(significand()), ulp_exponent());
    return sign_bit() ? -magnitude : magnitude;
  }

  friend constexpr bool operator==(Binary16, Binary16) noexcept = default;

 private:
  std::uint16_t bits_ = 0;
};

namespace detail {

// Round a non-negative double to the nearest integer, ties to even. Independent
// of the floating-point environment's current rounding mode.
[[nodiscard]] inline double round_half_even(double y) noexcept {
  const double lower = std::floor(y);
  const double frac = y - lower;
  if (frac > 0.5) return lower + 1.0;
  if (frac < 0.5) return lower;
  return std::fmod(lower, 2.0) == 0.0 ? lower : lower + 1.0;
}

}  // namespace detail

/// Nearest binary16 under round-to-nearest-even. Subnormals are produced
/// (gradual underflow), magnitudes past the rounding boundary of 65504 become
/// signed infinity, -0 is preserved and NaN stays NaN.
[[nodiscard]] inline Binary16 quantize_to_binary16(double v) noexcept {
  const bool negative = std::signbit(v);
  if (std::isnan(v)) return Binary16::from_bits(negative ? 0xFE00 : 0x7E00);
  const double a = std::fabs(v);
  if (std::isinf(a)) return Binary16::from_fields(negative, 0x1F, 0);

  if (a < 0x1p-14) {
    // Subnormal units of 2^-24; a rounded value of 1024 lands on the smallest normal.
    const auto units = static_cast<unsigned>(detail::round_half_even(std::ldexp(a, 24)));
    return Binary16::from_bits(static_cast<std::uint16_t>((negative ? Binary16::kSignMask : 0u) | units));
  }

  int k = 0;
  (void)std::frexp(a, &k);
  int exponent = k - 1;
  auto significand = static_cast<unsigned>(detail::round_half_even(std::ldexp(a, Binary16::kMantissaBits - exponent)));
  if (significand == 2048) {
    significand = 1024;
    ++exponent;
  }
  if (exponent > 15) return Binary16::from_fields(negative, 0x1F, 0);
  return Binary16::from_fields(negative, static_cast<unsigned>(exponent + Binary16::kExponentBias),
                               significand - 1024);
}

inline Binary16 Binary16::from_double(double v) noexcept { return quantize_to_binary16(v); }

[[nodiscard]] inline Binary16 operator+(Binary16 a, Binary16 b) noexcept {
  return quantize_to_binary16(a.to_double() + b.to_double());
}
[[nodiscard]] inline Binary16 operator-(Binary16 a, Binary16 b) noexcept {
  return quantize_to_binary16(a.to_double() - b.to_double());
}
[[nodiscard]] inline Binary16 operator*(Binary16 a, Binary16 b) noexcept {
  return quantize_to_binary16(a.to_double() * b.to_double());
}
[[nodiscard]] inline Binary16 operator/(Binary16 a, Binary16 b) noexcept {
  return quantize_to_binary16(a.to_double() / b.to_double());
}

/// Exactly 2^exponent.
struct PowerOfTwoScale {
  int exponent = 0;

  [[nodiscard]] double value() const noexcept { return std::ldexp(1.0, exponent); }
  friend constexpr auto operator<=>(PowerOfTwoScale, PowerOfTwoScale) = default;
};

/// v * 2^e. Normal-to-normal results only touch the exponent field; results
/// that leave the normal range are computed exactly and re-quantized, so they
/// underflow gradually or overflow to infinity.
[[nodiscard]] inline Binary16 multiply(Binary16 v, PowerOfTwoScale scale) noexcept {
  if (v.is_zero() || !v.is_finite()) return v;
  if (v.exponent_field() != 0) {
    const long field = static_cast<long>(v.exponent_field()) + scale.exponent;
    if (field >= 1 && field <= 30) {
      return Binary16::from_fields(v.sign_bit(), static_cast<unsigned>(field), v.mantissa_field());
    }
  }
  return quantize_to_binary16(std::ldexp(v.to_double(), scale.exponent));
}

namespace detail {

inline void require_positive_finite(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(what) + ": expected a positive finite value");
  }
}

}  // namespace detail

/// Smallest e with v <= 2^e.
[[nodiscard]] inline int exponent_ceil(double v) {
  detail::require_positive_finite(v, "exponent_ceil");
  int k = 0;
  const double f = std::frexp(v, &k);
  return f == 0.5 ? k - 1 : k;
}

/// Largest power of two not above v.
[[nodiscard]] inline PowerOfTwoScale floor_pow2(double v) {
  detail::require_positive_finite(v, "floor_pow2");
  int k = 0;
  (void)std::frexp(v, &k);
  return PowerOfTwoScale{k - 1};
}

}  // namespace essop
