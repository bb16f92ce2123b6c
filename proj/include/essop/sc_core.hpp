#pragma once

#include <bit>
#include <cstdint>
#include <span>

#include "essop/encoder.hpp"
#include "essop/errors.hpp"
#include "essop/numeric.hpp"

namespace essop {

/// Power-of-two replacement for x_max * delta_max / M with x_max = 2^E_X and
/// delta_max = 2^E_delta: 2^(E_X + E_delta - ceil(log2 M)). Exact when M is a
/// power of two.
[[nodiscard]] inline PowerOfTwoScale f_scale(int exponent_x, int exponent_delta, int seq_len) {
  if (seq_len < 1) throw ContractError("f_scale: sequence length must be positive");
  const int ceil_log2_m = static_cast<int>(std::bit_width(static_cast<unsigned>(seq_len - 1)));
  return PowerOfTwoScale{exponent_x + exponent_delta - ceil_log2_m};
}

/// Same as f_scale with the learning rate folded in: floor_pow2(lr * 2^(E_X + E_delta) / M).
[[nodiscard]] inline PowerOfTwoScale f_scale_with_lr(int exponent_x, int exponent_delta, int seq_len, double lr) {
  if (seq_len < 1) throw ContractError("f_scale_with_lr: sequence length must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw DomainError("f_scale_with_lr: learning rate must be positive");
  return PowerOfTwoScale{floor_pow2(lr / seq_len).exponent + exponent_x + exponent_delta};
}

/// Width in bits of the ones-counter for an M-bit sequence.
[[nodiscard]] constexpr int counter_width(int seq_len) noexcept {
  return static_cast<int>(std::bit_width(static_cast<unsigned>(seq_len)));
}

enum class PackStatus : std::uint8_t {
  kExact,
  kUnderflowRounded,  // result fell into the subnormal range and lost bits
  kSaturated,         // exponent overflow, clamped to the largest finite value
};

struct PackedValue {
  Binary16 value;
  PackStatus status = PackStatus::kExact;
};

/// Shift logic: sign from the XOR, count into the significand (normalized so
/// its leading one becomes the implicit bit), scale exponent added to the
/// exponent field. Zero counts give +0.
[[nodiscard]] inline PackedValue shift_pack(bool negative, int count, PowerOfTwoScale scale) {
  if (count < 0 || count > kMaxSequenceLength) throw ContractError("shift_pack: count out of range");
  if (count == 0) return {Binary16{}, PackStatus::kExact};

  const auto c = static_cast<std::uint32_t>(count);
  const int msb = static_cast<int>(std::bit_width(c)) - 1;
  const long biased = static_cast<long>(msb) + scale.exponent + Binary16::kExponentBias;

  if (biased >= Binary16::kMaxExponentField) {
    return {Binary16::from_fields(negative, 30, Binary16::kMantissaMask), PackStatus::kSaturated};
  }
  if (biased >= 1) {
    // count <= 2048 so at most one bit (always zero for 2048) drops off the right.
    const std::uint32_t aligned = msb <= Binary16::kMantissaBits ? c << (Binary16::kMantissaBits - msb)
                                                                  : c >> (msb - Binary16::kMantissaBits);
    return {Binary16::from_fields(negative, static_cast<unsigned>(biased), aligned & Binary16::kMantissaMask),
            PackStatus::kExact};
  }

  // Subnormal: express in units of 2^-24, rounding to nearest even on the shift.
  const long shift = static_cast<long>(scale.exponent) + 24;
  if (shift >= 0) {
    return {Binary16::from_bits(static_cast<std::uint16_t>((negative ? Binary16::kSignMask : 0u) | (c << shift))),
            PackStatus::kExact};
  }
  const long right = -shift;
  std::uint32_t units = 0;
  bool inexact = true;
  if (right < 32) {
    units = c >> right;
    const std::uint32_t remainder = c & ((std::uint32_t{1} << right) - 1);
    const std::uint32_t half = std::uint32_t{1} << (right - 1);
    inexact = remainder != 0;
    if (remainder > half || (remainder == half && (units & 1u))) ++units;
  }
  return {Binary16::from_bits(static_cast<std::uint16_t>((negative ? Binary16::kSignMask : 0u) | units)),
          inexact ? PackStatus::kUnderflowRounded : PackStatus::kExact};
}

struct UnitCellResult {
  int count = 0;
  bool negative = false;
  Binary16 value;
  PackStatus status = PackStatus::kExact;
};

/// popcount(a AND b) over equally long word spans.
[[nodiscard]] inline int and_popcount(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) noexcept {
  int n = 0;
  for (std::size_t w = 0; w < a.size(); ++w) n += std::popcount(a[w] & b[w]);
  return n;
}

/// One stochastic multiply: M cycles of AND into a ones-counter, sign XOR,
/// then shift logic.
[[nodiscard]] inline UnitCellResult unit_cell_multiply(const StochasticSequence& a, const StochasticSequence& b,
                                                       PowerOfTwoScale scale) {
  if (a.length() != b.length()) throw ContractError("unit_cell_multiply: sequence lengths differ");
  UnitCellResult r;
  r.count = and_popcount(a.words(), b.words());
  r.negative = a.negative() != b.negative();
  const auto packed = shift_pack(r.negative, r.count, scale);
  r.value = packed.value;
  r.status = packed.status;
  return r;
}

}  // namespace essop
