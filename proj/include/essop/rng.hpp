#pragma once

#include <cstdint>
#include <utility>

#include "essop/errors.hpp"

namespace essop {

/// 16-bit Fibonacci LFSR with feedback polynomial x^16 + x^15 + x^13 + x^4 + 1
/// (maximal length, period 65535).
///
/// The register shifts right; the feedback bit (XOR of taps 16, 15, 13 and 4,
/// i.e. register bits 0, 1, 3 and 12) enters at bit 15. Each emitted word is
/// the register after 16 single-bit steps, so consecutive words never share
/// register bits.
class Lfsr {
 public:
  static constexpr int kWordBits = 16;
  static constexpr std::uint32_t kPeriod = 65535;
  static constexpr std::uint16_t kDefaultSeed = 0xACE1;

  /// Throws InvalidSeedError for 0, which is a fixed point of the recurrence.
  explicit Lfsr(std::uint16_t seed = kDefaultSeed) : register_(seed) {
    if (seed == 0) throw InvalidSeedError("LFSR seed must be nonzero");
  }

  [[nodiscard]] static Lfsr seed(std::uint16_t value) { return Lfsr(value); }

  /// Advance 16 steps and return the register.
  std::uint16_t next_word() noexcept {
    // Taps sit at bits 0, 1, 3, 12, so four feedback bits can be formed from
    // the current register before any of them is shifted back in.
    std::uint32_t r = register_;
    for (int chunk = 0; chunk < 4; ++chunk) {
      const std::uint32_t feedback = (r ^ (r >> 1) ^ (r >> 3) ^ (r >> 12)) & 0xFu;
      r = (r >> 4) | (feedback << 12);
    }
    register_ = static_cast<std::uint16_t>(r);
    ++draws_;
    return register_;
  }

  [[nodiscard]] std::uint16_t state() const noexcept { return register_; }
  /// Words emitted since seeding.
  [[nodiscard]] std::uint64_t draws() const noexcept { return draws_; }

  friend bool operator==(const Lfsr&, const Lfsr&) = default;

 private:
  std::uint16_t register_;
  std::uint64_t draws_ = 0;
};

/// word / 2^16, exact; always below 1.
[[nodiscard]] constexpr double uniform_fraction(std::uint16_t word) noexcept {
  return static_cast<double>(word) / 65536.0;
}

/// Deterministic per-call seed derivation.
///
/// For call counter c, a side's seed is the first nonzero 16-bit limb of
/// splitmix64((base << 48) XOR c). The hash must be nonlinear: any GF(2)-linear
/// derivation (such as XOR-ing c into the base and whitening through the LFSR)
/// leaves seed_x XOR seed_delta constant across calls, and since the LFSR is
/// linear too, every X-side word would then be a fixed XOR of the matching
/// delta-side word. That correlates the two streams and biases the product.
class SeedSchedule {
 public:
  SeedSchedule(std::uint16_t base_x, std::uint16_t base_delta) : base_x_(base_x), base_delta_(base_delta) {
    if (base_x == 0 || base_delta == 0) throw InvalidSeedError("seed schedule bases must be nonzero");
    if (base_x == base_delta) throw InvalidSeedError("X and delta seed bases must differ");
  }

  [[nodiscard]] static std::uint16_t derive(std::uint16_t base, std::uint64_t counter) noexcept {
    std::uint64_t z = (static_cast<std::uint64_t>(base) << 48) ^ counter;
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    for (int limb = 0; limb < 4; ++limb, z >>= 16) {
      if (const auto w = static_cast<std::uint16_t>(z); w != 0) return w;
    }
    return 1;
  }

  /// (seed_x, seed_delta) for the given call counter.
  [[nodiscard]] std::pair<std::uint16_t, std::uint16_t> seeds(std::uint64_t counter) const {
    std::uint16_t sx = derive(base_x_, counter);
    std::uint16_t sd = derive(base_delta_, counter);
    if (sx == sd) sd = static_cast<std::uint16_t>(sd == 0xFFFF ? 1 : sd + 1);
    return {sx, sd};
  }

  [[nodiscard]] std::uint16_t base_x() const noexcept { return base_x_; }
  [[nodiscard]] std::uint16_t base_delta() const noexcept { return base_delta_; }

 private:
  std::uint16_t base_x_;
  std::uint16_t base_delta_;
};

}  // namespace essop
