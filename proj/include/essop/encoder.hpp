#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "essop/errors.hpp"
#include "essop/numeric.hpp"
#include "essop/rng.hpp"

namespace essop {

/// Longest supported Bernoulli sequence. Counts up to this value pack exactly
/// into a binary16 significand.
inline constexpr int kMaxSequenceLength = 2048;

/// Number of 64-bit words holding an M-bit sequence.
[[nodiscard]] constexpr std::size_t words_for_length(int seq_len) noexcept {
  return (static_cast<std::size_t>(seq_len) + 63) / 64;
}

inline void check_sequence_length(int seq_len) {
  if (seq_len < 1 || seq_len > kMaxSequenceLength) {
    throw ContractError("sequence length must be in [1, " + std::to_string(kMaxSequenceLength) +
                        "], got " + std::to_string(seq_len));
  }
}

/// M Bernoulli events plus a sign bit. Bit k (0-based) is the event drawn
/// against the k-th random word.
class StochasticSequence {
 public:
  explicit StochasticSequence(int seq_len, bool negative = false)
      : words_((check_sequence_length(seq_len), words_for_length(seq_len)), 0), seq_len_(seq_len),
        negative_(negative) {}

  [[nodiscard]] int length() const noexcept { return seq_len_; }
  [[nodiscard]] bool negative() const noexcept { return negative_; }
  void set_negative(bool negative) noexcept { negative_ = negative; }

  [[nodiscard]] bool test(int k) const noexcept { return (words_[k / 64] >> (k % 64)) & 1u; }
  void set(int k) noexcept { words_[k / 64] |= std::uint64_t{1} << (k % 64); }

  [[nodiscard]] int popcount() const noexcept {
    int n = 0;
    for (const auto w : words_) n += std::popcount(w);
    return n;
  }

  [[nodiscard]] std::span<const std::uint64_t> words() const noexcept { return words_; }
  [[nodiscard]] std::span<std::uint64_t> words() noexcept { return words_; }

  /// Bits as a string, event 0 first.
  [[nodiscard]] std::string to_string() const {
    std::string s(static_cast<std::size_t>(seq_len_), '0');
    for (int k = 0; k < seq_len_; ++k) {
      if (test(k)) s[static_cast<std::size_t>(k)] = '1';
    }
    return s;
  }

  friend bool operator==(const StochasticSequence&, const StochasticSequence&) = default;

 private:
  std::vector<std::uint64_t> words_;
  int seq_len_;
  bool negative_;
};

/// Normalization exponent of a vector: the smallest e with max|v_i| <= 2^e.
struct VectorExponent {
  int exponent = 0;
  bool is_zero_vector = true;

  friend bool operator==(const VectorExponent&, const VectorExponent&) = default;
};

[[nodiscard]] inline VectorExponent vector_exponent(std::span<const Binary16> v) {
  Binary16 largest{};
  for (const auto e : v) {
    if (!e.is_finite()) throw DomainError("vector_exponent: non-finite entry");
    // Bit patterns of non-negative binary16 values order like their magnitudes.
    if (e.abs().bits() > largest.bits()) largest = e.abs();
  }
  if (largest.is_zero()) return VectorExponent{0, true};
  return VectorExponent{exponent_ceil(largest.to_double()), false};
}

/// Threshold comparator |x| > word * 2^(E - word_bits), using integer shifts
/// only. |x| is significand * 2^ulp_exponent; the threshold is an unsigned
/// word whose exponent is supplied by the vector's normalization exponent.
[[nodiscard]] inline bool exceeds_threshold(Binary16 magnitude, std::uint32_t word, int threshold_exponent) noexcept {
  const std::uint64_t sig = magnitude.significand();
  if (sig == 0) return false;
  const int shift = magnitude.ulp_exponent() - threshold_exponent;
  if (shift >= 0) {
    if (shift >= 40) return true;  // sig << shift dwarfs any word
    return (sig << shift) > word;
  }
  if (-shift >= 40) return word == 0;
  return sig > (static_cast<std::uint64_t>(word) << -shift);
}

/// Bernoulli parameter |x| / 2^E.
[[nodiscard]] inline double probability_of(Binary16 x, int exponent) {
  if (!x.is_finite()) throw DomainError("probability_of: non-finite operand");
  const double p = std::ldexp(x.abs().to_double(), -exponent);
  if (p > 1.0) throw ContractError("operand magnitude exceeds 2^E");
  return p;
}

namespace detail {

inline void check_operand(Binary16 x, int exponent) {
  if (!x.is_finite()) throw DomainError("encode: non-finite operand");
  if (!x.is_zero() && exponent_ceil(x.abs().to_double()) > exponent) {
    throw ContractError("encode: |x| exceeds 2^E (E = " + std::to_string(exponent) + ")");
  }
}

}  // namespace detail

/// Encode against caller-supplied random words (the reuse path). Event k is
/// |x| > words[k] * 2^(E - word_bits). Zero encodes to all zeros for any words.
inline void encode_into(Binary16 x, int exponent, std::span<const std::uint16_t> words, int word_bits,
                        std::span<std::uint64_t> out) {
  std::fill(out.begin(), out.end(), 0);
  const Binary16 magnitude = x.abs();
  if (magnitude.is_zero()) return;
  const int threshold_exponent = exponent - word_bits;
  for (std::size_t k = 0; k < words.size(); ++k) {
    if (exceeds_threshold(magnitude, words[k], threshold_exponent)) {
      out[k >> 6] |= std::uint64_t{1} << (k & 63);
    }
  }
}

[[nodiscard]] inline StochasticSequence encode_with_words(Binary16 x, int exponent,
                                                          std::span<const std::uint16_t> words,
                                                          int word_bits = Lfsr::kWordBits) {
  detail::check_operand(x, exponent);
  StochasticSequence seq(static_cast<int>(words.size()), x.sign_bit() && !x.is_zero());
  encode_into(x, exponent, words, word_bits, seq.words());
  return seq;
}

/// Draw M words from `rng` and encode x against them.
[[nodiscard]] inline StochasticSequence encode(Binary16 x, int exponent, Lfsr& rng, int seq_len) {
  check_sequence_length(seq_len);
  detail::check_operand(x, exponent);
  std::vector<std::uint16_t> words(static_cast<std::size_t>(seq_len));
  for (auto& w : words) w = rng.next_word();
  return encode_with_words(x, exponent, words);
}

}  // namespace essop
