#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "essop/encoder.hpp"
#include "essop/errors.hpp"
#include "essop/numeric.hpp"
#include "essop/rng.hpp"
#include "essop/sc_core.hpp"

namespace essop {

/// Dense row-major binary16 matrix.
struct HalfMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Binary16> data;

  HalfMatrix() = default;
  HalfMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

  [[nodiscard]] Binary16& at(std::size_t row, std::size_t col) { return data[row * cols + col]; }
  [[nodiscard]] Binary16 at(std::size_t row, std::size_t col) const { return data[row * cols + col]; }
  [[nodiscard]] std::span<const Binary16> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const HalfMatrix&, const HalfMatrix&) = default;
};

/// Parameters shared by every outer product of a job.
struct OuterProductParams {
  int seq_len = 16;
  std::uint16_t seed_x = 0xACE1;
  std::uint16_t seed_delta = 0x1234;
  std::optional<double> lr;  // folded into the power-of-two scale when set
};

/// One (X, delta) pair: the unit of engine work.
struct OuterProductJob {
  std::vector<Binary16> x;
  std::vector<Binary16> delta;
  OuterProductParams params;
};

/// Stochastic estimate of delta * x^T (rows index delta, columns index x).
struct UpdateMatrix {
  HalfMatrix values;
  std::uint64_t rng_draws = 0;
  VectorExponent exponent_x;
  VectorExponent exponent_delta;
  PowerOfTwoScale scale;

  [[nodiscard]] Binary16 at(std::size_t row, std::size_t col) const { return values.at(row, col); }
  [[nodiscard]] std::size_t rows() const noexcept { return values.rows; }
  [[nodiscard]] std::size_t cols() const noexcept { return values.cols; }
};

/// Bernoulli sequences of a whole vector, encoded against one shared set of
/// random words. Sequence i occupies words [i * stride, (i + 1) * stride).
class EncodedVector {
 public:
  EncodedVector(std::span<const Binary16> v, int exponent, std::span<const std::uint16_t> words)
      : stride_(words_for_length(static_cast<int>(words.size()))), bits_(v.size() * stride_), negative_(v.size()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      encode_into(v[i], exponent, words, Lfsr::kWordBits, {bits_.data() + i * stride_, stride_});
      negative_[i] = v[i].sign_bit() && !v[i].is_zero();
    }
  }

  [[nodiscard]] std::span<const std::uint64_t> bits(std::size_t i) const { return {bits_.data() + i * stride_, stride_}; }
  [[nodiscard]] bool negative(std::size_t i) const { return negative_[i] != 0; }

 private:
  std::size_t stride_;
  std::vector<std::uint64_t> bits_;
  std::vector<std::uint8_t> negative_;
};

namespace detail {

inline std::vector<std::uint16_t> draw_words(Lfsr& rng, int count) {
  std::vector<std::uint16_t> words(static_cast<std::size_t>(count));
  for (auto& w : words) w = rng.next_word();
  return words;
}

inline void check_seeds(std::uint16_t seed_x, std::uint16_t seed_delta) {
  if (seed_x == 0 || seed_delta == 0) throw InvalidSeedError("outer_product: seeds must be nonzero");
  if (seed_x == seed_delta) throw InvalidSeedError("outer_product: X and delta seeds must differ");
}

}  // namespace detail

/// Stochastic outer product with two LFSRs and 2M random words in total.
///
/// Each side is normalized by its own power-of-two exponent, the M words of
/// that side's LFSR are reused for every element, and cell (j, i) ANDs
/// delta_j's sequence with x_i's. A zero vector on either side yields the zero
/// matrix without drawing any words. Cells are evaluated row-major.
[[nodiscard]] inline UpdateMatrix outer_product(std::span<const Binary16> x, std::span<const Binary16> delta,
                                                const OuterProductParams& params) {
  if (x.empty() || delta.empty()) throw ContractError("outer_product: vectors must be nonempty");
  check_sequence_length(params.seq_len);
  detail::check_seeds(params.seed_x, params.seed_delta);

  UpdateMatrix out;
  out.values = HalfMatrix(delta.size(), x.size());
  out.exponent_x = vector_exponent(x);
  out.exponent_delta = vector_exponent(delta);
  if (out.exponent_x.is_zero_vector || out.exponent_delta.is_zero_vector) return out;

  const int ex = out.exponent_x.exponent;
  const int ed = out.exponent_delta.exponent;
  out.scale = params.lr ? f_scale_with_lr(ex, ed, params.seq_len, *params.lr) : f_scale(ex, ed, params.seq_len);

  Lfsr rng_x(params.seed_x);
  Lfsr rng_delta(params.seed_delta);
  const auto words_x = detail::draw_words(rng_x, params.seq_len);
  const auto words_delta = detail::draw_words(rng_delta, params.seq_len);
  out.rng_draws = rng_x.draws() + rng_delta.draws();

  const EncodedVector enc_x(x, ex, words_x);
  const EncodedVector enc_delta(delta, ed, words_delta);

  for (std::size_t j = 0; j < delta.size(); ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const int count = and_popcount(enc_delta.bits(j), enc_x.bits(i));
      out.values.at(j, i) = shift_pack(enc_delta.negative(j) != enc_x.negative(i), count, out.scale).value;
    }
  }
  return out;
}

[[nodiscard]] inline UpdateMatrix outer_product(const OuterProductJob& job) {
  return outer_product(job.x, job.delta, job.params);
}

struct SgdParams {
  double lr = 0.1;
  bool lr_folded = false;  // dW already carries lr through the scale
  double momentum = 0.0;
};

/// velocity' = momentum * velocity + dW;  W' = W - lr_eff * velocity'.
/// Every arithmetic step rounds to binary16. lr_eff is 1 when lr is folded.
inline void apply_update(HalfMatrix& weights, HalfMatrix& velocity, const HalfMatrix& update, const SgdParams& sgd) {
  if (weights.rows != update.rows || weights.cols != update.cols || velocity.rows != update.rows ||
      velocity.cols != update.cols) {
    throw ContractError("apply_update: shape mismatch");
  }
  if (!(sgd.momentum >= 0.0 && sgd.momentum < 1.0)) throw ContractError("apply_update: momentum must be in [0, 1)");
  const double lr = sgd.lr_folded ? 1.0 : sgd.lr;
  for (std::size_t k = 0; k < weights.data.size(); ++k) {
    const Binary16 carried = quantize_to_binary16(sgd.momentum * velocity.data[k].to_double());
    velocity.data[k] = carried + update.data[k];
    const Binary16 step = quantize_to_binary16(lr * velocity.data[k].to_double());
    weights.data[k] = weights.data[k] - step;
  }
}

/// Weight update of a convolution layer from unrolled patches.
///
/// `patches` is positions x (kernel * in_channels), `gradients` is positions x
/// out_channels. One stochastic outer product per position, with seeds from
/// `schedule` at counters first_counter + position; results are summed in
/// binary16 in position order. Output is out_channels x (kernel * in_channels).
[[nodiscard]] inline HalfMatrix conv_weight_update(const HalfMatrix& patches, const HalfMatrix& gradients,
                                                   int seq_len, const SeedSchedule& schedule,
                                                   std::uint64_t first_counter = 0,
                                                   std::optional<double> lr = std::nullopt) {
  if (patches.rows != gradients.rows) throw ContractError("conv_weight_update: position counts differ");
  if (patches.rows == 0) throw ContractError("conv_weight_update: no patch positions");
  HalfMatrix sum(gradients.cols, patches.cols);
  for (std::size_t p = 0; p < patches.rows; ++p) {
    const auto [sx, sd] = schedule.seeds(first_counter + p);
    const auto dw = outer_product(patches.row(p), gradients.row(p), OuterProductParams{seq_len, sx, sd, lr});
    for (std::size_t k = 0; k < sum.data.size(); ++k) sum.data[k] = sum.data[k] + dw.values.data[k];
  }
  return sum;
}

}  // namespace essop
