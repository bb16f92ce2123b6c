#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "essop/engine.hpp"
#include "essop/errors.hpp"
#include "essop/numeric.hpp"
#include "essop/rng.hpp"
#include "essop/sc_core.hpp"

namespace essop::oracle {

/// Dense row-major matrix of doubles.
struct RealMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// delta * x^T in double precision.
[[nodiscard]] inline RealMatrix exact_outer(std::span<const double> x, std::span<const double> delta) {
  RealMatrix m{delta.size(), x.size(), std::vector<double>(delta.size() * x.size())};
  for (std::size_t j = 0; j < delta.size(); ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) m.data[j * x.size() + i] = delta[j] * x[i];
  }
  return m;
}

[[nodiscard]] inline std::vector<double> to_doubles(std::span<const Binary16> v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto e : v) out.push_back(e.to_double());
  return out;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Closed-form moments of one stochastic product, assuming i.i.d. uniform
/// thresholds. With p = (|x| / 2^E_X)(|delta| / 2^E_delta) and F the
/// power-of-two scale actually applied: mean = sign * F * M * p and
/// variance = F^2 * M * p * (1 - p). For power-of-two M, mean = x * delta.
[[nodiscard]] inline Moments analytic_moments(double x, double delta, int exponent_x, int exponent_delta,
                                              int seq_len) {
  const double px = std::ldexp(std::fabs(x), -exponent_x);
  const double pd = std::ldexp(std::fabs(delta), -exponent_delta);
  if (px > 1.0 || pd > 1.0) throw ContractError("analytic_moments: operand exceeds its 2^E range");
  if (seq_len < 1) throw ContractError("analytic_moments: sequence length must be positive");
  const double p = px * pd;
  const double f = f_scale(exponent_x, exponent_delta, seq_len).value();
  const double sign = (std::signbit(x) != std::signbit(delta)) ? -1.0 : 1.0;
  return Moments{sign * f * seq_len * p, f * f * seq_len * p * (1.0 - p)};
}

/// Per-entry Monte-Carlo statistics; the half-width is the 95% normal-approximation CI.
struct EstimatorStats {
  double mean = 0.0;
  double variance = 0.0;
  std::uint64_t trials = 0;
  double confidence_halfwidth = 0.0;
};

/// How trial seeds are chosen: a SeedSchedule indexed by trial, or one fixed
/// pair for every trial.
struct TrialSeeds {
  std::uint16_t base_x = 0xACE1;
  std::uint16_t base_delta = 0x1234;
  bool fixed = false;
};

/// Runs `trials` outer products and accumulates per-entry statistics
/// (Welford). Variance is the unbiased sample variance.
[[nodiscard]] inline std::vector<EstimatorStats> empirical_stats(std::span<const Binary16> x,
                                                                 std::span<const Binary16> delta, int seq_len,
                                                                 std::uint64_t trials, const TrialSeeds& seeds,
                                                                 std::optional<double> lr = std::nullopt) {
  if (trials < 2) throw ContractError("empirical_stats: need at least two trials");
  const std::size_t n = x.size() * delta.size();
  std::vector<double> mean(n, 0.0);
  std::vector<double> m2(n, 0.0);
  const SeedSchedule schedule(seeds.base_x, seeds.base_delta);

  for (std::uint64_t t = 0; t < trials; ++t) {
    const auto [sx, sd] = seeds.fixed ? std::pair{seeds.base_x, seeds.base_delta} : schedule.seeds(t);
    const auto dw = outer_product(x, delta, OuterProductParams{seq_len, sx, sd, lr});
    const double count = static_cast<double>(t + 1);
    for (std::size_t k = 0; k < n; ++k) {
      const double v = dw.values.data[k].to_double();
      const double d = v - mean[k];
      mean[k] += d / count;
      m2[k] += d * (v - mean[k]);
    }
  }

  std::vector<EstimatorStats> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double var = m2[k] / static_cast<double>(trials - 1);
    out[k] = EstimatorStats{mean[k], var, trials, 1.96 * std::sqrt(var / static_cast<double>(trials))};
  }
  return out;
}

}  // namespace essop::oracle
