#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "essop/engine.hpp"
#include "essop/errors.hpp"
#include "essop/io.hpp"
#include "essop/numeric.hpp"
#include "essop/rng.hpp"

namespace essop::train {

// ---------------------------------------------------------------------------
// Data

struct Dataset {
  std::vector<std::vector<Binary16>> features;
  std::vector<int> labels;
  int num_classes = 0;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return features.empty() ? 0 : features.front().size(); }
};

struct Split {
  Dataset train;
  Dataset test;
};

namespace detail {

// std distributions are implementation-defined; these are not.
inline double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1p-53; }

inline double standard_normal(std::mt19937_64& gen) {
  double u1 = uniform01(gen);
  while (u1 <= 0.0) u1 = uniform01(gen);
  const double u2 = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& gen) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(gen() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

inline Split split_dataset(const Dataset& all, double test_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(all.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 gen(seed ^ 0x9E3779B97F4A7C15ull);
  shuffle_indices(idx, gen);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(all.size())));
  Split s;
  s.train.num_classes = s.test.num_classes = all.num_classes;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    Dataset& dst = k < idx.size() - n_test ? s.train : s.test;
    dst.features.push_back(all.features[idx[k]]);
    dst.labels.push_back(all.labels[idx[k]]);
  }
  return s;
}

}  // namespace detail

/// Two interleaved half circles: class 0 is (cos t, sin t), class 1 is
/// (1 - cos t, 0.5 - sin t), t evenly spaced on [0, pi], plus isotropic
/// Gaussian noise. Points are unshuffled (class 0 first).
[[nodiscard]] inline Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 2) throw ContractError("two moons: need at least two samples");
  if (noise < 0.0) throw ContractError("two moons: noise must be non-negative");
  const std::size_t n_outer = n / 2;
  const std::size_t n_inner = n - n_outer;
  std::mt19937_64 gen(seed);
  Dataset d;
  d.num_classes = 2;
  auto arc = [&](std::size_t count, int label) {
    for (std::size_t k = 0; k < count; ++k) {
      const double t = count > 1 ? std::numbers::pi * static_cast<double>(k) / static_cast<double>(count - 1) : 0.0;
      double px = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
      double py = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
      if (noise > 0.0) {
        px += noise * detail::standard_normal(gen);
        py += noise * detail::standard_normal(gen);
      }
      d.features.push_back({quantize_to_binary16(px), quantize_to_binary16(py)});
      d.labels.push_back(label);
    }
  };
  arc(n_outer, 0);
  arc(n_inner, 1);
  return d;
}

/// Two moons, shuffled and split 80/20.
[[nodiscard]] inline Split generate_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  return detail::split_dataset(make_two_moons(n, noise, seed), 0.2, seed);
}

/// 8x8 digits from CSV: 64 pixel intensities (0..16) then an integer label per
/// row. Pixels are scaled by 1/16.
[[nodiscard]] inline Split load_digits_csv(const std::string& path, double test_fraction, std::uint64_t seed) {
  std::istringstream in(io::read_file(path));
  Dataset d;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto t = io::detail::trim(cell);
      const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
      if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
        throw IoError(path + ":" + std::to_string(line_no) + ": bad number '" + t + "'");
      }
      cells.push_back(v);
    }
    if (cells.size() != 65) throw IoError(path + ":" + std::to_string(line_no) + ": expected 65 columns");
    const double label = cells.back();
    if (label < 0 || label > 9 || label != std::floor(label)) {
      throw IoError(path + ":" + std::to_string(line_no) + ": label must be 0..9");
    }
    std::vector<Binary16> f;
    for (std::size_t k = 0; k < 64; ++k) f.push_back(quantize_to_binary16(cells[k] / 16.0));
    d.features.push_back(std::move(f));
    d.labels.push_back(static_cast<int>(label));
  }
  if (d.size() < 2) throw IoError(path + ": not enough rows");
  d.num_classes = 10;
  return detail::split_dataset(d, test_fraction, seed);
}

// ---------------------------------------------------------------------------
// Model

struct DenseLayer {
  HalfMatrix weights;   // out x in
  HalfMatrix bias;      // 1 x out
  HalfMatrix velocity;  // momentum state for weights
  HalfMatrix bias_velocity;
};

/// Dense ReLU network with a softmax output, all arithmetic in binary16.
class Mlp {
 public:
  Mlp() = default;

  /// He-normal weights, zero biases.
  Mlp(const std::vector<int>& topology, std::uint64_t seed) {
    if (topology.size() < 2) throw ContractError("topology needs at least input and output sizes");
    std::mt19937_64 gen(seed);
    for (std::size_t l = 0; l + 1 < topology.size(); ++l) {
      const auto in = static_cast<std::size_t>(topology[l]);
      const auto out = static_cast<std::size_t>(topology[l + 1]);
      DenseLayer layer{HalfMatrix(out, in), HalfMatrix(1, out), HalfMatrix(out, in), HalfMatrix(1, out)};
      const double sd = std::sqrt(2.0 / static_cast<double>(in));
      for (auto& w : layer.weights.data) w = quantize_to_binary16(sd * detail::standard_normal(gen));
      layers_.push_back(std::move(layer));
    }
  }

  [[nodiscard]] std::vector<DenseLayer>& layers() noexcept { return layers_; }
  [[nodiscard]] const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  [[nodiscard]] std::size_t input_dim() const { return layers_.front().weights.cols; }
  [[nodiscard]] std::size_t output_dim() const { return layers_.back().weights.rows; }

  /// Activations of every layer: [0] is the input, the last holds the logits.
  /// Hidden layers are post-ReLU.
  [[nodiscard]] std::vector<std::vector<Binary16>> forward(std::span<const Binary16> input) const {
    if (input.size() != input_dim()) throw ContractError("forward: input dimension mismatch");
    std::vector<std::vector<Binary16>> acts;
    acts.emplace_back(input.begin(), input.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      std::vector<Binary16> z(layer.weights.rows);
      for (std::size_t j = 0; j < z.size(); ++j) {
        Binary16 acc = layer.bias.data[j];
        for (std::size_t i = 0; i < layer.weights.cols; ++i) acc = acc + layer.weights.at(j, i) * acts.back()[i];
        const bool hidden = l + 1 < layers_.size();
        z[j] = hidden && !(acc.to_double() > 0.0) ? Binary16{} : acc;
      }
      acts.push_back(std::move(z));
    }
    return acts;
  }

 private:
  std::vector<DenseLayer> layers_;
};

[[nodiscard]] inline std::vector<double> softmax(std::span<const Binary16> logits) {
  double top = -std::numeric_limits<double>::infinity();
  for (const auto v : logits) top = std::max(top, v.to_double());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) sum += (p[k] = std::exp(logits[k].to_double() - top));
  for (auto& v : p) v /= sum;
  return p;
}

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

/// Argmax accuracy (ties go to the lowest class) and mean cross-entropy.
[[nodiscard]] inline Evaluation evaluate(const Mlp& model, const Dataset& data) {
  if (data.size() == 0) throw ContractError("evaluate: empty dataset");
  if (data.dim() != model.input_dim()) throw ContractError("evaluate: feature dimension mismatch");
  if (static_cast<std::size_t>(data.num_classes) > model.output_dim()) {
    throw ContractError("evaluate: model has fewer outputs than classes");
  }
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto acts = model.forward(data.features[s]);
    const auto p = softmax(acts.back());
    const auto pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    if (pred == data.labels[s]) ++correct;
    loss -= std::log(std::max(p[static_cast<std::size_t>(data.labels[s])], 1e-300));
  }
  const double n = static_cast<double>(data.size());
  return {static_cast<double>(correct) / n, loss / n};
}

// ---------------------------------------------------------------------------
// Configuration

enum class UpdateMode { kExact, kEssop };
enum class LrSchedule { kConstant, kStep };
enum class DatasetKind { kTwoMoons, kDigitsCsv };

struct TrainingConfig {
  std::vector<int> topology{2, 16, 2};
  int epochs = 100;
  int batch_size = 32;
  double lr = 0.1;
  double momentum = 0.9;
  UpdateMode mode = UpdateMode::kExact;
  int seq_len = 16;
  bool lr_folded = false;
  LrSchedule lr_schedule = LrSchedule::kConstant;
  std::uint64_t seed_data = 1;
  std::uint64_t seed_init = 2;
  std::uint16_t seed_essop_x = 0xACE1;
  std::uint16_t seed_essop_delta = 0x1234;
  DatasetKind dataset = DatasetKind::kTwoMoons;
  std::size_t samples = 2000;
  double noise = 0.1;
  std::string csv_path;
  double test_fraction = 0.2;

  [[nodiscard]] std::string mode_tag() const {
    return mode == UpdateMode::kExact ? "exact" : "essop(" + std::to_string(seq_len) + ")";
  }

  /// Throws ConfigError naming the first invalid field.
  void validate() const {
    if (topology.size() < 2) throw ConfigError("topology", "needs at least input and output sizes");
    for (const int n : topology) {
      if (n < 1) throw ConfigError("topology", "layer sizes must be positive");
    }
    if (epochs < 1) throw ConfigError("epochs", "must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr", "must be positive and finite");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum", "must be in [0, 1)");
    if (mode == UpdateMode::kEssop && (seq_len < 1 || seq_len > kMaxSequenceLength)) {
      throw ConfigError("seq_len", "must be in [1, 2048]");
    }
    if (seed_essop_x == 0 || seed_essop_delta == 0 || seed_essop_x == seed_essop_delta) {
      throw ConfigError("seed_essop_x", "ESSOP seeds must be nonzero and distinct");
    }
    if (dataset == DatasetKind::kTwoMoons) {
      if (samples < 10) throw ConfigError("samples", "must be >= 10");
      if (!(noise >= 0.0)) throw ConfigError("noise", "must be >= 0");
      if (topology.front() != 2) throw ConfigError("topology", "two-moons needs 2 inputs");
      if (topology.back() < 2) throw ConfigError("topology", "two-moons needs 2 outputs");
    } else {
      if (csv_path.empty()) throw ConfigError("csv_path", "required for digits8x8-csv");
      if (topology.front() != 64) throw ConfigError("topology", "digits need 64 inputs");
      if (topology.back() < 10) throw ConfigError("topology", "digits need 10 outputs");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction", "must be in (0, 1)");
  }
};

namespace detail {

template <typename T>
T parse_number(const std::string& field, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  int base = 10;
  if constexpr (std::is_integral_v<T>) {
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
      first += 2;
      base = 16;
    }
  }
  std::from_chars_result res{};
  if constexpr (std::is_integral_v<T>) {
    res = std::from_chars(first, last, v, base);
  } else {
    res = std::from_chars(first, last, v);
  }
  if (text.empty() || res.ec != std::errc{} || res.ptr != last) throw ConfigError(field, "invalid value '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& field, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(field, "expected true or false, got '" + text + "'");
}

}  // namespace detail

/// Parses `key = value` lines ('#' starts a comment). Unknown keys are errors.
/// lr_schedule defaults to step for the digits dataset and constant otherwise.
/// The result is validated before it is returned.
[[nodiscard]] inline TrainingConfig parse_training_config(std::string_view text) {
  TrainingConfig c;
  bool schedule_given = false;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = io::detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(t, "expected key = value");
    const std::string key = io::detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = io::detail::trim(std::string_view(t).substr(eq + 1));

    if (key == "topology") {
      c.topology.clear();
      std::stringstream ss(value);
      std::string part;
      while (std::getline(ss, part, ',')) c.topology.push_back(detail::parse_number<int>(key, io::detail::trim(part)));
    } else if (key == "epochs") {
      c.epochs = detail::parse_number<int>(key, value);
    } else if (key == "batch_size") {
      c.batch_size = detail::parse_number<int>(key, value);
    } else if (key == "lr") {
      c.lr = detail::parse_number<double>(key, value);
    } else if (key == "momentum") {
      c.momentum = detail::parse_number<double>(key, value);
    } else if (key == "mode") {
      if (value == "exact") {
        c.mode = UpdateMode::kExact;
      } else if (value == "essop") {
        c.mode = UpdateMode::kEssop;
      } else if (value.starts_with("essop(") && value.ends_with(")")) {
        c.mode = UpdateMode::kEssop;
        c.seq_len = detail::parse_number<int>("mode", value.substr(6, value.size() - 7));
      } else {
        throw ConfigError(key, "expected exact, essop or essop(M)");
      }
    } else if (key == "seq_len") {
      c.seq_len = detail::parse_number<int>(key, value);
    } else if (key == "lr_folded") {
      c.lr_folded = detail::parse_bool(key, value);
    } else if (key == "lr_schedule") {
      schedule_given = true;
      if (value == "constant") {
        c.lr_schedule = LrSchedule::kConstant;
      } else if (value == "step") {
        c.lr_schedule = LrSchedule::kStep;
      } else {
        throw ConfigError(key, "expected constant or step");
      }
    } else if (key == "seed_data") {
      c.seed_data = detail::parse_number<std::uint64_t>(key, value);
    } else if (key == "seed_init") {
      c.seed_init = detail::parse_number<std::uint64_t>(key, value);
    } else if (key == "seed_essop_x") {
      c.seed_essop_x = detail::parse_number<std::uint16_t>(key, value);
    } else if (key == "seed_essop_delta") {
      c.seed_essop_delta = detail::parse_number<std::uint16_t>(key, value);
    } else if (key == "dataset") {
      if (value == "two-moons" || value == "synthetic-two-moons") {
        c.dataset = DatasetKind::kTwoMoons;
      } else if (value == "digits8x8-csv") {
        c.dataset = DatasetKind::kDigitsCsv;
      } else {
        throw ConfigError(key, "expected two-moons or digits8x8-csv");
      }
    } else if (key == "samples") {
      c.samples = detail::parse_number<std::size_t>(key, value);
    } else if (key == "noise") {
      c.noise = detail::parse_number<double>(key, value);
    } else if (key == "csv_path") {
      c.csv_path = value;
    } else if (key == "test_fraction") {
      c.test_fraction = detail::parse_number<double>(key, value);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  // Digits default to step decay; two-moons keeps a constant rate.
  if (!schedule_given && c.dataset == DatasetKind::kDigitsCsv) c.lr_schedule = LrSchedule::kStep;
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Training

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

struct RunMetrics {
  std::string mode;
  std::vector<EpochMetrics> epochs;
  double final_test_accuracy = 0.0;
  bool diverged = false;
};

/// Learning rate for a 0-based epoch. The step schedule multiplies by 0.1 at
/// 60% and again at 85% of the run.
[[nodiscard]] inline double scheduled_lr(const TrainingConfig& c, int epoch) {
  if (c.lr_schedule == LrSchedule::kConstant) return c.lr;
  double lr = c.lr;
  if (epoch >= static_cast<int>(0.6 * c.epochs)) lr *= 0.1;
  if (epoch >= static_cast<int>(0.85 * c.epochs)) lr *= 0.1;
  return lr;
}

/// Minibatch SGD with momentum. Each sample's weight gradient is delta * x^T,
/// computed exactly (each product rounded to binary16) or by the stochastic
/// engine; per-sample gradients are summed in binary16 and divided by the batch
/// size. Biases always use the exact gradient.
class Trainer {
 public:
  Trainer(TrainingConfig config, Split data)
      : config_((config.validate(), std::move(config))), data_(std::move(data)),
        model_(config_.topology, config_.seed_init),
        schedule_(config_.seed_essop_x, config_.seed_essop_delta) {
    if (data_.train.dim() != model_.input_dim()) throw ContractError("train: feature dimension mismatch");
  }

  [[nodiscard]] const Mlp& model() const noexcept { return model_; }
  [[nodiscard]] std::uint64_t outer_products() const noexcept { return essop_calls_; }

  RunMetrics run() {
    RunMetrics m;
    m.mode = config_.mode_tag();
    std::mt19937_64 order_gen(config_.seed_data + 0x5851F42D4C957F2Dull);
    std::vector<std::size_t> order(data_.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
      const double lr = scheduled_lr(config_, epoch);
      detail::shuffle_indices(order, order_gen);
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config_.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config_.batch_size));
        step({order.data() + start, end - start}, lr);
      }
      const auto tr = evaluate(model_, data_.train);
      const auto te = evaluate(model_, data_.test);
      m.epochs.push_back({epoch + 1, lr, tr.loss, tr.accuracy, te.loss, te.accuracy});
      m.final_test_accuracy = te.accuracy;
      if (!std::isfinite(tr.loss)) {
        m.diverged = true;
        break;
      }
    }
    return m;
  }

 private:
  void step(std::span<const std::size_t> batch, double lr) {
    auto& layers = model_.layers();
    std::vector<HalfMatrix> grad_w;
    std::vector<HalfMatrix> grad_b;
    for (const auto& layer : layers) {
      grad_w.emplace_back(layer.weights.rows, layer.weights.cols);
      grad_b.emplace_back(1, layer.weights.rows);
    }
    const bool fold = config_.mode == UpdateMode::kEssop && config_.lr_folded;

    for (const std::size_t s : batch) {
      const auto acts = model_.forward(data_.train.features[s]);
      const auto p = softmax(acts.back());
      std::vector<Binary16> delta(p.size());
      for (std::size_t k = 0; k < p.size(); ++k) {
        delta[k] = quantize_to_binary16(p[k] - (static_cast<int>(k) == data_.train.labels[s] ? 1.0 : 0.0));
      }

      for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& input = acts[l];
        accumulate_weight_gradient(grad_w[l], input, delta, fold ? std::optional<double>(lr) : std::nullopt);
        for (std::size_t j = 0; j < delta.size(); ++j) grad_b[l].data[j] = grad_b[l].data[j] + delta[j];
        if (l == 0) break;
        std::vector<Binary16> below(input.size());
        for (std::size_t i = 0; i < input.size(); ++i) {
          if (!(input[i].to_double() > 0.0)) continue;  // ReLU gate
          Binary16 acc{};
          for (std::size_t j = 0; j < delta.size(); ++j) acc = acc + layers[l].weights.at(j, i) * delta[j];
          below[i] = acc;
        }
        delta = std::move(below);
      }
    }

    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      for (auto& g : grad_w[l].data) g = quantize_to_binary16(g.to_double() * inv);
      for (auto& g : grad_b[l].data) g = quantize_to_binary16(g.to_double() * inv);
      apply_update(layers[l].weights, layers[l].velocity, grad_w[l], SgdParams{lr, fold, config_.momentum});
      // Bias gradients never carry a folded lr.
      apply_update(layers[l].bias, layers[l].bias_velocity, grad_b[l], SgdParams{lr, false, config_.momentum});
    }
  }

  void accumulate_weight_gradient(HalfMatrix& sum, std::span<const Binary16> x, std::span<const Binary16> delta,
                                  std::optional<double> folded_lr) {
    if (config_.mode == UpdateMode::kExact) {
      for (std::size_t j = 0; j < delta.size(); ++j) {
        for (std::size_t i = 0; i < x.size(); ++i) sum.at(j, i) = sum.at(j, i) + delta[j] * x[i];
      }
      return;
    }
    const auto [sx, sd] = schedule_.seeds(essop_calls_++);
    const auto dw = outer_product(x, delta, OuterProductParams{config_.seq_len, sx, sd, folded_lr});
    for (std::size_t k = 0; k < sum.data.size(); ++k) sum.data[k] = sum.data[k] + dw.values.data[k];
  }

  TrainingConfig config_;
  Split data_;
  Mlp model_;
  SeedSchedule schedule_;
  std::uint64_t essop_calls_ = 0;
};

[[nodiscard]] inline Split load_dataset(const TrainingConfig& c) {
  if (c.dataset == DatasetKind::kTwoMoons) {
    return detail::split_dataset(make_two_moons(c.samples, c.noise, c.seed_data), c.test_fraction, c.seed_data);
  }
  return load_digits_csv(c.csv_path, c.test_fraction, c.seed_data);
}

[[nodiscard]] inline RunMetrics train(const TrainingConfig& config) {
  Trainer t(config, load_dataset(config));
  return t.run();
}

}  // namespace essop::train
