#include "essop/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "essop/oracle.hpp"

using essop::Binary16;
using essop::quantize_to_binary16;
namespace train = essop::train;

namespace {

train::TrainingConfig small_config(train::UpdateMode mode, int seq_len = 16) {
  train::TrainingConfig c;
  c.epochs = 15;
  c.samples = 400;
  c.mode = mode;
  c.seq_len = seq_len;
  return c;
}

bool same_weights(const train::Mlp& a, const train::Mlp& b) {
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    if (!(a.layers()[l].weights == b.layers()[l].weights) || !(a.layers()[l].bias == b.layers()[l].bias)) return false;
  }
  return true;
}

}  // namespace

TEST(TwoMoons, NoiselessPointsLieOnTheArcs) {
  const auto d = train::make_two_moons(10, 0.0, 1);
  ASSERT_EQ(d.size(), 10u);
  EXPECT_EQ(d.num_classes, 2);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double x = d.features[k][0].to_double();
    const double y = d.features[k][1].to_double();
    // binary16 inputs carry about 2^-11 relative error.
    if (d.labels[k] == 0) {
      EXPECT_NEAR(std::hypot(x, y), 1.0, 2e-3);
      EXPECT_GE(y, 0.0);
    } else {
      EXPECT_NEAR(std::hypot(x - 1.0, y - 0.5), 1.0, 2e-3);
      EXPECT_LE(y, 0.5);
    }
  }
  EXPECT_EQ(d.features[0][0].to_double(), 1.0);
  EXPECT_EQ(d.features[0][1].to_double(), 0.0);
}

TEST(TwoMoons, DeterministicAndSeparated) {
  const auto a = train::generate_two_moons(2000, 0.1, 7);
  const auto b = train::generate_two_moons(2000, 0.1, 7);
  EXPECT_EQ(a.train.features, b.train.features);
  EXPECT_EQ(a.test.labels, b.test.labels);
  EXPECT_EQ(a.train.size(), 1600u);
  EXPECT_EQ(a.test.size(), 400u);

  double cy[2] = {0, 0};
  int n[2] = {0, 0};
  for (std::size_t k = 0; k < a.train.size(); ++k) {
    cy[a.train.labels[k]] += a.train.features[k][1].to_double();
    ++n[a.train.labels[k]];
  }
  // Arc centroids sit at y = 2/pi and y = 0.5 - 2/pi.
  EXPECT_NEAR(cy[0] / n[0], 2 / std::numbers::pi, 0.03);
  EXPECT_NEAR(cy[1] / n[1], 0.5 - 2 / std::numbers::pi, 0.03);
  EXPECT_NEAR(n[0], 800, 60);
}

TEST(Evaluate, ConstantAndPerfectModels) {
  train::Dataset d;
  d.num_classes = 2;
  for (int k = 0; k < 10; ++k) {
    d.features.push_back({quantize_to_binary16(k < 5 ? -1.0 : 1.0), Binary16{}});
    d.labels.push_back(k < 5 ? 0 : 1);
  }
  train::Mlp zero({2, 2}, 1);
  for (auto& w : zero.layers()[0].weights.data) w = Binary16{};
  EXPECT_EQ(train::evaluate(zero, d).accuracy, 0.5);
  EXPECT_NEAR(train::evaluate(zero, d).loss, std::log(2.0), 1e-12);

  train::Mlp perfect({2, 2}, 1);
  perfect.layers()[0].weights.data = {quantize_to_binary16(-4.0), Binary16{}, quantize_to_binary16(4.0), Binary16{}};
  EXPECT_EQ(train::evaluate(perfect, d).accuracy, 1.0);
}

TEST(Softmax, SumsToOne) {
  const std::vector<Binary16> z{quantize_to_binary16(1.0), quantize_to_binary16(2.0), quantize_to_binary16(-3.0)};
  const auto p = train::softmax(z);
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-15);
  EXPECT_NEAR(p[1] / p[0], std::exp(1.0), 1e-12);
}

TEST(Config, ParsesAllKeys) {
  const auto c = train::parse_training_config(R"(# comment
topology = 2, 8, 8, 2
epochs = 12
batch_size = 16
lr = 0.05
momentum = 0.5
mode = essop(8)
lr_folded = true
lr_schedule = step
seed_data = 11
seed_init = 12
seed_essop_x = 0x00FF
seed_essop_delta = 0x0F0F
dataset = synthetic-two-moons
samples = 300
noise = 0.2
test_fraction = 0.25
)");
  EXPECT_EQ(c.topology, (std::vector<int>{2, 8, 8, 2}));
  EXPECT_EQ(c.epochs, 12);
  EXPECT_EQ(c.batch_size, 16);
  EXPECT_EQ(c.lr, 0.05);
  EXPECT_EQ(c.momentum, 0.5);
  EXPECT_EQ(c.mode, train::UpdateMode::kEssop);
  EXPECT_EQ(c.seq_len, 8);
  EXPECT_TRUE(c.lr_folded);
  EXPECT_EQ(c.lr_schedule, train::LrSchedule::kStep);
  EXPECT_EQ(c.seed_essop_x, 0x00FF);
  EXPECT_EQ(c.seed_essop_delta, 0x0F0F);
  EXPECT_EQ(c.samples, 300u);
  EXPECT_EQ(c.mode_tag(), "essop(8)");
}

TEST(Config, ErrorsNameTheField) {
  auto field_of = [](const char* text) {
    try {
      (void)train::parse_training_config(text);
    } catch (const essop::ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(field_of("momentum = 1.5\n"), "momentum");
  EXPECT_EQ(field_of("lr = -1\n"), "lr");
  EXPECT_EQ(field_of("epochs = ten\n"), "epochs");
  EXPECT_EQ(field_of("mode = essop(0)\n"), "seq_len");
  EXPECT_EQ(field_of("colour = blue\n"), "colour");
  EXPECT_EQ(field_of("dataset = digits8x8-csv\ntopology = 64,10\n"), "csv_path");
  EXPECT_EQ(field_of("seed_essop_x = 5\nseed_essop_delta = 5\n"), "seed_essop_x");
  EXPECT_EQ(field_of("epochs = 3\n"), "<none>");
}

TEST(Config, DigitsDefaultToStepSchedule) {
  const auto c = train::parse_training_config("dataset = digits8x8-csv\ncsv_path = d.csv\ntopology = 64,32,10\n");
  EXPECT_EQ(c.lr_schedule, train::LrSchedule::kStep);
  EXPECT_EQ(train::parse_training_config("").lr_schedule, train::LrSchedule::kConstant);
  const auto flat = train::parse_training_config(
      "dataset = digits8x8-csv\ncsv_path = d.csv\ntopology = 64,10\nlr_schedule = constant\n");
  EXPECT_EQ(flat.lr_schedule, train::LrSchedule::kConstant);
}

TEST(Schedule, StepDecay) {
  train::TrainingConfig c;
  c.epochs = 100;
  c.lr_schedule = train::LrSchedule::kStep;
  EXPECT_EQ(train::scheduled_lr(c, 0), 0.1);
  EXPECT_NEAR(train::scheduled_lr(c, 60), 0.01, 1e-15);
  EXPECT_NEAR(train::scheduled_lr(c, 85), 0.001, 1e-15);
}

TEST(Training, ExactModeIsBitReproducible) {
  const auto c = small_config(train::UpdateMode::kExact);
  train::Trainer a(c, train::load_dataset(c));
  train::Trainer b(c, train::load_dataset(c));
  const auto ma = a.run();
  const auto mb = b.run();
  EXPECT_TRUE(same_weights(a.model(), b.model()));
  EXPECT_EQ(ma.final_test_accuracy, mb.final_test_accuracy);
  EXPECT_EQ(a.outer_products(), 0u);
}

TEST(Training, EssopModeIsBitReproducibleAndCountsProducts) {
  const auto c = small_config(train::UpdateMode::kEssop);
  train::Trainer a(c, train::load_dataset(c));
  train::Trainer b(c, train::load_dataset(c));
  (void)a.run();
  (void)b.run();
  EXPECT_TRUE(same_weights(a.model(), b.model()));
  // One product per sample per layer.
  EXPECT_EQ(a.outer_products(), static_cast<std::uint64_t>(c.epochs) * 320u * 2u);
}

TEST(Training, ShortRunsLearnTheMoons) {
  for (const auto mode : {train::UpdateMode::kExact, train::UpdateMode::kEssop}) {
    const auto m = train::train(small_config(mode));
    EXPECT_FALSE(m.diverged);
    EXPECT_EQ(m.epochs.size(), 15u);
    EXPECT_GT(m.final_test_accuracy, 0.85) << m.mode;
  }
}

TEST(Training, EssopGradientMatchesExactInExpectation) {
  // Mean of 1000 stochastic weight gradients for one sample against the exact one.
  const train::Mlp model({2, 16, 2}, 3);
  const std::vector<Binary16> input{quantize_to_binary16(0.7), quantize_to_binary16(-0.3)};
  const auto acts = model.forward(input);
  const auto p = train::softmax(acts.back());
  const std::vector<Binary16> delta{quantize_to_binary16(p[0] - 1.0), quantize_to_binary16(p[1])};
  const auto& h = acts[1];
  const auto stats = essop::oracle::empirical_stats(h, delta, 16, 1000, {0xACE1, 0x1234, false});
  const auto ex = essop::vector_exponent(h).exponent;
  const auto ed = essop::vector_exponent(delta).exponent;
  for (std::size_t j = 0; j < delta.size(); ++j) {
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double exact = delta[j].to_double() * h[i].to_double();
      const auto m = essop::oracle::analytic_moments(h[i].to_double(), delta[j].to_double(), ex, ed, 16);
      EXPECT_NEAR(stats[j * h.size() + i].mean, exact, 4 * std::sqrt(m.variance / 1000) + 1e-3 * std::fabs(exact))
          << j << "," << i;
    }
  }
}

TEST(Digits, LoadsCsv) {
  const auto path = (std::filesystem::temp_directory_path() / "essop_digits_test.csv").string();
  {
    std::ofstream out(path);
    out << "# pixels then label\n";
    for (int r = 0; r < 10; ++r) {
      for (int k = 0; k < 64; ++k) out << (k == r ? 16 : k % 3) << ",";
      out << r << "\n";
    }
  }
  const auto s = train::load_digits_csv(path, 0.2, 1);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_EQ(s.train.dim(), 64u);
  EXPECT_EQ(s.train.num_classes, 10);
  for (std::size_t k = 0; k < s.train.size(); ++k) {
    EXPECT_EQ(s.train.features[k][static_cast<std::size_t>(s.train.labels[k])].to_double(), 1.0);
  }
  {
    std::ofstream out(path);
    out << "1,2,3\n";
  }
  EXPECT_THROW((void)train::load_digits_csv(path, 0.2, 1), essop::IoError);
  std::remove(path.c_str());
}
