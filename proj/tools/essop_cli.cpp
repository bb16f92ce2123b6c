// essop: command-line front end for the stochastic outer-product library.
//
// Exit codes: 0 success, 2 input or validation error, 3 internal contract
// violation.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "essop/essop.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitContract = 3;

using nlohmann::json;

std::uint16_t parse_seed(const std::string& text, const std::string& flag) {
  std::string_view s = text;
  if (s.starts_with("0x") || s.starts_with("0X")) s.remove_prefix(2);
  unsigned value = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value, 16);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || value > 0xFFFF) {
    throw essop::IoError(flag + ": expected a 16-bit hex word, got '" + text + "'");
  }
  if (value == 0) throw essop::InvalidSeedError(flag + ": seed must be nonzero");
  return static_cast<std::uint16_t>(value);
}

std::string hex4(std::uint16_t w) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%04X", static_cast<unsigned>(w));
  return buf;
}

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------

struct LfsrArgs {
  std::string seed = "ACE1";
  long count = 16;
  std::string taps = "16,15,13,4";
};

int cmd_lfsr(const LfsrArgs& a) {
  if (a.taps != "16,15,13,4") throw essop::IoError("--taps: only the default tap set 16,15,13,4 is supported");
  if (a.count < 0) throw essop::IoError("--count must be non-negative");
  essop::Lfsr rng(parse_seed(a.seed, "--seed"));
  for (long k = 0; k < a.count; ++k) std::cout << hex4(rng.next_word()) << '\n';
  return 0;
}

struct EncodeArgs {
  double value = 0.0;
  std::optional<int> exponent;
  std::string seed = "ACE1";
  int seq_len = 16;
};

int cmd_encode(const EncodeArgs& a) {
  const auto x = essop::quantize_to_binary16(a.value);
  if (!x.is_finite()) throw essop::DomainError("--value is not finite in binary16");
  const int e = a.exponent ? *a.exponent : (x.is_zero() ? 0 : essop::exponent_ceil(x.abs().to_double()));
  essop::Lfsr rng(parse_seed(a.seed, "--seed"));
  const auto seq = essop::encode(x, e, rng, a.seq_len);
  std::cout << "value=" << essop::io::format_value(x) << " bits16=0x" << hex4(x.bits()) << '\n'
            << "exponent=" << e << " probability=" << num(essop::probability_of(x, e)) << '\n'
            << "sign=" << (seq.negative() ? '-' : '+') << '\n'
            << "sequence=" << seq.to_string() << '\n'
            << "ones=" << seq.popcount() << " draws=" << rng.draws() << '\n';
  return 0;
}

struct MulArgs {
  double x = 0.0;
  double delta = 0.0;
  int seq_len = 16;
  std::string seed_x = "ACE1";
  std::string seed_delta = "1234";
  std::optional<double> lr;
};

int cmd_mul(const MulArgs& a) {
  const auto x = essop::quantize_to_binary16(a.x);
  const auto d = essop::quantize_to_binary16(a.delta);
  const std::vector<essop::Binary16> xv{x};
  const std::vector<essop::Binary16> dv{d};
  const auto dw = essop::outer_product(
      xv, dv, essop::OuterProductParams{a.seq_len, parse_seed(a.seed_x, "--seed-x"), parse_seed(a.seed_delta, "--seed-delta"), a.lr});
  const auto v = dw.at(0, 0);
  std::cout << "value=" << essop::io::format_value(v) << " bits16=0x" << hex4(v.bits()) << '\n'
            << "exact=" << num(x.to_double() * d.to_double()) << '\n'
            << "scale_exponent=" << dw.scale.exponent << " rng_draws=" << dw.rng_draws << '\n';
  return 0;
}

struct OuterArgs {
  std::string x_path;
  std::string delta_path;
  int seq_len = 16;
  std::string seed_x = "ACE1";
  std::string seed_delta = "1234";
  std::optional<double> lr;
  std::string out;
  std::string format = "bin";
};

int cmd_outer(const OuterArgs& a) {
  const auto x = essop::io::decode_vector(essop::io::read_file(a.x_path));
  const auto d = essop::io::decode_vector(essop::io::read_file(a.delta_path));
  if (x.empty() || d.empty()) throw essop::IoError("input vectors must be nonempty");
  const auto dw = essop::outer_product(
      x, d, essop::OuterProductParams{a.seq_len, parse_seed(a.seed_x, "--seed-x"), parse_seed(a.seed_delta, "--seed-delta"), a.lr});
  const auto fmt = a.format == "csv" ? essop::io::Format::kCsv : essop::io::Format::kBinary;
  essop::io::write_file(a.out, essop::io::encode_matrix(dw.values, fmt));
  std::cerr << "rng_draws=" << dw.rng_draws << " scale_exponent=" << dw.scale.exponent << '\n';
  return 0;
}

struct StatsArgs {
  std::string x_path;
  std::string delta_path;
  int seq_len = 16;
  long trials = 1000;
  std::string seed_x = "ACE1";
  std::string seed_delta = "1234";
  bool fixed_seeds = false;
  std::string report;
};

int cmd_stats(const StatsArgs& a) {
  const auto x = essop::io::decode_vector(essop::io::read_file(a.x_path));
  const auto d = essop::io::decode_vector(essop::io::read_file(a.delta_path));
  if (x.empty() || d.empty()) throw essop::IoError("input vectors must be nonempty");
  if (a.trials < 2) throw essop::IoError("--trials must be at least 2");
  const auto sx = parse_seed(a.seed_x, "--seed-x");
  const auto sd = parse_seed(a.seed_delta, "--seed-delta");
  if (sx == sd) throw essop::InvalidSeedError("--seed-x and --seed-delta must differ");

  const auto stats = essop::oracle::empirical_stats(x, d, a.seq_len, static_cast<std::uint64_t>(a.trials),
                                                    essop::oracle::TrialSeeds{sx, sd, a.fixed_seeds});
  const auto ex = essop::vector_exponent(x);
  const auto ed = essop::vector_exponent(d);

  json entries = json::array();
  std::size_t within = 0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto& s = stats[j * x.size() + i];
      essop::oracle::Moments m;
      if (!ex.is_zero_vector && !ed.is_zero_vector) {
        m = essop::oracle::analytic_moments(x[i].to_double(), d[j].to_double(), ex.exponent, ed.exponent, a.seq_len);
      }
      const bool ok = std::fabs(s.mean - m.mean) <= s.confidence_halfwidth;
      within += ok ? 1 : 0;
      entries.push_back({{"row", j},
                         {"col", i},
                         {"exact", x[i].to_double() * d[j].to_double()},
                         {"analytic_mean", m.mean},
                         {"analytic_variance", m.variance},
                         {"mean", s.mean},
                         {"variance", s.variance},
                         {"trials", s.trials},
                         {"ci_halfwidth", s.confidence_halfwidth},
                         {"within_ci", ok}});
    }
  }
  json report = {{"seq_len", a.seq_len},
                 {"trials", a.trials},
                 {"fixed_seeds", a.fixed_seeds},
                 {"rows", d.size()},
                 {"cols", x.size()},
                 {"exponent_x", ex.is_zero_vector ? json(nullptr) : json(ex.exponent)},
                 {"exponent_delta", ed.is_zero_vector ? json(nullptr) : json(ed.exponent)},
                 {"entries_within_ci", within},
                 {"entries", entries}};
  essop::io::write_file(a.report, report.dump(2) + "\n");
  std::cout << "entries=" << stats.size() << " within_ci=" << within << '\n';
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string out_dir = ".";
};

int cmd_train(const TrainArgs& a) {
  const auto config = essop::train::parse_training_config(essop::io::read_file(a.config));
  const auto metrics = essop::train::train(config);

  std::filesystem::create_directories(a.out_dir);
  std::string csv = "epoch,lr,train_loss,train_accuracy,test_loss,test_accuracy\n";
  std::string jsonl;
  for (const auto& e : metrics.epochs) {
    csv += std::to_string(e.epoch) + "," + num(e.lr) + "," + num(e.train_loss) + "," + num(e.train_accuracy) + "," +
           num(e.test_loss) + "," + num(e.test_accuracy) + "\n";
    jsonl += json{{"mode", metrics.mode},
                  {"epoch", e.epoch},
                  {"lr", e.lr},
                  {"train_loss", e.train_loss},
                  {"train_accuracy", e.train_accuracy},
                  {"test_loss", e.test_loss},
                  {"test_accuracy", e.test_accuracy}}
                 .dump() +
             "\n";
  }
  const std::filesystem::path dir(a.out_dir);
  essop::io::write_file((dir / "metrics.csv").string(), csv);
  essop::io::write_file((dir / "metrics.jsonl").string(), jsonl);
  const std::string summary = "mode=" + metrics.mode + " epochs=" + std::to_string(metrics.epochs.size()) +
                              " final_test_accuracy=" + num(metrics.final_test_accuracy) +
                              " diverged=" + (metrics.diverged ? "true" : "false");
  essop::io::write_file((dir / "summary.txt").string(), summary + "\n");
  std::cout << summary << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic-computing outer products in binary16"};
  app.require_subcommand(1);

  LfsrArgs lfsr;
  auto* lfsr_cmd = app.add_subcommand("lfsr", "Print words of the 16-bit LFSR");
  lfsr_cmd->add_option("--seed", lfsr.seed, "Nonzero seed (hex)");
  lfsr_cmd->add_option("--count", lfsr.count, "Number of words");
  lfsr_cmd->add_option("--taps", lfsr.taps, "Feedback taps (only 16,15,13,4)");

  EncodeArgs enc;
  auto* enc_cmd = app.add_subcommand("encode", "Encode one value as a Bernoulli sequence");
  enc_cmd->add_option("--value", enc.value, "Real value (rounded to binary16)")->required();
  enc_cmd->add_option("--exponent", enc.exponent, "Normalization exponent E (default: ceil(log2|x|))");
  enc_cmd->add_option("--seed", enc.seed, "LFSR seed (hex)");
  enc_cmd->add_option("--seq-len", enc.seq_len, "Sequence length M");

  MulArgs mul;
  auto* mul_cmd = app.add_subcommand("mul", "Multiply two scalars through one unit cell");
  mul_cmd->add_option("--x", mul.x, "Activation value")->required();
  mul_cmd->add_option("--delta", mul.delta, "Gradient value")->required();
  mul_cmd->add_option("--seq-len", mul.seq_len, "Sequence length M");
  mul_cmd->add_option("--seed-x", mul.seed_x, "X-side LFSR seed (hex)");
  mul_cmd->add_option("--seed-delta", mul.seed_delta, "Delta-side LFSR seed (hex)");
  mul_cmd->add_option("--lr", mul.lr, "Learning rate folded into the scale");

  OuterArgs outer;
  auto* outer_cmd = app.add_subcommand("outer", "Stochastic outer product delta * x^T");
  outer_cmd->add_option("--x", outer.x_path, "Activation vector file")->required();
  outer_cmd->add_option("--delta", outer.delta_path, "Gradient vector file")->required();
  outer_cmd->add_option("--seq-len", outer.seq_len, "Sequence length M");
  outer_cmd->add_option("--seed-x", outer.seed_x, "X-side LFSR seed (hex)");
  outer_cmd->add_option("--seed-delta", outer.seed_delta, "Delta-side LFSR seed (hex)");
  outer_cmd->add_option("--lr", outer.lr, "Learning rate folded into the scale");
  outer_cmd->add_option("--out", outer.out, "Output matrix file")->required();
  outer_cmd->add_option("--format", outer.format, "bin or csv")->check(CLI::IsMember({"bin", "csv"}));

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Monte-Carlo statistics against the analytic moments");
  stats_cmd->add_option("--x", stats.x_path, "Activation vector file")->required();
  stats_cmd->add_option("--delta", stats.delta_path, "Gradient vector file")->required();
  stats_cmd->add_option("--seq-len", stats.seq_len, "Sequence length M");
  stats_cmd->add_option("--trials", stats.trials, "Number of seed pairs");
  stats_cmd->add_option("--seed-x", stats.seed_x, "X-side seed schedule base (hex)");
  stats_cmd->add_option("--seed-delta", stats.seed_delta, "Delta-side seed schedule base (hex)");
  stats_cmd->add_flag("--fixed-seeds", stats.fixed_seeds, "Use the base seeds for every trial");
  stats_cmd->add_option("--report", stats.report, "JSON report path")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the toy MLP");
  train_cmd->add_option("--config", tr.config, "key = value config file")->required();
  train_cmd->add_option("--out-dir", tr.out_dir, "Directory for metrics files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*lfsr_cmd) return cmd_lfsr(lfsr);
    if (*enc_cmd) return cmd_encode(enc);
    if (*mul_cmd) return cmd_mul(mul);
    if (*outer_cmd) return cmd_outer(outer);
    if (*stats_cmd) return cmd_stats(stats);
    if (*train_cmd) return cmd_train(tr);
  } catch (const essop::ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitContract;
  } catch (const essop::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitContract;
  }
  return 0;
}
