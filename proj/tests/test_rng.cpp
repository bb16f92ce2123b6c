#include "essop/rng.hpp"

#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "oracles.hpp"

using essop::Lfsr;

namespace {
// First words from seed 0xACE1, computed with the stage-by-stage reference model.
constexpr std::uint16_t kGoldenAce1[] = {0x0877, 0xFB62, 0xB2B0, 0xE3E5};
}  // namespace

TEST(Lfsr, SeedInitializesRegister) {
  const auto rng = Lfsr::seed(0xACE1);
  EXPECT_EQ(rng.state(), 0xACE1);
  EXPECT_EQ(rng.draws(), 0u);
  EXPECT_NO_THROW((void)Lfsr::seed(0x0001));
}

TEST(Lfsr, ZeroSeedIsRejected) { EXPECT_THROW((void)Lfsr::seed(0), essop::InvalidSeedError); }

TEST(Lfsr, GoldenWords) {
  Lfsr rng(0xACE1);
  for (const auto w : kGoldenAce1) EXPECT_EQ(rng.next_word(), w);
  EXPECT_EQ(rng.draws(), 4u);
}

TEST(Lfsr, MatchesReferenceModelFromManySeeds) {
  for (unsigned seed = 1; seed < 0x10000; seed += 97) {
    Lfsr rng(static_cast<std::uint16_t>(seed));
    essop::testing::ReferenceLfsr ref(static_cast<std::uint16_t>(seed));
    for (int k = 0; k < 8; ++k) ASSERT_EQ(rng.next_word(), ref.next_word()) << seed;
  }
}

TEST(Lfsr, Deterministic) {
  Lfsr a(0x1234);
  Lfsr b(0x1234);
  for (int k = 0; k < 100; ++k) ASSERT_EQ(a.next_word(), b.next_word());
  EXPECT_EQ(a, b);
}

TEST(Lfsr, FullPeriodVisitsEveryNonzeroWordOnce) {
  for (const std::uint16_t seed : {std::uint16_t{0xACE1}, std::uint16_t{0x0001}, std::uint16_t{0xFFFF}}) {
    Lfsr rng(seed);
    std::vector<bool> seen(0x10000, false);
    std::uint32_t n = 0;
    std::uint16_t w = 0;
    do {
      w = rng.next_word();
      ASSERT_NE(w, 0);
      ASSERT_FALSE(seen[w]) << "repeat before full period";
      seen[w] = true;
      ++n;
    } while (w != seed);
    EXPECT_EQ(n, Lfsr::kPeriod);
    EXPECT_EQ(rng.draws(), Lfsr::kPeriod);
  }
}

TEST(Lfsr, PeriodMeanIsNearHalf) {
  Lfsr rng(0xACE1);
  double sum = 0.0;
  for (std::uint32_t k = 0; k < Lfsr::kPeriod; ++k) sum += essop::uniform_fraction(rng.next_word());
  EXPECT_NEAR(sum / Lfsr::kPeriod, 0.5, 1e-4);
}

TEST(UniformFraction, Examples) {
  EXPECT_EQ(essop::uniform_fraction(0x0000), 0.0);
  EXPECT_EQ(essop::uniform_fraction(0x8000), 0.5);
  EXPECT_EQ(essop::uniform_fraction(0xFFFF), 65535.0 / 65536.0);
  EXPECT_LT(essop::uniform_fraction(0xFFFF), 1.0);
}

TEST(SeedSchedule, DistinctAndDeterministic) {
  const essop::SeedSchedule s(0xACE1, 0x1234);
  std::set<std::uint16_t> xs;
  for (std::uint64_t c = 0; c < 1000; ++c) {
    const auto [sx, sd] = s.seeds(c);
    ASSERT_NE(sx, 0);
    ASSERT_NE(sd, 0);
    ASSERT_NE(sx, sd);
    EXPECT_EQ(s.seeds(c), std::make_pair(sx, sd));
    xs.insert(sx);
  }
  // 16-bit seeds collide by the birthday bound (about 7.6 expected here), not more.
  EXPECT_GE(xs.size(), 980u);
}

TEST(SeedSchedule, SeedPairsAreNotLinearlyTied) {
  // A linear derivation would make seed_x ^ seed_delta the same for every call.
  const essop::SeedSchedule s(0xACE1, 0x1234);
  std::set<std::uint16_t> diffs;
  for (std::uint64_t c = 0; c < 200; ++c) {
    const auto [sx, sd] = s.seeds(c);
    diffs.insert(static_cast<std::uint16_t>(sx ^ sd));
  }
  EXPECT_GT(diffs.size(), 190u);
}

TEST(SeedSchedule, RejectsBadBases) {
  EXPECT_THROW(essop::SeedSchedule(0, 1), essop::InvalidSeedError);
  EXPECT_THROW(essop::SeedSchedule(5, 5), essop::InvalidSeedError);
}
