#include <random>

#include <gtest/gtest.h>

#include "cvbroadcast/chi_square.hpp"
#include "cvbroadcast/errors.hpp"
#include "cvbroadcast/netsim.hpp"

namespace cvb {
namespace {

std::vector<std::size_t> multinomial(const std::vector<double>& p, std::size_t n, RngStream& rng) {
  std::discrete_distribution<std::size_t> dist(p.begin(), p.end());
  std::vector<std::size_t> counts(p.size(), 0);
  for (std::size_t i = 0; i < n; ++i) counts[dist(rng)]++;
  return counts;
}

TEST(ChiSquare, ExactFit) {
  const auto r = chi_square_consistency({250, 250, 500}, {0.25, 0.25, 0.5}, 0.01);
  EXPECT_TRUE(r.pass);
  EXPECT_DOUBLE_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.degrees_of_freedom, 2u);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
}

TEST(ChiSquare, KnownStatistic) {
  // (60-50)^2/50 + (40-50)^2/50 = 4, one degree of freedom: p = 0.0455.
  const auto r = chi_square_consistency({60, 40}, {0.5, 0.5}, 0.01);
  EXPECT_NEAR(r.statistic, 4.0, 1e-12);
  EXPECT_NEAR(r.p_value, 0.0455003, 1e-6);
  EXPECT_TRUE(r.pass);
  EXPECT_FALSE(chi_square_consistency({60, 40}, {0.5, 0.5}, 0.05).pass);
}

TEST(ChiSquare, CalibratedAtOnePercent) {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.25, 0.15};
  int passes = 0;
  constexpr int kSeeds = 1000;
  for (int s = 0; s < kSeeds; ++s) {
    RngStream rng(static_cast<std::uint64_t>(s), "calibration");
    passes += chi_square_consistency(multinomial(p, 10000, rng), p, 0.01).pass ? 1 : 0;
  }
  EXPECT_GE(passes, 980);
  EXPECT_LT(passes, 1000);
}

TEST(ChiSquare, DetectsShiftedDistribution) {
  RngStream rng(1, "power");
  const auto counts = multinomial({0.3, 0.3, 0.4}, 5000, rng);
  EXPECT_FALSE(chi_square_consistency(counts, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.01).pass);
}

TEST(ChiSquare, ZeroProbabilityCategoryFailsOnAnyHit) {
  EXPECT_TRUE(chi_square_consistency({500, 500, 0}, {0.5, 0.5, 0.0}, 0.01).pass);
  const auto r = chi_square_consistency({500, 500, 1}, {0.5, 0.5, 0.0}, 0.01);
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.reason.empty());
}

TEST(ChiSquare, RareCategoryTolerance) {
  EXPECT_EQ(rare_category_tolerance(1e-7, 1000), 3u);
  const double rare = 1e-7;
  const std::vector<double> p{0.5 - rare / 2, 0.5 - rare / 2, rare};
  EXPECT_TRUE(chi_square_consistency({500, 500, 3}, p, 0.01).pass);
  EXPECT_FALSE(chi_square_consistency({500, 500, 4}, p, 0.01).pass);
}

TEST(ChiSquare, SmallExpectationsPooled) {
  // Expected counts 1 and 1 pool into a bin of 2, which merges into the smallest regular bin.
  const auto r = chi_square_consistency({49, 49, 1, 1}, {0.49, 0.49, 0.01, 0.01}, 0.01);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.degrees_of_freedom, 1u);
}

TEST(ChiSquare, MalformedInputs) {
  EXPECT_THROW(chi_square_consistency({1, 2}, {1.0}, 0.01), DomainError);
  EXPECT_THROW(chi_square_consistency({1, 2}, {0.6, 0.6}, 0.01), DomainError);
  EXPECT_THROW(chi_square_consistency({1, 2}, {0.5, 0.5}, 0.0), DomainError);
  EXPECT_THROW(chi_square_consistency({0, 0}, {0.5, 0.5}, 0.01), DegenerateInputError);
}

}  // namespace
}  // namespace cvb
