#include <cmath>

#include <gtest/gtest.h>

#include "cvbroadcast/boundary.hpp"
#include "cvbroadcast/errors.hpp"

namespace cvb {
namespace {

const double kThreshold = 5.0 * std::sqrt(2.0) / 6.0;

TEST(Bisection, FindsRoot) {
  const double r = bisect_sign_change([](double x) { return x * x - 2.0; }, 0.0, 1.0);
  EXPECT_NEAR(r, std::sqrt(2.0), 1e-6);
}

TEST(Bisection, FailsWithoutSignChange) {
  SearchOptions o;
  o.max_iterations = 20;
  EXPECT_THROW(bisect_sign_change([](double) { return 1.0; }, 0.0, 1.0, o), NumericalError);
}

TEST(Threshold, CrossoverAtFiveRootTwoOverSix) {
  EXPECT_NEAR(find_threshold_crossover(1.0, SigmaModel::fixed(0.0), 50.0, 0.0), kThreshold, 1e-3);
}

TEST(Boundary, UnboundedShiftInsideThresholdInterval) {
  const auto row = find_boundary(1.3, 1.0, SigmaModel::fixed(0.0), 50.0, 1e-7);
  ASSERT_FALSE(row.empty);
  EXPECT_EQ(row.delta_min, 0.0);
  EXPECT_FALSE(row.delta_max.has_value());
}

TEST(Boundary, BoundedAboveThreeHalves) {
  const auto row = find_boundary(3.0, 1.0, SigmaModel::fixed(0.0), 5.0, 1e-7);
  ASSERT_FALSE(row.empty);
  ASSERT_TRUE(row.delta_max.has_value());
  EXPECT_GT(*row.delta_max, row.delta_min);
}

TEST(Boundary, EmptyBelowThreshold) {
  const auto row = find_boundary(1.0, 1.0, SigmaModel::fixed(0.0), 50.0, 1e-7);
  EXPECT_TRUE(row.empty);
}

TEST(Boundary, RejectsBadInputs) {
  EXPECT_THROW(find_boundary(1.5, 1.0, SigmaModel::fixed(0.0), 1.0, 0.0), DomainError);
  EXPECT_THROW(find_boundary(1.5, 1.0, SigmaModel::fixed(0.0), -1.0, 1e-7), DomainError);
}

TEST(AInterval, UpperEndpointNearThreeHalves) {
  const auto iv = find_a_interval(1.0, SigmaModel::fixed(0.0), 0.25, 1e3, 1e-7);
  ASSERT_TRUE(iv.has_value());
  ASSERT_TRUE(iv->a_max.has_value());
  EXPECT_NEAR(*iv->a_max, 1.5, 1e-3);
}

TEST(AInterval, NoiseShrinksUsefulRegion) {
  // Proportional measurement noise removes usefulness at moderate x0.
  const auto clean = find_boundary(1.5, 1.0, SigmaModel::fixed(0.0), 4.0, 1e-7);
  const auto noisy = find_boundary(1.5, 1.0, SigmaModel::proportional(0.1), 4.0, 1e-7);
  ASSERT_FALSE(clean.empty);
  if (!noisy.empty) {
    const double clean_max = clean.delta_max.value_or(INFINITY);
    const double noisy_max = noisy.delta_max.value_or(INFINITY);
    EXPECT_LE(noisy_max - noisy.delta_min, clean_max - clean.delta_min);
  }
}

}  // namespace
}  // namespace cvb
