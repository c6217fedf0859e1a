#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cvbroadcast/errors.hpp"
#include "cvbroadcast/measurement.hpp"
#include "cvbroadcast/netsim.hpp"

namespace cvb {
namespace {

TEST(BitConvention, SignMapping) {
  EXPECT_EQ(bit_for_sign(2.0, BitConvention::PositiveIsZero), Bit::Zero);
  EXPECT_EQ(bit_for_sign(-2.0, BitConvention::PositiveIsZero), Bit::One);
  EXPECT_EQ(bit_for_sign(2.0, BitConvention::PositiveIsOne), Bit::One);
  EXPECT_DOUBLE_EQ(signed_outcome(Bit::One, 3.0, BitConvention::PositiveIsZero), -3.0);
  EXPECT_DOUBLE_EQ(signed_outcome(Bit::One, 3.0, BitConvention::PositiveIsOne), 3.0);
}

TEST(SigmaModel, Resolve) {
  EXPECT_DOUBLE_EQ(SigmaModel::fixed(0.3).resolve(10.0), 0.3);
  EXPECT_DOUBLE_EQ(SigmaModel::proportional(0.1).resolve(-4.0), 0.4);
  EXPECT_THROW(SigmaModel::fixed(-1.0), DomainError);
  EXPECT_THROW(SigmaModel::proportional(std::nan("")), DomainError);
}

TEST(Window, Acceptance) {
  const AcceptanceWindow w{4.0, 0.0, 1.0, 0.05};
  EXPECT_NO_THROW(w.validate());
  EXPECT_TRUE(w.sender_accepts(-4.1));
  EXPECT_FALSE(w.sender_accepts(4.3));
  EXPECT_TRUE(w.receiver_accepts(-4.5, 4.0));
  EXPECT_FALSE(w.receiver_accepts(3.9, 4.0));
  EXPECT_FALSE(w.receiver_accepts(5.1, 4.0));
  EXPECT_THROW((AcceptanceWindow{4.0, 1.0, 0.5, 0.05}).validate(), DomainError);
  EXPECT_THROW((AcceptanceWindow{0.0, 0.0, 1.0, 0.05}).validate(), DomainError);
}

TEST(ClosedForm, SymmetricAndNamed) {
  const auto w = closed_form_probabilities(1.5, 1.0, 1.0);
  EXPECT_TRUE(w.is_symmetric());
  EXPECT_DOUBLE_EQ(w.p(), w.weight(Bit::Zero, Bit::One, Bit::One));
  EXPECT_DOUBLE_EQ(w.delta1(), w.weight(7));
  EXPECT_DOUBLE_EQ(w.delta2(), w.weight(0));
  EXPECT_DOUBLE_EQ(w.delta3(), w.weight(1));
  const auto c = conditional_probabilities(w);
  EXPECT_TRUE(c.normalized());
  EXPECT_NEAR(c.total(), 1.0, 1e-14);
  EXPECT_NEAR(3.0 * c.p() + 3.0 * c.delta3() + c.delta1() + c.delta2(), 1.0, 1e-14);
}

TEST(ClosedForm, MatchesQuadratureOracle) {
  const double a = 1.5, sigma = 1.0, x0 = 1.0;
  const auto closed = closed_form_probabilities(a, sigma, x0);
  const auto state = set_primitive_displacement(make_pure_symmetric_state(a), x0);
  const MeasurementModel model{SigmaModel::fixed(sigma)};
  for (std::size_t i = 0; i < 8; ++i) {
    const auto q = numeric_overlap_oracle(state, model, pattern_from_index(i), x0);
    EXPECT_NEAR(q.value / closed.weight(i), 1.0, 1e-6) << "pattern " << i;
    EXPECT_LT(q.relative_gap(), 1e-6);
  }
}

TEST(ClosedForm, OracleNeedsPositiveSigma) {
  const auto state = set_primitive_displacement(make_pure_symmetric_state(1.5), 1.0);
  EXPECT_THROW(numeric_overlap_oracle(state, MeasurementModel{}, pattern_from_index(3), 1.0), DomainError);
}

TEST(GeneralPTilde, DegeneratePointIsOneEighth) {
  EXPECT_NEAR(p_tilde_general(1.5, 1.0, 0.0, 0.0, 0.0), 0.125, 1e-12);
  EXPECT_NEAR(p_tilde_general(3.0, 2.0, 0.0, 1e-8, 0.0), 0.125, 1e-12);
}

TEST(GeneralPTilde, AgreesWithShiftedPatternRoute) {
  for (double a : {1.2, 1.5, 3.0}) {
    for (double x0 : {0.5, 2.0, 4.0}) {
      for (double delta : {0.0, 0.5, 2.0}) {
        const double direct = p_tilde_general(a, 1.0, 0.0, x0, delta);
        const double route = symmetrized_p_tilde(shifted_pattern_probabilities(a, 0.0, x0, delta));
        EXPECT_NEAR(direct, route, 1e-12 * std::max(1.0, route)) << a << " " << x0 << " " << delta;
      }
    }
  }
}

TEST(GeneralPTilde, NoiseRescalesDisplacementAndShift) {
  const double n = 2.0;
  EXPECT_NEAR(p_tilde_general(1.5, n, 0.0, 4.0, 1.0),
              p_tilde_general(1.5, 1.0, 0.0, 4.0 / std::sqrt(n), 1.0 / std::sqrt(n)), 1e-15);
}

TEST(GeneralPTilde, DeficitWithoutCancellation) {
  const auto t = p_tilde_terms(1.5, 2.0, 0.0, 4.0, 1.0);
  EXPECT_NEAR(t.deficit(), 1.0 / 3.0 - t.p_tilde(), 1e-15);
  EXPECT_GT(t.deficit(), 0.0);
  EXPECT_LT(t.deficit(), 1e-6);
  const auto far = p_tilde_terms(1e6, 1.0, 0.0, 1.0, 1.5);
  EXPECT_GE(far.deficit(), 0.0);
  EXPECT_LT(far.deficit(), 1e-12);
}

TEST(GeneralPTilde, ThresholdWithoutShiftGivesOneQuarter) {
  // At a = 5 sqrt(2) / 6 and delta = 0 the all-ones exponent vanishes exactly.
  const double a = 5.0 * std::sqrt(2.0) / 6.0;
  EXPECT_NEAR(p_tilde_general(a, 1.0, 0.0, 1e3, 0.0), 0.25, 1e-9);
}

TEST(GeneralPTilde, RejectsOutOfDomain) {
  EXPECT_THROW(p_tilde_general(0.5, 1.0, 0.0, 1.0, 0.0), DomainError);
  EXPECT_THROW(p_tilde_general(1.5, 0.5, 0.0, 1.0, 0.0), DomainError);
  EXPECT_THROW(p_tilde_general(1.5, 1.0, 0.0, -1.0, 0.0), DomainError);
}

TEST(Eta, Bounds) {
  EXPECT_DOUBLE_EQ(error_bound_eta(1.0 / 3.0), 0.0);
  EXPECT_DOUBLE_EQ(error_bound_eta(0.0), 1.0);
  EXPECT_NEAR(error_bound_eta(0.3), 1.0 - 0.81, 1e-15);
  EXPECT_THROW(error_bound_eta(0.4), DomainError);
}

TEST(SmallK, LeadingOrder) {
  EXPECT_NEAR(approx_p_tilde(2.0, 1.0), 1.0 / 3.0 - 4.0 / 9.0 * std::exp(-16.0 / 3.0), 1e-15);
  EXPECT_THROW(approx_p_tilde(1.0, 0.0), DomainError);
}

TEST(OutcomeSampling, MomentsMatch) {
  const auto state = set_primitive_displacement(make_thermal_symmetric_state(1.5, 2.0), 3.0);
  const OutcomeDistribution dist(state, 0.5);
  RngStream rng(42, "moments");
  constexpr int kDraws = 200000;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d second = Eigen::Matrix3d::Zero();
  for (int i = 0; i < kDraws; ++i) {
    const auto t = dist(rng);
    const Eigen::Vector3d x(t.x_s, t.x_r0, t.x_r1);
    mean += x;
    second += x * x.transpose();
  }
  mean /= kDraws;
  const Eigen::Matrix3d cov = second / kDraws - mean * mean.transpose();
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(mean(i), -1.0, 0.02);
  const Eigen::Matrix3d expected = state.cov().position_block() / 2.0 + 0.125 * Eigen::Matrix3d::Identity();
  EXPECT_LE((cov - expected).cwiseAbs().maxCoeff(), 0.03);
}

}  // namespace
}  // namespace cvb
