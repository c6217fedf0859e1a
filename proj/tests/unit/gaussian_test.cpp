#include <cmath>

#include <gtest/gtest.h>

#include "cvbroadcast/errors.hpp"
#include "cvbroadcast/gaussian.hpp"

namespace cvb {
namespace {

TEST(SymmetricState, EntriesAtWorkPoint) {
  const auto k = symmetric_coefficients(1.5);
  const double r = std::sqrt(9.0 * 2.25 - 8.0);
  EXPECT_DOUBLE_EQ(k.radical, r);
  EXPECT_DOUBLE_EQ(k.b, (7.5 - r) / 4.0);
  EXPECT_DOUBLE_EQ(k.c, (1.5 - r) / 4.0);
  const auto g = make_pure_symmetric_state(1.5).cov().matrix();
  EXPECT_DOUBLE_EQ(g(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(g(1, 1), k.b);
  EXPECT_DOUBLE_EQ(g(0, 2), k.c);
  EXPECT_DOUBLE_EQ(g(1, 3), -k.c);
  EXPECT_DOUBLE_EQ(g(0, 1), 0.0);
}

TEST(SymmetricState, VacuumAtAEqualsOne) {
  const auto g = make_pure_symmetric_state(1.0).cov().matrix();
  EXPECT_NEAR((g - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(SymmetricState, RejectsABelowOne) {
  EXPECT_THROW(make_pure_symmetric_state(0.999), DomainError);
  EXPECT_THROW(make_thermal_symmetric_state(1.5, 0.9), DomainError);
}

TEST(SymmetricState, PureStateSaturatesUncertainty) {
  for (double a : {1.0, 1.2, 1.5, 3.0, 100.0}) {
    const auto cov = make_pure_symmetric_state(a).cov();
    EXPECT_TRUE(check_bona_fide(cov));
    EXPECT_NEAR(min_eigenvalue(cov, SymplecticForm::standard(3)), 0.0, 1e-9) << "a=" << a;
  }
}

TEST(SymmetricState, ThermalStateIsMixed) {
  const auto cov = make_thermal_symmetric_state(1.5, 2.0).cov();
  EXPECT_GT(min_eigenvalue(cov, SymplecticForm::standard(3)), 0.1);
}

TEST(Covariance, RejectsMalformedMatrices) {
  EXPECT_THROW(CovarianceMatrix(Eigen::MatrixXd::Identity(3, 3)), StructuralError);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
  m(0, 1) = 0.5;
  EXPECT_THROW(CovarianceMatrix{m}, StructuralError);
  EXPECT_THROW(DisplacementVector(Eigen::VectorXd::Zero(3)), StructuralError);
}

TEST(Covariance, UnphysicalStateRejected) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2) * 0.5;
  EXPECT_FALSE(check_bona_fide(CovarianceMatrix(m)));
  EXPECT_THROW(GaussianState(CovarianceMatrix(m), DisplacementVector::zero(1)), DomainError);
}

TEST(Tritter, OrthogonalAndSymplectic) {
  const auto t = tritter_matrix();
  const auto j = SymplecticForm::standard(3).matrix();
  EXPECT_LE((t * t.transpose() - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((t * j * t.transpose() - j).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Tritter, ReproducesThermalSymmetricStateForWeakSqueezing) {
  for (double s : {0.1, 0.25, 0.5, 0.8, 1.0}) {
    for (double n : {1.0, 1.5, 2.0, 5.0}) {
      const SqueezedThermalParams p{s, n};
      const auto out = tritter_output(tritter_matrix(), p);
      const auto target = make_thermal_symmetric_state(p.a(), n).cov().matrix();
      EXPECT_LE((out - target).cwiseAbs().maxCoeff(), 1e-12) << "s=" << s << " n=" << n;
    }
  }
}

TEST(Tritter, StrongSqueezingGivesPartnerRoot) {
  // s = 4: a = 3/2, but the off-diagonal entry is (a + R) / 4 instead of (a - R) / 4.
  const SqueezedThermalParams p{4.0, 2.0};
  const double a = p.a();
  const double r = std::sqrt(9.0 * a * a - 8.0);
  const auto out = tritter_output(tritter_matrix(), p);
  EXPECT_NEAR(out(0, 0), 2.0 * a, 1e-12);
  EXPECT_NEAR(out(0, 2), 2.0 * (a + r) / 4.0, 1e-12);
  EXPECT_NEAR(out(1, 3), -2.0 * (a + r) / 4.0, 1e-12);
}

TEST(Tritter, IntermediateSqueezingLeavesDomain) {
  EXPECT_LT((SqueezedThermalParams{1.5, 1.0}).a(), 1.0);
}

TEST(SqueezedThermal, Validation) {
  EXPECT_THROW((SqueezedThermalParams{0.0, 1.0}).validate(), DomainError);
  EXPECT_THROW((SqueezedThermalParams{1.0, 0.5}).validate(), DomainError);
  const SqueezedThermalParams p{0.5, 2.0};
  EXPECT_DOUBLE_EQ(p.mean_thermal_photons(), 0.5);
  EXPECT_DOUBLE_EQ(p.global_purity(), 0.125);
  EXPECT_NEAR(p.squeezing_r(), 0.5 * std::log(0.5), 1e-15);
}

TEST(Inseparability, ThresholdAtAEqualsOne) {
  EXPECT_FALSE(check_full_inseparability(make_pure_symmetric_state(1.0).cov()));
  EXPECT_TRUE(check_full_inseparability(make_pure_symmetric_state(1.0001).cov()));
  EXPECT_TRUE(check_full_inseparability(make_pure_symmetric_state(10.0).cov()));
}

TEST(Inseparability, RequiresThreeModes) {
  const CovarianceMatrix two(Eigen::MatrixXd::Identity(4, 4));
  EXPECT_THROW(check_full_inseparability(two), StructuralError);
}

TEST(Displacement, PrimitiveAndShift) {
  const auto st = set_primitive_displacement(make_pure_symmetric_state(1.5), 3.0);
  for (std::size_t m = 0; m < 3; ++m) EXPECT_DOUBLE_EQ(st.disp().position(m), -1.0);
  const auto shifted = shift_displacement(st, 1, 3.0);
  EXPECT_DOUBLE_EQ(shifted.disp().position(1), -3.0);
  EXPECT_DOUBLE_EQ(shifted.disp().position(0), -1.0);
  EXPECT_THROW(set_primitive_displacement(make_pure_symmetric_state(1.5), 0.0), DomainError);
}

TEST(PartialTrace, KeepsRemainingBlocks) {
  const auto st = make_pure_symmetric_state(2.0);
  const auto reduced = partial_trace(st, 0);
  ASSERT_EQ(reduced.n_modes(), 2u);
  EXPECT_DOUBLE_EQ(reduced.cov().matrix()(0, 2), st.cov().matrix()(2, 4));
  // A single mode of the pure entangled state is thermal.
  const auto single = partial_trace(reduced, 1);
  EXPECT_GT(single.cov().matrix().determinant(), 1.0);
}

TEST(Json, RoundTrip) {
  const auto st = set_primitive_displacement(make_thermal_symmetric_state(1.5, 2.0), 4.0);
  const auto back = gaussian_state_from_json(to_json(st));
  EXPECT_EQ(back.cov().matrix(), st.cov().matrix());
  EXPECT_EQ(back.disp().vector(), st.disp().vector());
}

}  // namespace
}  // namespace cvb
