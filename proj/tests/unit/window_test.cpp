#include <cmath>

#include <gtest/gtest.h>

#include "cvbroadcast/chi_square.hpp"
#include "cvbroadcast/errors.hpp"
#include "cvbroadcast/netsim.hpp"
#include "cvbroadcast/window.hpp"

namespace cvb {
namespace {

const AcceptanceWindow kWork{4.0, 0.0, 1.0, 0.05};

TEST(WindowStatistics, WorkPointNearOneThird) {
  const auto s = window_statistics(1.5, 2.0, 0.0, kWork);
  EXPECT_NEAR(s.conditionals.total(), 1.0, 1e-12);
  EXPECT_NEAR(s.conditionals.p_tilde(), 1.0 / 3.0, 1e-5);
  EXPECT_LE(s.conditionals.p_tilde(), 1.0 / 3.0);
  EXPECT_GT(s.acceptance_probability, 0.0);
  EXPECT_LT(s.acceptance_probability, 1e-5);
  double mass = 0.0;
  for (double m : s.pattern_mass) mass += m;
  EXPECT_NEAR(mass / s.acceptance_probability, 1.0, 1e-9);
}

TEST(WindowStatistics, ReceiversSymmetricSenderDistinct) {
  // The receivers' window sits above the sender's bin, so the pattern with the
  // sender alone at bit 0 carries more weight than the other two.
  const auto s = window_statistics(1.5, 2.0, 0.0, kWork);
  EXPECT_NEAR(s.conditionals.weight(5) / s.conditionals.weight(6), 1.0, 1e-9);
  EXPECT_GT(s.conditionals.weight(3), s.conditionals.weight(5));
  EXPECT_NEAR(s.conditionals.weight(1) / s.conditionals.weight(2), 1.0, 1e-9);
}

TEST(WindowStatistics, ConventionSwapsBits) {
  const auto zero = window_statistics(1.5, 2.0, 0.0, kWork, BitConvention::PositiveIsZero);
  const auto one = window_statistics(1.5, 2.0, 0.0, kWork, BitConvention::PositiveIsOne);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(zero.conditionals.weight(i), one.conditionals.weight(7 - i), 1e-12);
}

TEST(WindowedSampler, DrawsStayInsideWindow) {
  const auto state = set_primitive_displacement(make_thermal_symmetric_state(1.5, 2.0), 4.0);
  const WindowedSampler sampler(state, 0.0, kWork);
  RngStream rng(3, "window");
  for (int i = 0; i < 20000; ++i) {
    const auto t = sampler(rng);
    ASSERT_TRUE(kWork.sender_accepts(t.x_s));
    ASSERT_TRUE(kWork.receiver_accepts(t.x_r0, std::abs(t.x_s)));
    ASSERT_TRUE(kWork.receiver_accepts(t.x_r1, std::abs(t.x_s)));
  }
}

TEST(WindowedSampler, FrequenciesMatchIntegratedPatterns) {
  // Off the work point so that error patterns carry visible mass.
  const AcceptanceWindow w{1.0, 0.0, 0.5, 0.05};
  const auto state = set_primitive_displacement(make_thermal_symmetric_state(1.5, 1.0), 1.0);
  const auto stats = window_statistics(1.5, 1.0, 0.0, w);
  const WindowedSampler sampler(state, 0.0, w);
  RngStream rng(5, "window");
  std::vector<std::size_t> counts(8, 0);
  for (int i = 0; i < 200000; ++i) {
    const auto t = sampler(rng);
    counts[pattern_index(bit_for_sign(t.x_s, BitConvention::PositiveIsZero),
                         bit_for_sign(t.x_r0, BitConvention::PositiveIsZero),
                         bit_for_sign(t.x_r1, BitConvention::PositiveIsZero))]++;
  }
  std::vector<double> expected(stats.conditionals.weights().begin(), stats.conditionals.weights().end());
  const auto r = chi_square_consistency(counts, expected, 0.001);
  EXPECT_TRUE(r.pass) << r.reason << " chi2=" << r.statistic;
}

TEST(WindowedSampler, RejectsEmptyWindow) {
  const auto state = set_primitive_displacement(make_thermal_symmetric_state(1.5, 2.0), 4.0);
  EXPECT_THROW(WindowedSampler(state, 0.0, AcceptanceWindow{4.0, 1.0, 1.0, 0.05}), DomainError);
}

}  // namespace
}  // namespace cvb
