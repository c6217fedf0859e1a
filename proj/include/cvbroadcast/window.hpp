#pragma once

// Outcome statistics restricted to the acceptance window: the sender's
// magnitude lies within the sender bin around x0 and each receiver's
// magnitude exceeds the sender's by a shift in [delta_min, delta_max].

#include <array>
#include <functional>
#include <random>

#include <Eigen/Dense>

#include "cvbroadcast/bits.hpp"
#include "cvbroadcast/gaussian.hpp"
#include "cvbroadcast/measurement.hpp"

namespace cvb {

// Exact sampler of outcome triples conditioned on acceptance. Each sign
// pattern is a box in (|x_S|, shift_R0, shift_R1); the density there is
// dominated by the tangent-plane envelope at its box minimum, which is a
// product of truncated exponentials. Draws are envelope proposals accepted
// with probability exp(-(y-y*)^T H (y-y*) / 2).
class WindowedSampler {
 public:
  // Throws DomainError for an invalid window or one of zero volume.
  WindowedSampler(const GaussianState& state, double sigma, const AcceptanceWindow& window,
                  BitConvention convention = BitConvention::PositiveIsZero);

  template <class URBG>
  OutcomeTriple operator()(URBG& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return draw([&] { return unit(rng); });
  }

  // Relative envelope mass of each sign pattern (sums to 1).
  const std::array<double, 8>& pattern_envelope() const { return envelope_share_; }
  const AcceptanceWindow& window() const { return window_; }

 private:
  struct PatternBox {
    Eigen::Matrix3d map;       // x = map * y
    Eigen::Matrix3d hessian;   // of Q/2 in y
    Eigen::Vector3d minimizer;
    Eigen::Vector3d gradient;  // of Q/2 at the minimizer
  };

  OutcomeTriple draw(const std::function<double()>& uniform) const;

  AcceptanceWindow window_;
  std::array<double, 3> lo_{};
  std::array<double, 3> hi_{};
  std::array<PatternBox, 8> boxes_{};
  std::array<double, 8> envelope_share_{};
  std::array<double, 8> cumulative_{};
};

struct WindowStatistics {
  JointSignProbabilities conditionals;  // normalized over the eight patterns
  std::array<double, 8> pattern_mass{};  // probability of each accepted pattern
  double acceptance_probability = 0.0;   // total mass of the window
};

// Window-integrated pattern probabilities for covariance n * gamma(a) with
// position means `mean`, from the eigen-decomposition of the symmetric
// position block (eigenvalues K1 along (1,1,1), K2 across).
WindowStatistics window_statistics(double a, double n, double sigma, const Eigen::Vector3d& mean,
                                   const AcceptanceWindow& window,
                                   BitConvention convention = BitConvention::PositiveIsZero,
                                   double rel_tol = 1e-9);

// Same with the primitive displacement -x0/3 on every mode.
WindowStatistics window_statistics(double a, double n, double sigma, const AcceptanceWindow& window,
                                   BitConvention convention = BitConvention::PositiveIsZero,
                                   double rel_tol = 1e-9);

}  // namespace cvb
