#pragma once

// Homodyne outcome statistics for the three-mode resource.
//
// Weights for a sign pattern (b_S, b_R0, b_R1) are Gaussian overlap densities
// Tr(rho_M rho), evaluated with each mode projected onto a displaced squeezed
// state of width sigma centred at +x0 for bit 0 and -x0 for bit 1 (default
// convention). Only ratios are physical; the protocol always consumes the
// normalized (conditional) form.

#include <array>
#include <cstddef>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "cvbroadcast/bits.hpp"
#include "cvbroadcast/gaussian.hpp"

namespace cvb {

class SigmaModel {
 public:
  enum class Kind { Fixed, Proportional };

  static SigmaModel fixed(double sigma);
  // sigma = ratio * |x0|
  static SigmaModel proportional(double ratio);

  Kind kind() const { return kind_; }
  double parameter() const { return parameter_; }
  double resolve(double x0) const;
  std::string name() const;

 private:
  SigmaModel(Kind k, double p) : kind_(k), parameter_(p) {}
  Kind kind_;
  double parameter_;
};

enum class BitConvention { PositiveIsZero, PositiveIsOne };

Bit bit_for_sign(double outcome, BitConvention convention);
// Centre of the measurement projector that reports `bit` at magnitude `magnitude`.
double signed_outcome(Bit bit, double magnitude, BitConvention convention);

struct MeasurementModel {
  SigmaModel sigma_model = SigmaModel::fixed(0.0);
  BitConvention convention = BitConvention::PositiveIsZero;

  double sigma(double x0) const { return sigma_model.resolve(x0); }
};

inline constexpr double kDefaultSenderBinFraction = 0.05;

struct AcceptanceWindow {
  double x0 = 1.0;
  double delta_min = 0.0;
  double delta_max = 0.0;
  double sender_bin_fraction = kDefaultSenderBinFraction;

  void validate() const;  // DomainError
  double sender_halfwidth() const { return sender_bin_fraction * x0; }
  bool sender_accepts(double outcome) const;
  // `reference` is the magnitude announced by the sender.
  bool receiver_accepts(double outcome, double reference) const;
};

class JointSignProbabilities {
 public:
  // Weights may be given as logs so that tiny overlaps keep their ratios.
  static JointSignProbabilities from_weights(const std::array<double, 8>& w, bool normalized = false);
  static JointSignProbabilities from_log_weights(const std::array<double, 8>& log_w);

  double weight(std::size_t index) const { return weights_[index]; }
  double weight(Bit s, Bit r0, Bit r1) const { return weights_[pattern_index(s, r0, r1)]; }
  // log of the weight; -inf for an exact zero.
  double log_weight(std::size_t index) const { return log_weights_[index]; }
  const std::array<double, 8>& weights() const { return weights_; }
  bool normalized() const { return normalized_; }
  double total() const;

  // Named entries: p = P(0,1,1), delta1 = P(1,1,1), delta2 = P(0,0,0), delta3 = P(0,0,1).
  double p() const { return weights_[3]; }
  double delta1() const { return weights_[7]; }
  double delta2() const { return weights_[0]; }
  double delta3() const { return weights_[1]; }
  // Mean weight of the three primitive patterns.
  double p_tilde() const;
  double primitive_mass() const;

  bool is_symmetric(double rel_tol = 1e-10) const;

 private:
  JointSignProbabilities() = default;
  std::array<double, 8> weights_{};
  std::array<double, 8> log_weights_{};
  bool normalized_ = false;
};

JointSignProbabilities closed_form_probabilities(double a, double sigma, double x0);
JointSignProbabilities conditional_probabilities(const JointSignProbabilities& raw);

// Three exponents of the general conditional probability, evaluated at the
// noise-rescaled point (x0 / sqrt(n), delta / sqrt(n)).
struct PTildeTerms {
  double log_delta3;  // weight of the two-zero patterns relative to p
  double log_delta1;  // all ones
  double log_delta2;  // all zeros

  double p_tilde() const;
  // 1/3 - p_tilde without cancellation.
  double deficit() const;
  double delta1_tilde() const;
  double delta2_tilde() const;
  double delta3_tilde() const;
};

PTildeTerms p_tilde_terms(double a, double n, double sigma, double x0, double delta);
double p_tilde_general(double a, double n, double sigma, double x0, double delta);

// Raw weights of the eight patterns built directly from the position-sector
// quadratic form, with the sender centred at x0, the receivers at x0 + delta
// and the state displaced by (-x0/3, -(x0+delta)/3, -(x0+delta)/3). Noise is
// not applied here; pass rescaled x0 and delta.
JointSignProbabilities shifted_pattern_probabilities(double a, double sigma, double x0, double delta);
// p / (3p + 3 delta3 + delta1 + delta2) from raw weights.
double symmetrized_p_tilde(const JointSignProbabilities& raw);

double approx_p_tilde(double x0, double sigma);
double error_bound_eta(double p_tilde);

struct OverlapOracleOptions {
  double rel_tol = 1e-6;
  unsigned max_depth = 18;
  double span_sd = 10.0;
};

struct OverlapOracleResult {
  double value = 0.0;              // quadrature route
  double determinant_value = 0.0;  // closed Gaussian-overlap route
  double error_estimate = 0.0;
  double x_sector = 0.0;
  double p_sector = 0.0;
  std::size_t evaluations = 0;

  double relative_gap() const;
  nlohmann::json to_json() const;
};

// Requires sigma > 0 and a covariance without position-momentum correlations
// (the two sectors are integrated separately).
OverlapOracleResult numeric_overlap_oracle(const GaussianState& state, const MeasurementModel& model,
                                           const SignPattern& signs, double x0,
                                           const OverlapOracleOptions& options = {});

struct OutcomeTriple {
  double x_s = 0.0;
  double x_r0 = 0.0;
  double x_r1 = 0.0;

  double operator[](std::size_t mode) const { return mode == 0 ? x_s : (mode == 1 ? x_r0 : x_r1); }
  double& operator[](std::size_t mode) { return mode == 0 ? x_s : (mode == 1 ? x_r0 : x_r1); }
};

// Position-sector outcome distribution: mean = position displacement,
// covariance = (position block)/2 + sigma^2/2 I.
struct OutcomeDistribution {
  Eigen::Vector3d mean;
  Eigen::Matrix3d covariance;
  Eigen::Matrix3d factor;  // factor * factor^T = covariance

  OutcomeDistribution(const GaussianState& state, double sigma);

  template <class URBG>
  OutcomeTriple operator()(URBG& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::Vector3d z;
    for (int i = 0; i < 3; ++i) z(i) = normal(rng);
    const Eigen::Vector3d x = mean + factor * z;
    return {x(0), x(1), x(2)};
  }
};

template <class URBG>
OutcomeTriple sample_outcomes(const GaussianState& state, const MeasurementModel& model, double x0, URBG& rng) {
  return OutcomeDistribution(state, model.sigma(x0))(rng);
}

}  // namespace cvb
