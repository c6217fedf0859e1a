#pragma once

// Gaussian states of n bosonic modes, described by a covariance matrix and a
// displacement vector in the ordering (x1, p1, x2, p2, ..., xn, pn).
//
// Conventions used throughout the library:
//   * vacuum covariance is the identity;
//   * the Wigner function is exp(-(z-d)^T gamma^{-1} (z-d)) / (pi^n sqrt(det gamma)),
//     so the phase-space sampling covariance is gamma / 2;
//   * for the three-player resource, mode 0 belongs to S, mode 1 to R0 and
//     mode 2 to R1.

#include <cstddef>

#include <Eigen/Dense>
#include <json.hpp>

namespace cvb {

inline constexpr double kPsdTolerance = 1e-9;

enum class Mode : std::size_t { S = 0, R0 = 1, R1 = 2 };

constexpr std::size_t index_of(Mode m) { return static_cast<std::size_t>(m); }

class SymplecticForm {
 public:
  // J_n = (+) [[0, 1], [-1, 0]].
  static SymplecticForm standard(std::size_t n_modes);
  // Same as standard() but with J^T on `transposed_mode`: the form whose
  // positivity test against gamma is the partial-transpose (NPT) test.
  static SymplecticForm partially_transposed(std::size_t n_modes, std::size_t transposed_mode);

  std::size_t n_modes() const { return n_modes_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

 private:
  SymplecticForm(std::size_t n_modes, Eigen::MatrixXd m) : n_modes_(n_modes), matrix_(std::move(m)) {}

  std::size_t n_modes_;
  Eigen::MatrixXd matrix_;
};

// 2n x 2n real symmetric matrix. Physicality is not enforced here; see
// check_bona_fide().
class CovarianceMatrix {
 public:
  // Throws StructuralError if the matrix is not square, has odd dimension,
  // or is not symmetric within `symmetry_tol` (relative to its max entry).
  explicit CovarianceMatrix(Eigen::MatrixXd m, double symmetry_tol = 1e-9);

  std::size_t n_modes() const { return static_cast<std::size_t>(matrix_.rows()) / 2; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

  // 2x2 block (i, j) of mode indices.
  Eigen::Matrix2d block(std::size_t i, std::size_t j) const;
  // n x n matrix of position-position covariances.
  Eigen::MatrixXd position_block() const;

 private:
  Eigen::MatrixXd matrix_;
};

class DisplacementVector {
 public:
  // Throws StructuralError for odd or empty length.
  explicit DisplacementVector(Eigen::VectorXd v);
  static DisplacementVector zero(std::size_t n_modes);

  std::size_t n_modes() const { return static_cast<std::size_t>(vector_.size()) / 2; }
  const Eigen::VectorXd& vector() const { return vector_; }
  double position(std::size_t mode) const { return vector_(2 * mode); }
  Eigen::VectorXd positions() const;

 private:
  Eigen::VectorXd vector_;
};

class GaussianState {
 public:
  // Throws StructuralError on a mode-count mismatch and DomainError if the
  // covariance fails the bona fide test.
  GaussianState(CovarianceMatrix cov, DisplacementVector disp, double tol = kPsdTolerance);

  std::size_t n_modes() const { return cov_.n_modes(); }
  const CovarianceMatrix& cov() const { return cov_; }
  const DisplacementVector& disp() const { return disp_; }

 private:
  CovarianceMatrix cov_;
  DisplacementVector disp_;
};

// Single-mode squeezed thermal inputs before the tritter: mode 1 gets
// diag(n s, n / s), modes 2 and 3 get diag(n / s, n s).
//
// The tritter output equals n gamma(a) with a = (s^2 + 2) / (3s) only for
// s <= 1 (r <= 0). For s > sqrt(2) the same inputs give the partner pure state
// with c = (a + sqrt(9a^2 - 8)) / 4 > 0, and for 1 < s < 2 the value a drops
// below 1. make_thermal_symmetric_state builds n gamma(a) directly.
struct SqueezedThermalParams {
  double s = 1.0;  // squeezing factor exp(2r), > 0
  double n = 1.0;  // thermal noise factor, >= 1

  void validate() const;  // DomainError on s <= 0 or n < 1
  double a() const { return (s * s + 2.0) / (3.0 * s); }
  double squeezing_r() const;
  double mean_thermal_photons() const { return (n - 1.0) / 2.0; }
  double global_purity() const { return 1.0 / (n * n * n); }
};

// Entries a, b, c of gamma(a) and the shared radical sqrt(9a^2 - 8).
struct SymmetricCoefficients {
  double a;
  double b;
  double c;
  double radical;
};

SymmetricCoefficients symmetric_coefficients(double a);

GaussianState make_pure_symmetric_state(double a);
// n * gamma(a) with zero displacement.
GaussianState make_thermal_symmetric_state(double a, double n);
GaussianState set_primitive_displacement(const GaussianState& state, double x0);
Eigen::MatrixXd tritter_matrix();
// Block-diagonal input covariance of the three squeezed thermal modes.
Eigen::MatrixXd squeezed_thermal_inputs(const SqueezedThermalParams& params);
// tritter * inputs * tritter^T, symmetrized; no physicality check.
Eigen::MatrixXd tritter_output(const Eigen::MatrixXd& tritter, const SqueezedThermalParams& params);
GaussianState make_noisy_symmetric_state(const SqueezedThermalParams& params);

double min_eigenvalue(const CovarianceMatrix& cov, const SymplecticForm& form);
bool check_bona_fide(const CovarianceMatrix& cov, double tol = kPsdTolerance);
bool check_full_inseparability(const CovarianceMatrix& cov, double tol = kPsdTolerance);

GaussianState partial_trace(const GaussianState& state, std::size_t mode);
// Multiplies the position displacement of `mode` by k. On a state carrying
// the primitive displacement this maps -x0/3 to -k x0/3.
GaussianState shift_displacement(const GaussianState& state, std::size_t mode, double k);

// Fixture schema: {"n_modes": n, "covariance": [row-major 4n^2], "displacement": [2n]}.
nlohmann::json to_json(const GaussianState& state);
GaussianState gaussian_state_from_json(const nlohmann::json& j);

}  // namespace cvb
