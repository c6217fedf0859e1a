#include "cvbroadcast/gaussian.hpp"

#include <cmath>
#include <algorithm>
#include <complex>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cvbroadcast/errors.hpp"

namespace cvb {

namespace {

Eigen::Matrix2d single_mode_j() {
  Eigen::Matrix2d j;
  j << 0.0, 1.0, -1.0, 0.0;
  return j;
}

void require_modes(const GaussianState& state, std::size_t mode) {
  if (mode >= state.n_modes()) {
    throw StructuralError(
        fmt::format("mode index {} out of range for a {}-mode state", mode, state.n_modes()));
  }
}

}  // namespace

SymplecticForm SymplecticForm::standard(std::size_t n_modes) {
  if (n_modes == 0) throw StructuralError("symplectic form needs at least one mode");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
  for (std::size_t i = 0; i < n_modes; ++i) m.block<2, 2>(2 * i, 2 * i) = single_mode_j();
  return SymplecticForm(n_modes, std::move(m));
}

SymplecticForm SymplecticForm::partially_transposed(std::size_t n_modes, std::size_t transposed_mode) {
  if (transposed_mode >= n_modes) {
    throw StructuralError(fmt::format("transposed mode {} out of range", transposed_mode));
  }
  SymplecticForm form = standard(n_modes);
  form.matrix_.block<2, 2>(2 * transposed_mode, 2 * transposed_mode) = single_mode_j().transpose();
  return form;
}

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd m, double symmetry_tol) : matrix_(std::move(m)) {
  if (matrix_.rows() != matrix_.cols()) {
    throw StructuralError(
        fmt::format("covariance matrix must be square, got {}x{}", matrix_.rows(), matrix_.cols()));
  }
  if (matrix_.rows() == 0 || matrix_.rows() % 2 != 0) {
    throw StructuralError(fmt::format("covariance dimension {} is not 2n", matrix_.rows()));
  }
  const double scale = std::max(1.0, matrix_.cwiseAbs().maxCoeff());
  if ((matrix_ - matrix_.transpose()).cwiseAbs().maxCoeff() > symmetry_tol * scale) {
    throw StructuralError("covariance matrix is not symmetric");
  }
}

Eigen::Matrix2d CovarianceMatrix::block(std::size_t i, std::size_t j) const {
  return matrix_.block<2, 2>(2 * i, 2 * j);
}

Eigen::MatrixXd CovarianceMatrix::position_block() const {
  const auto n = static_cast<Eigen::Index>(n_modes());
  Eigen::MatrixXd p(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) p(i, j) = matrix_(2 * i, 2 * j);
  return p;
}

DisplacementVector::DisplacementVector(Eigen::VectorXd v) : vector_(std::move(v)) {
  if (vector_.size() == 0 || vector_.size() % 2 != 0) {
    throw StructuralError(fmt::format("displacement length {} is not 2n", vector_.size()));
  }
}

DisplacementVector DisplacementVector::zero(std::size_t n_modes) {
  return DisplacementVector(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * n_modes)));
}

Eigen::VectorXd DisplacementVector::positions() const {
  Eigen::VectorXd x(static_cast<Eigen::Index>(n_modes()));
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = vector_(2 * i);
  return x;
}

GaussianState::GaussianState(CovarianceMatrix cov, DisplacementVector disp, double tol)
    : cov_(std::move(cov)), disp_(std::move(disp)) {
  if (cov_.n_modes() != disp_.n_modes()) {
    throw StructuralError(fmt::format("covariance has {} modes but displacement has {}",
                                      cov_.n_modes(), disp_.n_modes()));
  }
  if (!check_bona_fide(cov_, tol)) {
    throw DomainError("covariance matrix violates gamma + iJ >= 0");
  }
}

void SqueezedThermalParams::validate() const {
  if (!(s > 0.0) || !std::isfinite(s)) throw DomainError(fmt::format("squeezing factor s = {} must be > 0", s));
  if (!(n >= 1.0)) throw DomainError(fmt::format("noise factor n = {} must be >= 1", n));
}

double SqueezedThermalParams::squeezing_r() const { return 0.5 * std::log(s); }

SymmetricCoefficients symmetric_coefficients(double a) {
  if (!(a >= 1.0)) throw DomainError(fmt::format("entanglement parameter a = {} must be >= 1", a));
  // Radicand is exactly 1 at a = 1; clamp the rounding band so it cannot go negative.
  const double a_eff = a <= 1.0 + 1e-12 ? 1.0 : a;
  const double radical = std::sqrt(9.0 * a_eff * a_eff - 8.0);
  return {a_eff, (5.0 * a_eff - radical) / 4.0, (a_eff - radical) / 4.0, radical};
}

namespace {

Eigen::MatrixXd symmetric_covariance(const SymmetricCoefficients& k) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) {
        g(2 * i, 2 * i) = k.a;
        g(2 * i + 1, 2 * i + 1) = k.b;
      } else {
        g(2 * i, 2 * j) = k.c;
        g(2 * i + 1, 2 * j + 1) = -k.c;
      }
    }
  }
  return g;
}

}  // namespace

GaussianState make_pure_symmetric_state(double a) {
  const auto k = symmetric_coefficients(a);
  return GaussianState(CovarianceMatrix(symmetric_covariance(k)), DisplacementVector::zero(3));
}

GaussianState make_thermal_symmetric_state(double a, double n) {
  if (!(n >= 1.0) || !std::isfinite(n)) throw DomainError(fmt::format("noise factor n = {} must be >= 1", n));
  const auto k = symmetric_coefficients(a);
  return GaussianState(CovarianceMatrix(n * symmetric_covariance(k)), DisplacementVector::zero(3));
}

GaussianState set_primitive_displacement(const GaussianState& state, double x0) {
  if (state.n_modes() != 3) throw StructuralError("primitive displacement needs a 3-mode state");
  if (!(x0 > 0.0)) throw DomainError(fmt::format("x0 = {} must be > 0", x0));
  Eigen::VectorXd d = Eigen::VectorXd::Zero(6);
  for (int i = 0; i < 3; ++i) d(2 * i) = -x0 / 3.0;
  return GaussianState(state.cov(), DisplacementVector(std::move(d)));
}

Eigen::MatrixXd tritter_matrix() {
  const double r3 = 1.0 / std::sqrt(3.0);
  const double r23 = std::sqrt(2.0 / 3.0);
  const double r6 = 1.0 / std::sqrt(6.0);
  const double r2 = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXd t(6, 6);
  // clang-format off
  t << r3,  0.0, r23,  0.0, 0.0,  0.0,
       0.0, r3,  0.0,  r23, 0.0,  0.0,
       r3,  0.0, -r6,  0.0, r2,   0.0,
       0.0, r3,  0.0,  -r6, 0.0,  r2,
       r3,  0.0, -r6,  0.0, -r2,  0.0,
       0.0, r3,  0.0,  -r6, 0.0,  -r2;
  // clang-format on
  return t;
}

Eigen::MatrixXd squeezed_thermal_inputs(const SqueezedThermalParams& params) {
  params.validate();
  const double s = params.s;
  const double n = params.n;
  Eigen::VectorXd diag(6);
  diag << n * s, n / s, n / s, n * s, n / s, n * s;
  return diag.asDiagonal();
}

Eigen::MatrixXd tritter_output(const Eigen::MatrixXd& tritter, const SqueezedThermalParams& params) {
  if (tritter.rows() != 6 || tritter.cols() != 6) throw StructuralError("tritter must be 6 x 6");
  const Eigen::MatrixXd out = tritter * squeezed_thermal_inputs(params) * tritter.transpose();
  return 0.5 * (out + out.transpose());
}

GaussianState make_noisy_symmetric_state(const SqueezedThermalParams& params) {
  return GaussianState(CovarianceMatrix(tritter_output(tritter_matrix(), params)), DisplacementVector::zero(3));
}

double min_eigenvalue(const CovarianceMatrix& cov, const SymplecticForm& form) {
  if (form.n_modes() != cov.n_modes()) {
    throw StructuralError("symplectic form and covariance disagree on mode count");
  }
  const Eigen::MatrixXcd h = cov.matrix().cast<std::complex<double>>() +
                             std::complex<double>(0.0, 1.0) * form.matrix().cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("Hermitian eigensolver failed");
  return solver.eigenvalues().minCoeff();
}

bool check_bona_fide(const CovarianceMatrix& cov, double tol) {
  return min_eigenvalue(cov, SymplecticForm::standard(cov.n_modes())) >= -tol;
}

bool check_full_inseparability(const CovarianceMatrix& cov, double tol) {
  if (cov.n_modes() != 3) {
    throw StructuralError(fmt::format("full inseparability test needs 3 modes, got {}", cov.n_modes()));
  }
  for (std::size_t mode = 0; mode < 3; ++mode) {
    if (min_eigenvalue(cov, SymplecticForm::partially_transposed(3, mode)) >= -tol) return false;
  }
  return true;
}

GaussianState partial_trace(const GaussianState& state, std::size_t mode) {
  require_modes(state, mode);
  if (state.n_modes() < 2) throw StructuralError("cannot trace out the only mode");
  const auto n = static_cast<Eigen::Index>(state.n_modes());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < 2 * n; ++i)
    if (i / 2 != static_cast<Eigen::Index>(mode)) keep.push_back(i);
  const auto k = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd g(k, k);
  Eigen::VectorXd d(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    d(i) = state.disp().vector()(keep[i]);
    for (Eigen::Index j = 0; j < k; ++j) g(i, j) = state.cov().matrix()(keep[i], keep[j]);
  }
  return GaussianState(CovarianceMatrix(std::move(g)), DisplacementVector(std::move(d)));
}

GaussianState shift_displacement(const GaussianState& state, std::size_t mode, double k) {
  require_modes(state, mode);
  Eigen::VectorXd d = state.disp().vector();
  d(static_cast<Eigen::Index>(2 * mode)) *= k;
  return GaussianState(state.cov(), DisplacementVector(std::move(d)));
}

nlohmann::json to_json(const GaussianState& state) {
  const auto& g = state.cov().matrix();
  std::vector<double> cov;
  cov.reserve(static_cast<std::size_t>(g.size()));
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) cov.push_back(g(i, j));
  const auto& d = state.disp().vector();
  return {{"n_modes", state.n_modes()},
          {"covariance", cov},
          {"displacement", std::vector<double>(d.data(), d.data() + d.size())}};
}

GaussianState gaussian_state_from_json(const nlohmann::json& j) {
  const auto n = j.at("n_modes").get<std::size_t>();
  const auto cov = j.at("covariance").get<std::vector<double>>();
  const auto disp = j.at("displacement").get<std::vector<double>>();
  const auto dim = static_cast<Eigen::Index>(2 * n);
  if (cov.size() != static_cast<std::size_t>(dim * dim) || disp.size() != static_cast<std::size_t>(dim)) {
    throw StructuralError("state JSON sizes do not match n_modes");
  }
  Eigen::MatrixXd g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index k = 0; k < dim; ++k) g(i, k) = cov[static_cast<std::size_t>(i * dim + k)];
  return GaussianState(CovarianceMatrix(std::move(g)),
                       DisplacementVector(Eigen::Map<const Eigen::VectorXd>(disp.data(), dim)));
}

}  // namespace cvb
