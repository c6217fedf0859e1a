#include "cvbroadcast/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "cvbroadcast/errors.hpp"

namespace cvb {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const double* v, std::size_t n) {
  double m = kNegInf;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

void require_entanglement(double a) {
  if (!(a >= 1.0)) throw DomainError(fmt::format("entanglement parameter a = {} must be >= 1", a));
}

void require_sigma(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw DomainError(fmt::format("measurement uncertainty sigma = {} must be finite and >= 0", sigma));
  }
}

void require_nonnegative(const char* name, double v) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError(fmt::format("{} = {} must be finite and >= 0", name, v));
}

std::size_t zero_count(std::size_t index) {
  std::size_t zeros = 0;
  for (std::size_t bit = 0; bit < 3; ++bit) zeros += ((index >> bit) & 1u) == 0 ? 1 : 0;
  return zeros;
}

}  // namespace

SigmaModel SigmaModel::fixed(double sigma) {
  require_sigma(sigma);
  return SigmaModel(Kind::Fixed, sigma);
}

SigmaModel SigmaModel::proportional(double ratio) {
  if (!(ratio >= 0.0) || !std::isfinite(ratio)) {
    throw DomainError(fmt::format("sigma ratio = {} must be finite and >= 0", ratio));
  }
  return SigmaModel(Kind::Proportional, ratio);
}

double SigmaModel::resolve(double x0) const {
  return kind_ == Kind::Fixed ? parameter_ : parameter_ * std::abs(x0);
}

std::string SigmaModel::name() const { return kind_ == Kind::Fixed ? "fixed" : "proportional"; }

Bit bit_for_sign(double outcome, BitConvention convention) {
  const bool positive = outcome >= 0.0;
  if (convention == BitConvention::PositiveIsZero) return positive ? Bit::Zero : Bit::One;
  return positive ? Bit::One : Bit::Zero;
}

double signed_outcome(Bit bit, double magnitude, BitConvention convention) {
  const bool positive = (bit == Bit::Zero) == (convention == BitConvention::PositiveIsZero);
  return positive ? magnitude : -magnitude;
}

void AcceptanceWindow::validate() const {
  if (!(x0 > 0.0) || !std::isfinite(x0)) throw DomainError(fmt::format("window x0 = {} must be > 0", x0));
  if (!(delta_min >= 0.0)) throw DomainError(fmt::format("delta_min = {} must be >= 0", delta_min));
  if (!(delta_max >= delta_min)) {
    throw DomainError(fmt::format("delta_max = {} must be >= delta_min = {}", delta_max, delta_min));
  }
  if (!(sender_bin_fraction > 0.0 && sender_bin_fraction < 1.0)) {
    throw DomainError(fmt::format("sender bin fraction {} must lie in (0, 1)", sender_bin_fraction));
  }
}

bool AcceptanceWindow::sender_accepts(double outcome) const {
  return std::abs(std::abs(outcome) - x0) <= sender_halfwidth();
}

bool AcceptanceWindow::receiver_accepts(double outcome, double reference) const {
  const double shift = std::abs(outcome) - reference;
  return shift >= delta_min && shift <= delta_max;
}

JointSignProbabilities JointSignProbabilities::from_weights(const std::array<double, 8>& w, bool normalized) {
  JointSignProbabilities out;
  for (std::size_t i = 0; i < 8; ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) {
      throw DomainError(fmt::format("joint weight {} = {} must be finite and >= 0", i, w[i]));
    }
    out.weights_[i] = w[i];
    out.log_weights_[i] = w[i] > 0.0 ? std::log(w[i]) : kNegInf;
  }
  if (normalized) {
    const double t = out.total();
    if (std::abs(t - 1.0) > 1e-9) throw DomainError(fmt::format("normalized weights sum to {}", t));
  }
  out.normalized_ = normalized;
  return out;
}

JointSignProbabilities JointSignProbabilities::from_log_weights(const std::array<double, 8>& log_w) {
  JointSignProbabilities out;
  for (std::size_t i = 0; i < 8; ++i) {
    if (std::isnan(log_w[i]) || log_w[i] == std::numeric_limits<double>::infinity()) {
      throw DomainError(fmt::format("log weight {} = {} is not usable", i, log_w[i]));
    }
    out.log_weights_[i] = log_w[i];
    out.weights_[i] = std::exp(log_w[i]);
  }
  return out;
}

double JointSignProbabilities::total() const {
  double t = 0.0;
  for (double w : weights_) t += w;
  return t;
}

double JointSignProbabilities::p_tilde() const { return primitive_mass() / 3.0; }

double JointSignProbabilities::primitive_mass() const {
  double m = 0.0;
  for (std::size_t i : kPrimitivePatterns) m += weights_[i];
  return m;
}

bool JointSignProbabilities::is_symmetric(double rel_tol) const {
  auto close = [&](std::size_t i, std::size_t j) {
    const double li = log_weights_[i];
    const double lj = log_weights_[j];
    if (li == kNegInf || lj == kNegInf) return li == lj;
    return std::abs(li - lj) <= rel_tol;
  };
  return close(3, 5) && close(3, 6) && close(1, 2) && close(1, 4);
}

JointSignProbabilities closed_form_probabilities(double a, double sigma, double x0) {
  require_entanglement(a);
  require_sigma(sigma);
  require_nonnegative("x0", x0);
  const auto k = symmetric_coefficients(a);
  const double s2 = sigma * sigma;
  const double k1 = s2 + (3.0 * k.a - k.radical) / 2.0;
  const double k2 = s2 + (3.0 * k.a + k.radical) / 4.0;

  double log_c = 0.0;
  if (sigma > 0.0) {
    const double inv = 1.0 / s2;
    log_c = std::log(8.0) - std::log(k.a - k.c + s2) - std::log(k.b + k.c + inv) -
            0.5 * (std::log(k.a + 2.0 * k.c + s2) + std::log(k.b - 2.0 * k.c + inv));
  } else {
    // C vanishes like sigma^3; keep the finite sigma^-3 scaled limit.
    log_c = std::log(8.0) - std::log(k2) - 0.5 * std::log(k1);
  }

  const double x2 = x0 * x0;
  const double e_delta1 = -(4.0 / 3.0) * x2 / k1;
  const double e_delta2 = -(16.0 / 3.0) * x2 / k1;
  const double e_delta3 = -4.0 * x2 * (s2 + k.b) / (k1 * k2);
  const double e_p = -(8.0 / 3.0) * x2 / k2;

  std::array<double, 8> log_w{};
  for (std::size_t i = 0; i < 8; ++i) {
    switch (zero_count(i)) {
      case 0: log_w[i] = log_c + e_delta1; break;
      case 1: log_w[i] = log_c + e_p; break;
      case 2: log_w[i] = log_c + e_delta3; break;
      default: log_w[i] = log_c + e_delta2; break;
    }
  }
  return JointSignProbabilities::from_log_weights(log_w);
}

JointSignProbabilities conditional_probabilities(const JointSignProbabilities& raw) {
  std::array<double, 8> lw{};
  for (std::size_t i = 0; i < 8; ++i) lw[i] = raw.log_weight(i);
  const double log_total = log_sum_exp(lw.data(), lw.size());
  if (log_total == kNegInf) throw DegenerateInputError("joint weights have zero total mass");
  std::array<double, 8> w{};
  double sum = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    w[i] = std::exp(lw[i] - log_total);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return JointSignProbabilities::from_weights(w, true);
}

namespace {

// log(3 + 3 e^{l3} + e^{l1} + e^{l2})
double log_denominator(const PTildeTerms& t) {
  const double log3 = std::log(3.0);
  const double v[4] = {log3, log3 + t.log_delta3, t.log_delta1, t.log_delta2};
  return log_sum_exp(v, 4);
}

}  // namespace

namespace {

// Exponents below this are summed directly; above it the log route avoids overflow.
constexpr double kDirectExponentLimit = 600.0;

bool direct_sum_safe(const PTildeTerms& t) {
  return std::max({t.log_delta3, t.log_delta1, t.log_delta2}) < kDirectExponentLimit;
}

double excess_sum(const PTildeTerms& t) {
  return 3.0 * std::exp(t.log_delta3) + std::exp(t.log_delta1) + std::exp(t.log_delta2);
}

}  // namespace

double PTildeTerms::p_tilde() const {
  if (direct_sum_safe(*this)) return 1.0 / (3.0 + excess_sum(*this));
  return std::exp(-log_denominator(*this));
}

double PTildeTerms::deficit() const {
  // 1/3 - 1/(3+S) = S / (3 (3+S))
  if (direct_sum_safe(*this)) {
    const double s = excess_sum(*this);
    return s / (3.0 * (3.0 + s));
  }
  const double v[3] = {std::log(3.0) + log_delta3, log_delta1, log_delta2};
  const double log_s = log_sum_exp(v, 3);
  return std::exp(log_s - std::log(3.0) - log_denominator(*this));
}

double PTildeTerms::delta1_tilde() const { return std::exp(log_delta1 - log_denominator(*this)); }
double PTildeTerms::delta2_tilde() const { return std::exp(log_delta2 - log_denominator(*this)); }
double PTildeTerms::delta3_tilde() const { return std::exp(log_delta3 - log_denominator(*this)); }

PTildeTerms p_tilde_terms(double a, double n, double sigma, double x0, double delta) {
  require_entanglement(a);
  if (!(n >= 1.0) || !std::isfinite(n)) throw DomainError(fmt::format("noise factor n = {} must be >= 1", n));
  require_sigma(sigma);
  require_nonnegative("x0", x0);
  require_nonnegative("delta", delta);
  const auto k = symmetric_coefficients(a);
  const double r = k.radical;
  const double s2 = sigma * sigma;
  const double x = x0 / std::sqrt(n);
  const double d = delta / std::sqrt(n);

  const double den = 3.0 * (4.0 * s2 * s2 + 9.0 * a * s2 - r * s2 + 4.0);
  PTildeTerms t{};
  t.log_delta3 = -4.0 * (d + x) * (d * (4.0 * s2 + 7.0 * a - 3.0 * r) + (4.0 * s2 + 3.0 * a + r) * x) / den;
  t.log_delta1 = 4.0 * x * (4.0 * (a - r) * d + (4.0 * s2 + 9.0 * a - 5.0 * r) * x) / den;
  t.log_delta2 = -32.0 * (d + x) * (d * (s2 + a) + (s2 + r) * x) / den;
  return t;
}

double p_tilde_general(double a, double n, double sigma, double x0, double delta) {
  return p_tilde_terms(a, n, sigma, x0, delta).p_tilde();
}

JointSignProbabilities shifted_pattern_probabilities(double a, double sigma, double x0, double delta) {
  require_entanglement(a);
  require_sigma(sigma);
  require_nonnegative("x0", x0);
  require_nonnegative("delta", delta);
  const auto k = symmetric_coefficients(a);
  Eigen::Matrix3d m;
  m << k.a, k.c, k.c, k.c, k.a, k.c, k.c, k.c, k.a;
  m += sigma * sigma * Eigen::Matrix3d::Identity();
  const Eigen::LDLT<Eigen::Matrix3d> solver(m);
  const double receiver = x0 + delta;
  const Eigen::Vector3d mu(-x0 / 3.0, -receiver / 3.0, -receiver / 3.0);
  std::array<double, 8> log_w{};
  for (std::size_t i = 0; i < 8; ++i) {
    const SignPattern s = pattern_from_index(i);
    const Eigen::Vector3d centre(signed_outcome(s[0], x0, BitConvention::PositiveIsZero),
                                 signed_outcome(s[1], receiver, BitConvention::PositiveIsZero),
                                 signed_outcome(s[2], receiver, BitConvention::PositiveIsZero));
    const Eigen::Vector3d diff = centre - mu;
    log_w[i] = -diff.dot(solver.solve(diff));
  }
  return JointSignProbabilities::from_log_weights(log_w);
}

double symmetrized_p_tilde(const JointSignProbabilities& raw) {
  const double lp = raw.log_weight(3);
  const double log3 = std::log(3.0);
  const double v[4] = {log3 + lp, log3 + raw.log_weight(1), raw.log_weight(7), raw.log_weight(0)};
  return std::exp(lp - log_sum_exp(v, 4));
}

double approx_p_tilde(double x0, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("the small-k expansion needs sigma > 0");
  const double r = x0 / sigma;
  const double k = std::exp(-(4.0 / 3.0) * r * r);
  return 1.0 / 3.0 - (4.0 / 9.0) * k;
}

double error_bound_eta(double p_tilde) {
  constexpr double third = 1.0 / 3.0;
  if (!(p_tilde >= 0.0) || p_tilde > third * (1.0 + 1e-12)) {
    throw DomainError(fmt::format("p_tilde = {} must lie in [0, 1/3]", p_tilde));
  }
  const double q = std::min(1.0, 3.0 * p_tilde);
  return 1.0 - q * q;
}

double OverlapOracleResult::relative_gap() const {
  if (determinant_value == 0.0) return value == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(value - determinant_value) / std::abs(determinant_value);
}

nlohmann::json OverlapOracleResult::to_json() const {
  return {{"quadrature", value},           {"determinant", determinant_value},
          {"relative_gap", relative_gap()}, {"error_estimate", error_estimate},
          {"x_sector", x_sector},           {"p_sector", p_sector},
          {"evaluations", evaluations}};
}

namespace {

struct SectorIntegral {
  double value = 0.0;
  double error = 0.0;
};

// integral over R^3 of
//   exp(-(y-mu)^T S^{-1} (y-mu)) / (pi^{3/2} sqrt(det S))  *  prod_i exp(-(y_i-m_i)^2/v) / sqrt(pi v)
SectorIntegral integrate_sector(const Eigen::Matrix3d& s, const Eigen::Vector3d& mu, const Eigen::Vector3d& m,
                                double v, const OverlapOracleOptions& opt, std::size_t& evaluations) {
  using boost::math::quadrature::gauss_kronrod;
  const double det = s.determinant();
  if (!(det > 0.0)) throw NumericalError(fmt::format("sector covariance is singular (det = {})", det));
  const Eigen::Matrix3d inv = s.inverse();
  const double norm = 1.0 / (std::pow(std::numbers::pi, 1.5) * std::sqrt(det) * std::pow(std::numbers::pi * v, 1.5));

  // Bounds from the product Gaussian, whose exponent matrix is S^{-1} + I/v.
  const Eigen::Matrix3d precision = inv + Eigen::Matrix3d::Identity() / v;
  const Eigen::Matrix3d spread = precision.inverse();
  const Eigen::Vector3d centre = spread * (inv * mu + m / v);
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
  for (int i = 0; i < 3; ++i) {
    const double sd = std::sqrt(spread(i, i) / 2.0);
    lo[i] = centre(i) - opt.span_sd * sd;
    hi[i] = centre(i) + opt.span_sd * sd;
  }

  auto density = [&](double y0, double y1, double y2) {
    ++evaluations;
    const Eigen::Vector3d d(y0 - mu(0), y1 - mu(1), y2 - mu(2));
    const Eigen::Vector3d e(y0 - m(0), y1 - m(1), y2 - m(2));
    return std::exp(-d.dot(inv * d) - e.squaredNorm() / v);
  };

  const double inner_tol = opt.rel_tol * 0.1;
  double outer_error = 0.0;
  double l1 = 0.0;
  const double raw = gauss_kronrod<double, 31>::integrate(
      [&](double y0) {
        return gauss_kronrod<double, 31>::integrate(
            [&](double y1) {
              return gauss_kronrod<double, 31>::integrate([&](double y2) { return density(y0, y1, y2); }, lo[2],
                                                          hi[2], opt.max_depth, inner_tol);
            },
            lo[1], hi[1], opt.max_depth, inner_tol);
      },
      lo[0], hi[0], opt.max_depth, opt.rel_tol, &outer_error, &l1);
  if (!(raw > 0.0) || !std::isfinite(raw)) {
    throw NumericalError(fmt::format("sector quadrature returned {} (error {})", raw, outer_error));
  }
  if (outer_error > 1e3 * opt.rel_tol * std::abs(raw)) {
    throw NumericalError(
        fmt::format("sector quadrature did not converge: value {} error {} tolerance {}", raw, outer_error,
                    opt.rel_tol));
  }
  return {raw * norm, outer_error * norm};
}

}  // namespace

OverlapOracleResult numeric_overlap_oracle(const GaussianState& state, const MeasurementModel& model,
                                           const SignPattern& signs, double x0,
                                           const OverlapOracleOptions& options) {
  if (state.n_modes() != 3) throw StructuralError("overlap oracle needs a 3-mode state");
  require_nonnegative("x0", x0);
  const double sigma = model.sigma(x0);
  if (!(sigma > 0.0)) throw DomainError("overlap oracle needs sigma > 0");

  const Eigen::MatrixXd& g = state.cov().matrix();
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      if (std::abs(g(2 * i, 2 * j + 1)) > 1e-12 * scale) {
        throw StructuralError("overlap oracle needs uncorrelated position and momentum sectors");
      }

  Eigen::Matrix3d gx;
  Eigen::Matrix3d gp;
  Eigen::Vector3d dx;
  Eigen::Vector3d dp;
  Eigen::Vector3d mx;
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      gx(i, j) = g(2 * i, 2 * j);
      gp(i, j) = g(2 * i + 1, 2 * j + 1);
    }
    dx(i) = state.disp().vector()(2 * i);
    dp(i) = state.disp().vector()(2 * i + 1);
    mx(i) = signed_outcome(signs[static_cast<std::size_t>(i)], x0, model.convention);
  }

  OverlapOracleResult out;
  // Closed overlap: 2^n exp(-D^T (G1+G2)^{-1} D) / sqrt(det(G1+G2)).
  {
    Eigen::MatrixXd sum = g;
    Eigen::VectorXd diff = state.disp().vector();
    for (Eigen::Index i = 0; i < 3; ++i) {
      sum(2 * i, 2 * i) += sigma * sigma;
      sum(2 * i + 1, 2 * i + 1) += 1.0 / (sigma * sigma);
      diff(2 * i) -= mx(i);
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(sum);
    const double det = sum.determinant();
    out.determinant_value = 8.0 * std::exp(-diff.dot(ldlt.solve(diff))) / std::sqrt(det);
  }

  const auto xs = integrate_sector(gx, dx, mx, sigma * sigma, options, out.evaluations);
  const auto ps = integrate_sector(gp, dp, Eigen::Vector3d::Zero(), 1.0 / (sigma * sigma), options, out.evaluations);
  const double two_pi_cubed = std::pow(2.0 * std::numbers::pi, 3);
  out.x_sector = xs.value;
  out.p_sector = ps.value;
  out.value = two_pi_cubed * xs.value * ps.value;
  out.error_estimate = two_pi_cubed * (xs.error * ps.value + ps.error * xs.value);
  return out;
}

OutcomeDistribution::OutcomeDistribution(const GaussianState& state, double sigma) {
  if (state.n_modes() != 3) throw StructuralError("outcome sampling needs a 3-mode state");
  require_sigma(sigma);
  const Eigen::MatrixXd pos = state.cov().position_block();
  covariance = 0.5 * pos + 0.5 * sigma * sigma * Eigen::Matrix3d::Identity();
  mean = state.disp().positions();
  const Eigen::LLT<Eigen::Matrix3d> llt(covariance);
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(covariance);
    const Eigen::Vector3d root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    factor = es.eigenvectors() * root.asDiagonal();
  }
}

}  // namespace cvb
