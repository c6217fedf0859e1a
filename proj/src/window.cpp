#include "cvbroadcast/window.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "cvbroadcast/errors.hpp"

namespace cvb {

namespace {

Eigen::Matrix3d pattern_map(std::size_t index, BitConvention convention) {
  const SignPattern s = pattern_from_index(index);
  const double ss = signed_outcome(s[0], 1.0, convention);
  const double s0 = signed_outcome(s[1], 1.0, convention);
  const double s1 = signed_outcome(s[2], 1.0, convention);
  Eigen::Matrix3d m;
  m << ss, 0.0, 0.0, s0, s0, 0.0, s1, 0.0, s1;
  return m;
}

void validate_window(const AcceptanceWindow& w) {
  w.validate();
  if (!std::isfinite(w.delta_max)) throw DomainError("windowed statistics need a finite delta_max");
  if (!(w.delta_max > w.delta_min)) throw DomainError("window has zero volume (delta_max == delta_min)");
  if (w.x0 - w.sender_halfwidth() + w.delta_min < 0.0) throw DomainError("window reaches negative magnitudes");
}

double log_truncated_exponential_mass(double rate, double length) {
  const double r = std::abs(rate);
  if (r * length < 1e-12) return std::log(length);
  return std::log(-std::expm1(-r * length) / r);
}

}  // namespace

WindowedSampler::WindowedSampler(const GaussianState& state, double sigma, const AcceptanceWindow& window,
                                 BitConvention convention)
    : window_(window) {
  validate_window(window);
  const OutcomeDistribution dist(state, sigma);
  const Eigen::LDLT<Eigen::Matrix3d> cov_solver(dist.covariance);
  if (cov_solver.info() != Eigen::Success || !(dist.covariance.determinant() > 0.0)) {
    throw NumericalError("outcome covariance is not positive definite");
  }
  const Eigen::Matrix3d precision = cov_solver.solve(Eigen::Matrix3d::Identity());
  const double w = window.sender_halfwidth();
  lo_ = {window.x0 - w, window.delta_min, window.delta_min};
  hi_ = {window.x0 + w, window.delta_max, window.delta_max};

  std::array<double, 8> log_mass{};
  for (std::size_t p = 0; p < 8; ++p) {
    PatternBox& box = boxes_[p];
    box.map = pattern_map(p, convention);
    box.hessian = box.map.transpose() * precision * box.map;
    const Eigen::Vector3d linear = box.map.transpose() * precision * dist.mean;
    auto half_q = [&](const Eigen::Vector3d& y) {
      const Eigen::Vector3d d = box.map * y - dist.mean;
      return 0.5 * d.dot(precision * d);
    };

    // Convex box minimum: try every active set (lower, upper, free per coordinate).
    double best = std::numeric_limits<double>::infinity();
    for (int code = 0; code < 27; ++code) {
      int c = code;
      std::array<int, 3> state_of{};
      for (int i = 0; i < 3; ++i) {
        state_of[static_cast<std::size_t>(i)] = c % 3;
        c /= 3;
      }
      Eigen::Vector3d y = Eigen::Vector3d::Zero();
      std::vector<int> free;
      for (int i = 0; i < 3; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (state_of[ui] == 0) y(i) = lo_[ui];
        else if (state_of[ui] == 1) y(i) = hi_[ui];
        else free.push_back(i);
      }
      if (!free.empty()) {
        const auto k = static_cast<Eigen::Index>(free.size());
        Eigen::MatrixXd hff(k, k);
        Eigen::VectorXd rhs(k);
        for (Eigen::Index r = 0; r < k; ++r) {
          rhs(r) = linear(free[static_cast<std::size_t>(r)]);
          for (int j = 0; j < 3; ++j) {
            if (state_of[static_cast<std::size_t>(j)] != 2) rhs(r) -= box.hessian(free[static_cast<std::size_t>(r)], j) * y(j);
          }
          for (Eigen::Index s = 0; s < k; ++s) {
            hff(r, s) = box.hessian(free[static_cast<std::size_t>(r)], free[static_cast<std::size_t>(s)]);
          }
        }
        const Eigen::VectorXd sol = hff.ldlt().solve(rhs);
        bool feasible = true;
        for (Eigen::Index r = 0; r < k; ++r) {
          const auto fi = static_cast<std::size_t>(free[static_cast<std::size_t>(r)]);
          if (sol(r) < lo_[fi] || sol(r) > hi_[fi]) feasible = false;
          y(free[static_cast<std::size_t>(r)]) = sol(r);
        }
        if (!feasible) continue;
      }
      const double v = half_q(y);
      if (v < best) {
        best = v;
        box.minimizer = y;
      }
    }
    box.gradient = box.hessian * box.minimizer - linear;

    double lm = -best;
    for (int i = 0; i < 3; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double g = box.gradient(i);
      const double edge = g >= 0.0 ? lo_[ui] : hi_[ui];
      lm += -g * (edge - box.minimizer(i)) + log_truncated_exponential_mass(g, hi_[ui] - lo_[ui]);
    }
    log_mass[p] = lm;
  }

  const double top = *std::max_element(log_mass.begin(), log_mass.end());
  double total = 0.0;
  for (std::size_t p = 0; p < 8; ++p) {
    envelope_share_[p] = std::exp(log_mass[p] - top);
    total += envelope_share_[p];
  }
  double run = 0.0;
  for (std::size_t p = 0; p < 8; ++p) {
    envelope_share_[p] /= total;
    run += envelope_share_[p];
    cumulative_[p] = run;
  }
  cumulative_[7] = 1.0;
}

OutcomeTriple WindowedSampler::draw(const std::function<double()>& uniform) const {
  for (;;) {
    const double pick = uniform();
    std::size_t p = 0;
    while (p < 7 && pick >= cumulative_[p]) ++p;
    const PatternBox& box = boxes_[p];

    Eigen::Vector3d y;
    for (int i = 0; i < 3; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double length = hi_[ui] - lo_[ui];
      const double g = box.gradient(i);
      const double r = std::abs(g);
      const double u = uniform();
      if (r * length < 1e-12) {
        y(i) = lo_[ui] + u * length;
      } else {
        const double s = -std::log1p(u * std::expm1(-r * length)) / r;
        y(i) = g > 0.0 ? lo_[ui] + s : hi_[ui] - s;
      }
    }
    const Eigen::Vector3d d = y - box.minimizer;
    const double log_accept = -0.5 * d.dot(box.hessian * d);
    if (std::log(uniform()) < log_accept) {
      const Eigen::Vector3d x = box.map * y;
      return {x(0), x(1), x(2)};
    }
  }
}

WindowStatistics window_statistics(double a, double n, double sigma, const Eigen::Vector3d& mean,
                                   const AcceptanceWindow& window, BitConvention convention, double rel_tol) {
  using boost::math::quadrature::gauss_kronrod;
  validate_window(window);
  if (!(n >= 1.0)) throw DomainError(fmt::format("noise factor n = {} must be >= 1", n));
  if (!(sigma >= 0.0)) throw DomainError(fmt::format("sigma = {} must be >= 0", sigma));
  const auto k = symmetric_coefficients(a);
  const double s2 = sigma * sigma;
  const double k1 = n * (3.0 * k.a - k.radical) / 2.0 + s2;
  const double k2 = n * (3.0 * k.a + k.radical) / 4.0 + s2;
  const double log_norm = -1.5 * std::log(std::numbers::pi) - 0.5 * std::log(k1) - std::log(k2);

  auto q = [&](const Eigen::Vector3d& x) {
    const Eigen::Vector3d d = x - mean;
    const double along = d.sum();
    const double along_sq = along * along / 3.0;
    return along_sq / k1 + (d.squaredNorm() - along_sq) / k2;
  };

  const double w = window.sender_halfwidth();
  const std::array<double, 3> lo{window.x0 - w, window.delta_min, window.delta_min};
  const std::array<double, 3> hi{window.x0 + w, window.delta_max, window.delta_max};
  const Eigen::Vector3d mid(window.x0, 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2]));

  std::array<Eigen::Matrix3d, 8> maps;
  double offset = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < 8; ++p) {
    maps[p] = pattern_map(p, convention);
    offset = std::min(offset, q(maps[p] * mid));
  }

  std::array<double, 8> log_mass{};
  for (std::size_t p = 0; p < 8; ++p) {
    const Eigen::Matrix3d& map = maps[p];
    auto f = [&](double u, double v0, double v1) { return std::exp(offset - q(map * Eigen::Vector3d(u, v0, v1))); };
    const double inner_tol = rel_tol * 0.1;
    double err = 0.0;
    const double val = gauss_kronrod<double, 31>::integrate(
        [&](double u) {
          return gauss_kronrod<double, 31>::integrate(
              [&](double v0) {
                return gauss_kronrod<double, 31>::integrate([&](double v1) { return f(u, v0, v1); }, lo[2], hi[2],
                                                            15, inner_tol);
              },
              lo[1], hi[1], 15, inner_tol);
        },
        lo[0], hi[0], 15, rel_tol, &err);
    if (!(val >= 0.0) || !std::isfinite(val)) {
      throw NumericalError(fmt::format("window integral for pattern {} returned {}", p, val));
    }
    if (err > 1e3 * rel_tol * val && val > 0.0) {
      throw NumericalError(fmt::format("window integral for pattern {} did not converge: {} +- {}", p, val, err));
    }
    log_mass[p] = val > 0.0 ? std::log(val) - offset + log_norm : -std::numeric_limits<double>::infinity();
  }

  WindowStatistics out{conditional_probabilities(JointSignProbabilities::from_log_weights(log_mass)), {}, 0.0};
  for (std::size_t p = 0; p < 8; ++p) {
    out.pattern_mass[p] = std::exp(log_mass[p]);
    out.acceptance_probability += out.pattern_mass[p];
  }
  return out;
}

WindowStatistics window_statistics(double a, double n, double sigma, const AcceptanceWindow& window,
                                   BitConvention convention, double rel_tol) {
  const double m = -window.x0 / 3.0;
  return window_statistics(a, n, sigma, Eigen::Vector3d(m, m, m), window, convention, rel_tol);
}

}  // namespace cvb
