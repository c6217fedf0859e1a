#include "cvbroadcast/chi_square.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <fmt/format.h>

#include "cvbroadcast/errors.hpp"

namespace cvb {

std::size_t rare_category_tolerance(double probability, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(3.0 * probability * static_cast<double>(n))) + 2;
}

ChiSquareResult chi_square_consistency(const std::vector<std::size_t>& observed,
                                       const std::vector<double>& expected, double significance) {
  if (observed.size() != expected.size() || observed.empty()) {
    throw DomainError(fmt::format("{} observed categories vs {} expected", observed.size(), expected.size()));
  }
  if (!(significance > 0.0 && significance < 1.0)) {
    throw DomainError(fmt::format("significance {} outside (0, 1)", significance));
  }
  double mass = 0.0;
  for (double p : expected) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError(fmt::format("expected probability {} invalid", p));
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-9) throw DomainError(fmt::format("expected distribution sums to {}", mass));

  ChiSquareResult out;
  out.total = std::accumulate(observed.begin(), observed.end(), std::size_t{0});
  if (out.total == 0) throw DegenerateInputError("all observed counts are zero");

  std::vector<std::size_t> counts;
  std::vector<double> probs;
  std::size_t kept_total = 0;
  double kept_mass = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double p = expected[i];
    if (p < kRareCategoryProbability) {
      const std::size_t allowed = p == 0.0 ? 0 : rare_category_tolerance(p, out.total);
      if (observed[i] > allowed) {
        out.pass = false;
        out.p_value = 0.0;
        out.reason = fmt::format("category {} has {} observations, {} tolerated", i, observed[i], allowed);
        return out;
      }
      continue;
    }
    counts.push_back(observed[i]);
    probs.push_back(p);
    kept_total += observed[i];
    kept_mass += p;
  }
  if (kept_total == 0 || counts.size() < 2) return out;
  for (double& p : probs) p /= kept_mass;

  // Pool categories whose expected count is below 5 into one bin; if the pool
  // is still too small, merge it into the smallest remaining category.
  const double n = static_cast<double>(kept_total);
  std::vector<double> e_bins;
  std::vector<double> o_bins;
  double pool_e = 0.0;
  double pool_o = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = probs[i] * n;
    if (e < 5.0) {
      pool_e += e;
      pool_o += static_cast<double>(counts[i]);
    } else {
      e_bins.push_back(e);
      o_bins.push_back(static_cast<double>(counts[i]));
    }
  }
  if (pool_e > 0.0) {
    if (pool_e >= 5.0 || e_bins.empty()) {
      e_bins.push_back(pool_e);
      o_bins.push_back(pool_o);
    } else {
      const auto smallest = static_cast<std::size_t>(std::min_element(e_bins.begin(), e_bins.end()) - e_bins.begin());
      e_bins[smallest] += pool_e;
      o_bins[smallest] += pool_o;
    }
  }
  if (e_bins.size() < 2) return out;

  for (std::size_t i = 0; i < e_bins.size(); ++i) {
    const double d = o_bins[i] - e_bins[i];
    out.statistic += d * d / e_bins[i];
  }
  out.degrees_of_freedom = e_bins.size() - 1;
  const boost::math::chi_squared dist(static_cast<double>(out.degrees_of_freedom));
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  if (out.p_value < significance) {
    out.pass = false;
    out.reason = fmt::format("chi2 = {:.6g} with {} dof, p = {:.3g}", out.statistic, out.degrees_of_freedom,
                             out.p_value);
  }
  return out;
}

}  // namespace cvb
