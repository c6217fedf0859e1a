#include "cvbroadcast/boundary.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "cvbroadcast/errors.hpp"

namespace cvb {

namespace {

// Grid points per decade for the coarse scans that seed each bisection.
constexpr int kScanPerDecade = 40;

std::vector<double> shift_grid(double x0, double cap_factor) {
  std::vector<double> g{0.0};
  const int top = static_cast<int>(std::ceil(std::log10(cap_factor) * kScanPerDecade));
  for (int k = -6 * kScanPerDecade; k <= top; ++k) {
    g.push_back(x0 * std::pow(10.0, static_cast<double>(k) / kScanPerDecade));
  }
  g.back() = x0 * cap_factor;
  return g;
}

std::vector<double> entanglement_grid(double a_limit) {
  std::vector<double> g{1.0};
  const int top = static_cast<int>(std::ceil(std::log10(a_limit - 1.0) * 100));
  for (int k = -600; k <= top; ++k) g.push_back(1.0 + std::pow(10.0, k / 100.0));
  g.back() = a_limit;
  return g;
}

void require_search_inputs(double x0, double epsilon) {
  if (!(x0 > 0.0)) throw DomainError(fmt::format("x0 = {} must be > 0", x0));
  if (!(epsilon > 0.0)) throw DomainError(fmt::format("epsilon = {} must be > 0", epsilon));
}

}  // namespace

double bisect_sign_change(const std::function<double(double)>& f, double lo, double hi,
                          const SearchOptions& options) {
  double flo = f(lo);
  double fhi = f(hi);
  std::size_t iter = 0;
  while ((flo > 0.0) == (fhi > 0.0)) {
    if (++iter > options.max_iterations) {
      throw NumericalError(fmt::format("no sign change found from [{}, {}]", lo, hi));
    }
    const double width = hi - lo;
    lo = hi;
    flo = fhi;
    hi = lo + 2.0 * width;
    fhi = f(hi);
  }
  for (iter = 0; iter < options.max_iterations; ++iter) {
    const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
    if (hi - lo <= options.tolerance * scale) break;
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

BoundaryRow find_boundary(double a, double n, const SigmaModel& sigma, double x0, double epsilon,
                          const SearchOptions& options) {
  require_search_inputs(x0, epsilon);
  const double s = sigma.resolve(x0);
  auto excess = [&](double delta) { return p_tilde_terms(a, n, s, x0, delta).deficit() - epsilon; };
  const auto grid = shift_grid(x0, options.delta_cap_factor);

  BoundaryRow row;
  row.a = a;
  std::size_t first = grid.size();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (excess(grid[i]) <= 0.0) {
      first = i;
      break;
    }
  }
  if (first == grid.size()) return row;
  std::size_t last = first;
  while (last + 1 < grid.size() && excess(grid[last + 1]) <= 0.0) ++last;

  row.empty = false;
  row.delta_min = first == 0 ? 0.0 : bisect_sign_change(excess, grid[first - 1], grid[first], options);
  if (last + 1 < grid.size()) row.delta_max = bisect_sign_change(excess, grid[last], grid[last + 1], options);
  return row;
}

std::vector<BoundaryRow> find_boundary(const std::vector<double>& a_values, double n, const SigmaModel& sigma,
                                       double x0, double epsilon, const SearchOptions& options) {
  std::vector<BoundaryRow> rows;
  rows.reserve(a_values.size());
  for (double a : a_values) rows.push_back(find_boundary(a, n, sigma, x0, epsilon, options));
  return rows;
}

std::optional<AInterval> find_a_interval(double n, const SigmaModel& sigma, double x0, double delta,
                                         double epsilon, double a_limit, const SearchOptions& options) {
  require_search_inputs(x0, epsilon);
  if (!(a_limit > 1.0)) throw DomainError(fmt::format("a_limit = {} must exceed 1", a_limit));
  const double s = sigma.resolve(x0);
  auto excess = [&](double a) { return p_tilde_terms(a, n, s, x0, delta).deficit() - epsilon; };
  const auto grid = entanglement_grid(a_limit);

  std::size_t first = grid.size();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (excess(grid[i]) <= 0.0) {
      first = i;
      break;
    }
  }
  if (first == grid.size()) return std::nullopt;
  std::size_t last = first;
  while (last + 1 < grid.size() && excess(grid[last + 1]) <= 0.0) ++last;

  AInterval out;
  out.a_min = first == 0 ? 1.0 : bisect_sign_change(excess, grid[first - 1], grid[first], options);
  if (last + 1 < grid.size()) out.a_max = bisect_sign_change(excess, grid[last], grid[last + 1], options);
  return out;
}

double find_threshold_crossover(double n, const SigmaModel& sigma, double x0, double delta,
                                const SearchOptions& options) {
  if (!(x0 > 0.0)) throw DomainError(fmt::format("x0 = {} must be > 0", x0));
  const double s = sigma.resolve(x0);
  // Positive while some error pattern is at least as likely as a primitive one.
  auto dominance = [&](double a) {
    const auto t = p_tilde_terms(a, n, s, x0, delta);
    return std::max({t.log_delta1, t.log_delta2, t.log_delta3});
  };
  const auto grid = entanglement_grid(1e7);
  if (dominance(grid.front()) <= 0.0) return grid.front();
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (dominance(grid[i]) <= 0.0) return bisect_sign_change(dominance, grid[i - 1], grid[i], options);
  }
  throw NumericalError("p_tilde never overtakes the error patterns below a = 1e7");
}

}  // namespace cvb
