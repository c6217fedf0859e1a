#pragma once

// Searches over the general conditional probability: the shift interval where
// p_tilde >= 1/3 - epsilon, the matching interval in a at fixed shift, and the
// entanglement threshold where p_tilde overtakes every error pattern.

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "cvbroadcast/measurement.hpp"

namespace cvb {

struct SearchOptions {
  double tolerance = 1e-6;          // absolute, scaled by max(1, |bracket|)
  std::size_t max_iterations = 200;
  double delta_cap_factor = 1e6;    // delta search stops at factor * x0
};

// Bisection on a sign change of f over [lo, hi]. When f(lo) and f(hi) agree
// in sign, hi is doubled (relative to lo) until they differ; NumericalError
// if no change is found within max_iterations.
double bisect_sign_change(const std::function<double(double)>& f, double lo, double hi,
                          const SearchOptions& options = {});

struct BoundaryRow {
  double a = 0.0;
  bool empty = true;
  double delta_min = 0.0;
  std::optional<double> delta_max;  // nullopt: useful beyond the search cap
};

BoundaryRow find_boundary(double a, double n, const SigmaModel& sigma, double x0, double epsilon,
                          const SearchOptions& options = {});
std::vector<BoundaryRow> find_boundary(const std::vector<double>& a_values, double n, const SigmaModel& sigma,
                                       double x0, double epsilon, const SearchOptions& options = {});

struct AInterval {
  double a_min = 0.0;
  std::optional<double> a_max;  // nullopt: useful up to the scan limit
};

// Interval of a in [1, a_limit] with p_tilde >= 1/3 - epsilon at fixed delta.
std::optional<AInterval> find_a_interval(double n, const SigmaModel& sigma, double x0, double delta,
                                         double epsilon, double a_limit = 1e7, const SearchOptions& options = {});

// Smallest a at which p_tilde > max(delta1~, delta2~, delta3~) at fixed x0, delta.
double find_threshold_crossover(double n, const SigmaModel& sigma, double x0, double delta,
                                const SearchOptions& options = {});

}  // namespace cvb
