#pragma once

// Pearson goodness-of-fit test used by every statistical check of the
// protocol.

#include <cstddef>
#include <string>
#include <vector>

namespace cvb {

// Categories below this expected probability are checked by count instead of
// entering the statistic.
inline constexpr double kRareCategoryProbability = 1e-6;

struct ChiSquareResult {
  bool pass = true;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t degrees_of_freedom = 0;
  std::size_t total = 0;
  std::string reason;  // empty on pass
};

// Exact-zero categories fail on any observation. Rare categories tolerate
// ceil(3 p N) + 2 observations and are then dropped, the rest renormalized.
// Categories with expected count below 5 are pooled.
// Throws DomainError for malformed inputs, DegenerateInputError if every
// count is zero.
ChiSquareResult chi_square_consistency(const std::vector<std::size_t>& observed,
                                       const std::vector<double>& expected, double significance);

// Tolerated observations in a rare category out of n draws.
std::size_t rare_category_tolerance(double probability, std::size_t n);

}  // namespace cvb
