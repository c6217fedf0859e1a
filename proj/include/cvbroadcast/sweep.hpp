#pragma once

// Grid evaluation of the general conditional probability and the CSV
// artifacts of the sweep and boundary commands.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvbroadcast/boundary.hpp"
#include "cvbroadcast/measurement.hpp"

namespace cvb {

// "v", "v1,v2,..." or "start:stop:count" (count points, both ends included).
// Throws DomainError on malformed text or a negative count.
std::vector<double> parse_grid(const std::string& text);

struct SweepSpec {
  std::vector<double> a;
  std::vector<double> n;
  std::vector<double> x0;
  std::vector<double> delta;
  SigmaModel sigma = SigmaModel::fixed(0.0);
};

struct SweepRow {
  double a, n, sigma, x0, delta, p_tilde, eta;
};

// Rows in a-major order; grid points outside the domain throw DomainError.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, unsigned threads = 1);

inline constexpr const char* kSweepCsvHeader = "a,n,sigma_model,sigma,x0,delta,p_tilde,eta";
inline constexpr const char* kBoundaryCsvHeader = "a,delta_min,delta_max";

// p_tilde, the three error weights and eta at one point.
nlohmann::ordered_json probability_report(double a, double n, const SigmaModel& sigma, double x0, double delta);

std::string format_number(double v);  // 12 significant digits, inf as "inf"
std::string sweep_csv(const SweepSpec& spec, const std::vector<SweepRow>& rows);
std::string boundary_csv(const std::vector<BoundaryRow>& rows);

}  // namespace cvb
