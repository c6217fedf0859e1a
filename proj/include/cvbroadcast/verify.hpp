#pragma once

// The acceptance suite: one check per numbered criterion, shared by the
// `verify` command and the acceptance test binary.

#include <cstddef>
#include <string>
#include <vector>

namespace cvb {

struct VerifyOptions {
  bool inject_tritter_fault = false;  // perturbs one tritter entry by 1e-3
  double oracle_tol = 1e-6;           // criterion 5: quadrature target and comparison tolerance
  unsigned threads = 0;               // 0: hardware concurrency
  std::size_t ensemble_seeds = 500;   // criterion 10, per scenario
};

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

CheckResult check_threshold_crossover(const VerifyOptions& o);   // 1
CheckResult check_upper_entanglement(const VerifyOptions& o);    // 2
CheckResult check_limiting_cases(const VerifyOptions& o);        // 3
CheckResult check_degenerate_point(const VerifyOptions& o);      // 4
CheckResult check_oracle_agreement(const VerifyOptions& o);      // 5
CheckResult check_small_k_expansion(const VerifyOptions& o);     // 6
CheckResult check_tritter_identities(const VerifyOptions& o);    // 7
CheckResult check_inseparability(const VerifyOptions& o);        // 8
CheckResult check_monte_carlo(const VerifyOptions& o);           // 9
CheckResult check_protocol_ensembles(const VerifyOptions& o);    // 10
CheckResult check_determinism(const VerifyOptions& o);           // 11

CheckResult run_check(int id, const VerifyOptions& o);
std::vector<CheckResult> run_all_checks(const VerifyOptions& o);

// One line per check: "[PASS] 1 name (0.12 s / 1 s): detail".
std::string format_check(const CheckResult& r);

}  // namespace cvb
