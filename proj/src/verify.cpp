#include "cvbroadcast/verify.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "cvbroadcast/boundary.hpp"
#include "cvbroadcast/chi_square.hpp"
#include "cvbroadcast/errors.hpp"
#include "cvbroadcast/gaussian.hpp"
#include "cvbroadcast/measurement.hpp"
#include "cvbroadcast/primitive.hpp"
#include "cvbroadcast/protocol.hpp"
#include "cvbroadcast/scenarios.hpp"
#include "cvbroadcast/sweep.hpp"
#include "cvbroadcast/transcript.hpp"
#include "cvbroadcast/window.hpp"

namespace cvb {

namespace {

const double kThreshold = 5.0 * std::sqrt(2.0) / 6.0;

unsigned worker_count(const VerifyOptions& o) {
  if (o.threads > 0) return o.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, count) on `threads` workers.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex lock;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count) return;
      try {
        body(k);
      } catch (...) {
        std::lock_guard<std::mutex> g(lock);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

CheckResult timed(int id, std::string name, double budget, const std::function<void(CheckResult&)>& body) {
  CheckResult r;
  r.id = id;
  r.name = std::move(name);
  r.budget_seconds = budget;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = fmt::format("exception: {}", e.what());
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.pass && r.seconds >= budget) {
    r.pass = false;
    r.detail += fmt::format("; runtime {:.2f} s exceeds {:.0f} s", r.seconds, budget);
  }
  return r;
}

Eigen::MatrixXd faulty_tritter() {
  Eigen::MatrixXd t = tritter_matrix();
  t(0, 0) += 1e-3;
  return t;
}

}  // namespace

CheckResult check_threshold_crossover(const VerifyOptions&) {
  return timed(1, "entanglement threshold", 1.0, [](CheckResult& r) {
    const double a = find_threshold_crossover(1.0, SigmaModel::fixed(0.0), 50.0, 0.0);
    const double err = std::abs(a - kThreshold);
    r.pass = err <= 1e-3;
    r.detail = fmt::format("crossover a = {:.9f}, 5*sqrt(2)/6 = {:.9f}, |diff| = {:.2e} (tol 1e-3)", a, kThreshold, err);
  });
}

CheckResult check_upper_entanglement(const VerifyOptions&) {
  return timed(2, "upper entanglement bound", 5.0, [](CheckResult& r) {
    const auto iv = find_a_interval(1.0, SigmaModel::fixed(0.0), 0.25, 1e3, 1e-7);
    if (!iv || !iv->a_max) {
      r.pass = false;
      r.detail = "no bounded useful a-interval at x0 = 0.25, delta = 1e3";
      return;
    }
    const double err = std::abs(*iv->a_max - 1.5);
    r.pass = err <= 1e-3;
    r.detail = fmt::format("useful a in [{:.6f}, {:.6f}] at x0 = 0.25, delta = 1e3, eps = 1e-7; |a_max - 3/2| = {:.2e} "
                           "(tol 1e-3)",
                           iv->a_min, *iv->a_max, err);
  });
}

CheckResult check_limiting_cases(const VerifyOptions&) {
  return timed(3, "limiting cases", 1.0, [](CheckResult& r) {
    struct Case {
      const char* label;
      double a, x0, delta;
      bool inside;
    };
    const Case cases[] = {
        {"(i) a=1e6, delta=1.5 x0", 1e6, 1.0, 1.5, true},
        {"(i) outside: a=1e6, delta=4 x0", 1e6, 1.0, 4.0, false},
        {"(ii) x0=1e3, a=5sqrt2/6, delta=1", kThreshold, 1e3, 1.0, true},
        {"(ii) outside: x0=1e3, a=1.17, delta=1", 1.17, 1e3, 1.0, false},
        {"(iii) delta=1e3, a=1.4", 1.4, 1.0, 1e3, true},
        {"(iii) outside: delta=1e3, a=1.6", 1.6, 1.0, 1e3, false},
    };
    r.pass = true;
    std::string parts;
    for (const auto& c : cases) {
      const double d = p_tilde_terms(c.a, 1.0, 0.0, c.x0, c.delta).deficit();
      const bool ok = c.inside ? std::abs(d) < 1e-6 : d > 1e-6;
      r.pass = r.pass && ok;
      parts += fmt::format("{}{}: 1/3 - p = {:.3e} {}", parts.empty() ? "" : "; ", c.label, d, ok ? "ok" : "BAD");
    }
    r.detail = parts;
  });
}

CheckResult check_degenerate_point(const VerifyOptions&) {
  return timed(4, "degenerate point", 1.0, [](CheckResult& r) {
    double worst = 0.0;
    for (double a : {1.0, 1.5, 3.0, 100.0})
      for (double n : {1.0, 2.0, 5.0})
        for (double x0 : {0.0, 1e-8})
          worst = std::max(worst, std::abs(p_tilde_general(a, n, 0.0, x0, 0.0) - 0.125));
    r.pass = worst <= 1e-12;
    r.detail = fmt::format("max |p_tilde - 1/8| = {:.3e} over a in {{1,1.5,3,100}}, n in {{1,2,5}}, x0 in {{0,1e-8}} "
                           "(tol 1e-12)",
                           worst);
  });
}

CheckResult check_oracle_agreement(const VerifyOptions& o) {
  return timed(5, "closed form vs quadrature", 60.0, [&](CheckResult& r) {
    struct Point {
      double a, sigma, x0;
    };
    std::vector<Point> grid;
    for (double a : {1.2, 1.5, 3.0})
      for (double s : {0.5, 1.0, 2.0})
        for (double x0 : {0.5, 1.0, 2.0}) grid.push_back({a, s, x0});
    OverlapOracleOptions opt;
    opt.rel_tol = o.oracle_tol;
    std::vector<double> worst(grid.size(), 0.0);
    std::vector<double> worst_claim(grid.size(), 0.0);
    parallel_for(grid.size(), worker_count(o), [&](std::size_t k) {
      const auto& p = grid[k];
      const auto closed = closed_form_probabilities(p.a, p.sigma, p.x0);
      const auto state = set_primitive_displacement(make_pure_symmetric_state(p.a), p.x0);
      const MeasurementModel model{SigmaModel::fixed(p.sigma)};
      for (std::size_t i = 0; i < 8; ++i) {
        const auto q = numeric_overlap_oracle(state, model, pattern_from_index(i), p.x0, opt);
        worst[k] = std::max(worst[k], std::abs(q.value - closed.weight(i)) / closed.weight(i));
        worst_claim[k] = std::max(worst_claim[k], q.error_estimate / q.value);
      }
    });
    const double gap = *std::max_element(worst.begin(), worst.end());
    const double claim = *std::max_element(worst_claim.begin(), worst_claim.end());
    r.pass = gap <= o.oracle_tol && claim <= o.oracle_tol;
    r.detail = fmt::format("27 points x 8 patterns: max relative gap {:.3e}, max quadrature error estimate {:.3e} "
                           "(tol {:.1e})",
                           gap, claim, o.oracle_tol);
  });
}

CheckResult check_small_k_expansion(const VerifyOptions&) {
  return timed(6, "small-k expansion at a = 1e3", 1.0, [](CheckResult& r) {
    double worst_ratio = 0.0;
    double at_ratio = 0.0;
    double at_sigma = 0.0;
    for (double sigma : {0.5, 1.0, 2.0}) {
      for (int i = 0; i <= 30; ++i) {
        const double ratio = 1.0 + 3.0 * i / 30.0;
        const double x0 = ratio * sigma;
        const double k = std::exp(-(4.0 / 3.0) * ratio * ratio);
        const double p = conditional_probabilities(closed_form_probabilities(1e3, sigma, x0)).p_tilde();
        const double dev = std::abs(p - approx_p_tilde(x0, sigma));
        const double rel = dev / (k * k);
        if (rel > worst_ratio) {
          worst_ratio = rel;
          at_ratio = ratio;
          at_sigma = sigma;
        }
      }
    }
    r.pass = worst_ratio <= 5.0;
    r.detail = fmt::format("max |p_tilde - (1/3 - 4k/9)| / k^2 = {:.3e} at x0/sigma = {:.2f}, sigma = {} (bound 5)",
                           worst_ratio, at_ratio, at_sigma);
  });
}

CheckResult check_tritter_identities(const VerifyOptions& o) {
  return timed(7, "tritter identities", 1.0, [&](CheckResult& r) {
    const Eigen::MatrixXd t = o.inject_tritter_fault ? faulty_tritter() : tritter_matrix();
    const Eigen::MatrixXd j = SymplecticForm::standard(3).matrix();
    const double orth = (t * t.transpose() - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff();
    const double sympl = (t * j * t.transpose() - j).cwiseAbs().maxCoeff();
    std::string failures;
    double worst = 0.0;
    for (double s : {1.0, 1.5, 2.0, 4.0, 8.0}) {
      for (double n : {1.0, 1.5, 2.0, 5.0}) {
        const SqueezedThermalParams params{s, n};
        const Eigen::MatrixXd out = tritter_output(t, params);
        const double a = params.a();
        if (a < 1.0) {
          failures += fmt::format("{} s={} n={}: a={:.4f} < 1, no gamma(a)", failures.empty() ? "" : ";", s, n, a);
          continue;
        }
        const Eigen::MatrixXd target = n * make_pure_symmetric_state(a).cov().matrix();
        const double dev = (out - target).cwiseAbs().maxCoeff();
        worst = std::max(worst, dev);
        if (dev > 1e-12) {
          failures += fmt::format("{} s={} n={}: max deviation {:.3e}", failures.empty() ? "" : ";", s, n, dev);
        }
      }
    }
    const bool ok_t = orth <= 1e-12 && sympl <= 1e-12;
    r.pass = ok_t && failures.empty();
    r.detail = fmt::format("|T T^T - I| = {:.2e}, |T J T^T - J| = {:.2e}; output vs n*gamma((s^2+2)/(3s)):{}", orth,
                           sympl, failures.empty() ? fmt::format(" max deviation {:.2e}", worst) : failures);
  });
}

CheckResult check_inseparability(const VerifyOptions&) {
  return timed(8, "full inseparability", 1.0, [](CheckResult& r) {
    const bool at_one = check_full_inseparability(make_pure_symmetric_state(1.0).cov());
    const bool above = check_full_inseparability(make_pure_symmetric_state(1.0001).cov());
    const bool at_ten = check_full_inseparability(make_pure_symmetric_state(10.0).cov());
    r.pass = !at_one && above && at_ten;
    r.detail = fmt::format("a=1: {}, a=1.0001: {}, a=10: {}", at_one, above, at_ten);
  });
}

CheckResult check_monte_carlo(const VerifyOptions& o) {
  return timed(9, "Monte Carlo agreement", 60.0, [&](CheckResult& r) {
    const double a = 1.5, n = 2.0, x0 = 4.0;
    const AcceptanceWindow window{x0, 0.0, 1.0, kDefaultSenderBinFraction};
    const auto conv = BitConvention::PositiveIsZero;
    const auto stats = window_statistics(a, n, 0.0, window, conv);
    const auto state = set_primitive_displacement(make_thermal_symmetric_state(a, n), x0);
    const WindowedSampler sampler(state, 0.0, window, conv);

    constexpr std::size_t kSamples = 1000000;
    const unsigned workers = worker_count(o);
    constexpr std::size_t kChunks = 64;
    std::vector<BitTriple> runs(kSamples);
    std::atomic<std::size_t> rejected{0};
    parallel_for(kChunks, workers, [&](std::size_t chunk) {
      RngStream rng(9, "criterion9", chunk);
      const std::size_t lo = chunk * kSamples / kChunks;
      const std::size_t hi = (chunk + 1) * kSamples / kChunks;
      for (std::size_t i = lo; i < hi; ++i) {
        const OutcomeTriple t = sampler(rng);
        const double ref = std::abs(t.x_s);
        if (!window.sender_accepts(t.x_s) || !window.receiver_accepts(t.x_r0, ref) ||
            !window.receiver_accepts(t.x_r1, ref)) {
          rejected.fetch_add(1);
        }
        runs[i] = {bit_for_sign(t.x_s, conv), bit_for_sign(t.x_r0, conv), bit_for_sign(t.x_r1, conv)};
      }
    });

    std::vector<std::size_t> counts(8, 0);
    for (const auto& t : runs) counts[pattern_index(t[0], t[1], t[2])] += 1;
    std::vector<double> expected(8);
    for (std::size_t i = 0; i < 8; ++i) expected[i] = stats.conditionals.weight(i);
    const auto chi = chi_square_consistency(counts, expected, 0.01);

    const auto records = assemble_primitive(runs);
    const auto bad = static_cast<double>(std::count_if(
        records.begin(), records.end(), [](const PrimitiveRecord& rec) { return rec.status == RecordStatus::Inconsistent; }));
    const double n_rec = static_cast<double>(records.size());
    const double rate = bad / n_rec;
    const double pt = std::min(stats.conditionals.p_tilde(), 1.0 / 3.0);
    const double eta = error_bound_eta(pt);
    const double se = std::sqrt(eta * (1.0 - eta) / n_rec);
    const bool rate_ok = rate <= eta + 3.0 * se;

    r.pass = chi.pass && rate_ok && rejected == 0;
    r.detail = fmt::format("1e6 windowed samples: chi2 = {:.3f}, dof = {}, p = {:.3f} (significance 0.01); "
                           "inconsistent records {:.0f}/{:.0f} = {:.3e} vs eta + 3 SE = {:.3e}; out-of-window draws {}",
                           chi.statistic, chi.degrees_of_freedom, chi.p_value, bad, n_rec, rate, eta + 3.0 * se,
                           rejected.load());
  });
}

CheckResult check_protocol_ensembles(const VerifyOptions& o) {
  return timed(10, "protocol safety ensembles", 600.0, [&](CheckResult& r) {
    const ProtocolConfig config;
    const std::vector<Scenario> scenarios{{"all_honest"},
                                          {"sender_equivocates"},
                                          {"receiver_shift_attack", 3.0},
                                          {"receiver_hides"},
                                          {"receiver_false_flag"}};
    bool safe = true;
    bool honest_ok = false;
    bool shift_ok = false;
    std::string parts;
    for (const auto& sc : scenarios) {
      const auto runs = run_ensemble(config, sc, 1, o.ensemble_seeds, worker_count(o), false);
      const auto s = summarize(runs);
      safe = safe && s.contradictory == 0;
      if (sc.name == "all_honest") honest_ok = s.broadcast == s.runs;
      if (sc.name == "receiver_shift_attack") {
        shift_ok = static_cast<double>(s.detected + s.broadcast) >= 0.99 * static_cast<double>(s.runs);
      }
      parts += fmt::format("{}{}: broadcast {}, detected {}, honest abort {}, failure {} (contradictory {})",
                           parts.empty() ? "" : "; ", scenario_label(sc), s.broadcast, s.detected, s.all_honest_abort,
                           s.failures, s.contradictory);
    }
    r.pass = safe && honest_ok && shift_ok;
    r.detail = fmt::format("{} seeds each: {}", o.ensemble_seeds, parts);
  });
}

CheckResult check_determinism(const VerifyOptions& o) {
  return timed(11, "determinism", 1.0, [&](CheckResult& r) {
    auto artifacts = [&](unsigned threads) {
      std::vector<std::string> out;
      out.push_back(probability_report(1.5, 2.0, SigmaModel::fixed(0.0), 4.0, 1.0).dump());
      SweepSpec spec;
      spec.a = parse_grid("1.2:3:4");
      spec.n = {1.0, 2.0};
      spec.x0 = parse_grid("0.5:8:5");
      spec.delta = parse_grid("0:2:3");
      spec.sigma = SigmaModel::proportional(0.1);
      out.push_back(sweep_csv(spec, run_sweep(spec, threads)));
      out.push_back(boundary_csv(find_boundary({1.3, 1.5, 1.6}, 1.0, SigmaModel::fixed(0.0), 50.0, 1e-7)));
      ProtocolConfig config;
      config.states = 4000;
      const Scenario sc{"receiver_false_flag"};
      const auto runs = run_ensemble(config, sc, 7, 3, threads, true);
      out.push_back(verdict_csv(scenario_label(sc), runs));
      for (const auto& run : runs) out.push_back(run.transcript);
      return out;
    };
    const auto first = artifacts(1);
    const auto second = artifacts(std::max(2u, worker_count(o)));
    std::size_t differing = 0;
    std::size_t bytes = 0;
    for (std::size_t i = 0; i < first.size(); ++i) {
      bytes += first[i].size();
      if (first[i] != second[i]) ++differing;
    }
    r.pass = differing == 0 && first.size() == second.size();
    r.detail = fmt::format("{} artifacts ({} bytes) regenerated with different thread counts, {} differ",
                           first.size(), bytes, differing);
  });
}

CheckResult run_check(int id, const VerifyOptions& o) {
  switch (id) {
    case 1: return check_threshold_crossover(o);
    case 2: return check_upper_entanglement(o);
    case 3: return check_limiting_cases(o);
    case 4: return check_degenerate_point(o);
    case 5: return check_oracle_agreement(o);
    case 6: return check_small_k_expansion(o);
    case 7: return check_tritter_identities(o);
    case 8: return check_inseparability(o);
    case 9: return check_monte_carlo(o);
    case 10: return check_protocol_ensembles(o);
    case 11: return check_determinism(o);
    default: throw DomainError(fmt::format("no check numbered {}", id));
  }
}

std::vector<CheckResult> run_all_checks(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  for (int id = 1; id <= 11; ++id) out.push_back(run_check(id, o));
  return out;
}

std::string format_check(const CheckResult& r) {
  return fmt::format("[{}] {:>2} {} ({:.2f} s / {:.0f} s): {}", r.pass ? "PASS" : "FAIL", r.id, r.name, r.seconds,
                     r.budget_seconds, r.detail);
}

}  // namespace cvb
