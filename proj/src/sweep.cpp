#include "cvbroadcast/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "cvbroadcast/errors.hpp"
#include "cvbroadcast/version.hpp"

namespace cvb {

namespace {

double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DomainError(fmt::format("'{}' is not a number", s));
  }
  if (used != s.size()) throw DomainError(fmt::format("'{}' is not a number", s));
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

// Round-trips through 12 significant digits so JSON output matches the CSVs.
double twelve_digits(double v) {
  if (!std::isfinite(v)) return v;
  return std::stod(fmt::format("{:.12g}", v));
}

}  // namespace

std::vector<double> parse_grid(const std::string& text) {
  if (text.empty()) throw DomainError("empty grid");
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw DomainError(fmt::format("grid '{}' is not start:stop:count", text));
    const double start = parse_number(parts[0]);
    const double stop = parse_number(parts[1]);
    const double count = parse_number(parts[2]);
    if (!(count >= 0.0) || count != std::floor(count)) {
      throw DomainError(fmt::format("grid count '{}' must be a non-negative integer", parts[2]));
    }
    const auto k = static_cast<std::size_t>(count);
    std::vector<double> out;
    for (std::size_t i = 0; i < k; ++i) {
      out.push_back(k == 1 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(k - 1));
    }
    return out;
  }
  std::vector<double> out;
  for (const auto& p : split(text, ',')) out.push_back(parse_number(p));
  return out;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, unsigned threads) {
  std::vector<SweepRow> rows;
  for (double a : spec.a)
    for (double n : spec.n)
      for (double x0 : spec.x0)
        for (double d : spec.delta) rows.push_back({a, n, spec.sigma.resolve(x0), x0, d, 0.0, 0.0});

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::mutex lock;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= rows.size() || failed) return;
      try {
        SweepRow& r = rows[k];
        r.p_tilde = p_tilde_general(r.a, r.n, r.sigma, r.x0, r.delta);
        r.eta = error_bound_eta(std::min(r.p_tilde, 1.0 / 3.0));
      } catch (...) {
        std::lock_guard<std::mutex> g(lock);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < std::max(1u, threads); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return rows;
}

nlohmann::ordered_json probability_report(double a, double n, const SigmaModel& sigma, double x0, double delta) {
  const double s = sigma.resolve(x0);
  const PTildeTerms t = p_tilde_terms(a, n, s, x0, delta);
  const double pt = t.p_tilde();
  nlohmann::ordered_json j;
  j["a"] = twelve_digits(a);
  j["n"] = twelve_digits(n);
  j["sigma_model"] = sigma.name();
  j["sigma"] = twelve_digits(s);
  j["x0"] = twelve_digits(x0);
  j["delta"] = twelve_digits(delta);
  j["p_tilde"] = twelve_digits(pt);
  j["deficit"] = twelve_digits(t.deficit());
  j["delta1_tilde"] = twelve_digits(t.delta1_tilde());
  j["delta2_tilde"] = twelve_digits(t.delta2_tilde());
  j["delta3_tilde"] = twelve_digits(t.delta3_tilde());
  j["eta"] = twelve_digits(error_bound_eta(std::min(pt, 1.0 / 3.0)));
  return j;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.12g}", v);
}

std::string sweep_csv(const SweepSpec& spec, const std::vector<SweepRow>& rows) {
  std::string out = fmt::format("# {} {} sweep\n{}\n", kToolName, kToolVersion, kSweepCsvHeader);
  const std::string model = spec.sigma.name();
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", format_number(r.a), format_number(r.n), model,
                       format_number(r.sigma), format_number(r.x0), format_number(r.delta),
                       format_number(r.p_tilde), format_number(r.eta));
  }
  return out;
}

std::string boundary_csv(const std::vector<BoundaryRow>& rows) {
  std::string out = fmt::format("# {} {} boundary\n{}\n", kToolName, kToolVersion, kBoundaryCsvHeader);
  for (const auto& r : rows) {
    if (r.empty) {
      out += fmt::format("{},none,none\n", format_number(r.a));
      continue;
    }
    out += fmt::format("{},{},{}\n", format_number(r.a), format_number(r.delta_min),
                       r.delta_max ? format_number(*r.delta_max) : std::string("inf"));
  }
  return out;
}

}  // namespace cvb
