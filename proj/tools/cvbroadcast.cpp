// Command-line front end: prob, sweep, boundary, simulate, verify.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "cvbroadcast/boundary.hpp"
#include "cvbroadcast/errors.hpp"
#include "cvbroadcast/measurement.hpp"
#include "cvbroadcast/protocol.hpp"
#include "cvbroadcast/scenarios.hpp"
#include "cvbroadcast/sweep.hpp"
#include "cvbroadcast/transcript.hpp"
#include "cvbroadcast/verify.hpp"
#include "cvbroadcast/version.hpp"

namespace {

enum ExitCode { kOk = 0, kCheckFailed = 1, kUsage = 2, kIo = 3 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// JSON config files: an object of flag names to values for the chosen
// subcommand. An object stored under the subcommand's own name is read as
// well, so one file can serve several subcommands.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(std::string section) : section_(std::move(section)) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(fmt::format("config file is not valid JSON: {}", e.what()));
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!it->is_object()) {
        out.push_back(item(it.key(), *it, section_));
      } else if (it.key() == section_) {
        for (auto inner = it->begin(); inner != it->end(); ++inner) {
          out.push_back(item(inner.key(), *inner, section_));
        }
      }
    }
    return out;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError(fmt::format("unsupported config value {}", v.dump()));
  }

  static CLI::ConfigItem item(const std::string& key, const nlohmann::json& v, const std::string& section) {
    CLI::ConfigItem c;
    c.name = key;
    if (!section.empty()) c.parents = {section};
    if (v.is_array()) {
      for (const auto& e : v) c.inputs.push_back(scalar(e));
    } else {
      c.inputs.push_back(scalar(v));
    }
    return c;
  }

  std::string section_;
};

// CLI11 reads config files only at the top level, so a --config given after
// the subcommand is moved in front of it. Returns the subcommand name.
std::string hoist_config(std::vector<std::string>& args, const std::vector<std::string>& subcommands) {
  std::size_t sub_at = args.size();
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (std::find(subcommands.begin(), subcommands.end(), args[i]) != subcommands.end()) {
      sub_at = i;
      break;
    }
  }
  if (sub_at == args.size()) return {};
  std::vector<std::string> moved;
  for (std::size_t i = sub_at + 1; i < args.size();) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      moved.insert(moved.end(), {args[i], args[i + 1]});
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      moved.push_back(args[i]);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_at), moved.begin(), moved.end());
  return args[sub_at + moved.size()];
}

cvb::SigmaModel sigma_from(const std::string& kind, double value) {
  if (kind == "fixed") return cvb::SigmaModel::fixed(value);
  if (kind == "proportional") return cvb::SigmaModel::proportional(value);
  throw cvb::DomainError(fmt::format("unknown sigma model '{}' (fixed or proportional)", kind));
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot open '{}' for writing", path));
  f << text;
  f.close();
  if (!f) throw IoError(fmt::format("failed writing '{}'", path));
}

unsigned thread_count(unsigned requested) {
  return requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
}

const char* kSweepHelp =
    "Writes one CSV row per grid point, a-major then n, x0, delta:\n"
    "  # cvbroadcast <version> sweep\n"
    "  a,n,sigma_model,sigma,x0,delta,p_tilde,eta\n"
    "Grids are 'v', 'v1,v2,...' or 'start:stop:count'. Numbers carry 12 significant digits.";

const char* kBoundaryHelp =
    "Writes the useful shift interval per a, where p_tilde >= 1/3 - epsilon:\n"
    "  # cvbroadcast <version> boundary\n"
    "  a,delta_min,delta_max\n"
    "delta_max is 'inf' when still useful at 1e6 * x0; both are 'none' when no shift is useful.\n"
    "Standard output gets JSON with a_thresh (p_tilde overtaking every error weight at delta = 0)\n"
    "and, with --scan-delta, the useful a-interval at that shift.";

const char* kSimulateHelp =
    "Runs one protocol instance per seed and writes the verdict CSV:\n"
    "  # cvbroadcast <version> simulate\n"
    "  seed,scenario,outcome,decision_R0,decision_R1,aborted\n"
    "outcome is broadcast_achieved(b), all_honest_abort, detected_and_aborted or failure(reason).\n"
    "Decisions are 0, 1 or bot. --transcripts DIR writes seed_<seed>.jsonl per run: a header line with\n"
    "the config, then one event per line (seq, round, phase, step, kind, from, to, digest, size, ref, detail).";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{fmt::format("{} {}: continuous-variable detectable broadcast toolkit", cvb::kToolName,
                           cvb::kToolVersion)};
  app.set_version_flag("--version", std::string(cvb::kToolVersion));
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 success, 1 check failure, 2 usage or domain error, 3 I/O error.\n"
      "Every CSV starts with a '# cvbroadcast <version> <command>' comment line.");

  // prob
  auto* prob = app.add_subcommand("prob", "Conditional probabilities and eta at one point, as JSON");
  double p_a = 1.5, p_n = 1.0, p_sigma = 0.0, p_x0 = 1.0, p_delta = 0.0;
  std::string p_sigma_model = "fixed";
  prob->add_option("--a", p_a, "Entanglement parameter, >= 1")->capture_default_str();
  prob->add_option("--n", p_n, "Thermal noise factor, >= 1")->capture_default_str();
  prob->add_option("--sigma", p_sigma, "Measurement width, or ratio to |x0| when proportional")->capture_default_str();
  prob->add_option("--sigma-model", p_sigma_model, "fixed or proportional")->capture_default_str();
  prob->add_option("--x0", p_x0, "Primitive displacement")->capture_default_str();
  prob->add_option("--delta", p_delta, "Receiver shift")->capture_default_str();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Grid of p_tilde and eta as CSV");
  sweep->footer(kSweepHelp);
  std::string s_a = "1.5", s_n = "1", s_x0 = "0.5:8:16", s_delta = "0", s_out, s_sigma_model = "fixed";
  double s_sigma = 0.0;
  unsigned s_threads = 0;
  sweep->add_option("--a", s_a, "Grid of a")->capture_default_str();
  sweep->add_option("--n", s_n, "Grid of n")->capture_default_str();
  sweep->add_option("--x0", s_x0, "Grid of x0")->capture_default_str();
  sweep->add_option("--delta", s_delta, "Grid of delta")->capture_default_str();
  sweep->add_option("--sigma", s_sigma, "Measurement width or ratio")->capture_default_str();
  sweep->add_option("--sigma-model", s_sigma_model, "fixed or proportional")->capture_default_str();
  sweep->add_option("--threads", s_threads, "Worker threads, 0 for all cores")->capture_default_str();
  sweep->add_option("--out", s_out, "Output CSV path (standard output if omitted)");

  // boundary
  auto* boundary = app.add_subcommand("boundary", "Useful-region boundary in (a, delta) as CSV");
  boundary->footer(kBoundaryHelp);
  std::string b_a = "1.2:2:9", b_out, b_sigma_model = "fixed";
  double b_n = 1.0, b_sigma = 0.0, b_x0 = 50.0, b_eps = 1e-7;
  std::optional<double> b_scan_delta;
  boundary->add_option("--a", b_a, "Grid of a")->capture_default_str();
  boundary->add_option("--n", b_n, "Thermal noise factor")->capture_default_str();
  boundary->add_option("--sigma", b_sigma, "Measurement width or ratio")->capture_default_str();
  boundary->add_option("--sigma-model", b_sigma_model, "fixed or proportional")->capture_default_str();
  boundary->add_option("--x0", b_x0, "Primitive displacement")->capture_default_str();
  boundary->add_option("--epsilon", b_eps, "Usefulness margin, > 0")->capture_default_str();
  boundary->add_option("--scan-delta", b_scan_delta, "Also report the useful a-interval at this shift");
  boundary->add_option("--out", b_out, "Output CSV path (standard output if omitted)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Protocol ensemble under a named scenario");
  simulate->footer(kSimulateHelp);
  cvb::ProtocolConfig cfg;
  std::string m_scenario = "all_honest", m_out, m_transcripts, m_sigma_model = "fixed", m_sampling = "post_selected";
  double m_k = 3.0, m_sigma = 0.0;
  std::size_t m_seeds = 1;
  std::uint64_t m_first_seed = 1;
  unsigned m_threads = 0;
  std::string names;
  for (const auto& n : cvb::scenario_names()) names += (names.empty() ? "" : ", ") + n;
  simulate->add_option("--scenario", m_scenario, "One of: " + names)->capture_default_str();
  simulate->add_option("--K", m_k, "Shift factor of receiver_shift_attack")->capture_default_str();
  simulate->add_option("--seeds", m_seeds, "Number of runs")->capture_default_str();
  simulate->add_option("--first-seed", m_first_seed, "Seed of the first run")->capture_default_str();
  simulate->add_option("--threads", m_threads, "Worker threads, 0 for all cores")->capture_default_str();
  simulate->add_option("--out", m_out, "Verdict CSV path (standard output if omitted)");
  simulate->add_option("--transcripts", m_transcripts, "Directory for per-seed JSONL transcripts");
  simulate->add_option("--states", cfg.states, "Resource states per run")->capture_default_str();
  simulate->add_option("--a", cfg.a, "Entanglement parameter")->capture_default_str();
  simulate->add_option("--n", cfg.n, "Thermal noise factor")->capture_default_str();
  simulate->add_option("--sigma", m_sigma, "Measurement width or ratio")->capture_default_str();
  simulate->add_option("--sigma-model", m_sigma_model, "fixed or proportional")->capture_default_str();
  simulate->add_option("--x0", cfg.window.x0, "Primitive displacement")->capture_default_str();
  simulate->add_option("--delta-min", cfg.window.delta_min, "Smallest accepted shift")->capture_default_str();
  simulate->add_option("--delta-max", cfg.window.delta_max, "Largest accepted shift")->capture_default_str();
  simulate->add_option("--sender-bin", cfg.window.sender_bin_fraction, "Sender bin half-width over x0")
      ->capture_default_str();
  simulate->add_option("--significance", cfg.significance, "Per-test significance")->capture_default_str();
  simulate->add_option("--sampling", m_sampling, "post_selected or unconditioned")->capture_default_str();

  // verify
  auto* verify = app.add_subcommand("verify", "Run the numbered acceptance checks");
  cvb::VerifyOptions v_opts;
  std::string v_fault;
  std::vector<int> v_only;
  verify->add_option("--inject-fault", v_fault, "Corrupt a constant before checking: tritter");
  verify->add_option("--oracle-tol", v_opts.oracle_tol, "Quadrature target and tolerance of check 5")
      ->capture_default_str();
  verify->add_option("--threads", v_opts.threads, "Worker threads, 0 for all cores")->capture_default_str();
  verify->add_option("--seeds", v_opts.ensemble_seeds, "Seeds per scenario in check 10")->capture_default_str();
  verify->add_option("--only", v_only, "Run only these check numbers");

  std::vector<std::string> args(argv, argv + argc);
  const std::string section = hoist_config(args, {"prob", "sweep", "boundary", "simulate", "verify"});
  app.config_formatter(std::make_shared<JsonConfig>(section));
  app.set_config("--config", "", "JSON file supplying flags of the chosen subcommand; command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);

  try {
    std::reverse(args.begin(), args.end());
    args.pop_back();
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (prob->parsed()) {
      std::cout << cvb::probability_report(p_a, p_n, sigma_from(p_sigma_model, p_sigma), p_x0, p_delta).dump(2)
                << "\n";
      return kOk;
    }
    if (sweep->parsed()) {
      cvb::SweepSpec spec;
      spec.a = cvb::parse_grid(s_a);
      spec.n = cvb::parse_grid(s_n);
      spec.x0 = cvb::parse_grid(s_x0);
      spec.delta = cvb::parse_grid(s_delta);
      spec.sigma = sigma_from(s_sigma_model, s_sigma);
      write_text(s_out, cvb::sweep_csv(spec, cvb::run_sweep(spec, thread_count(s_threads))));
      return kOk;
    }
    if (boundary->parsed()) {
      if (!(b_eps > 0.0)) throw cvb::DomainError("epsilon must be positive");
      const auto sigma = sigma_from(b_sigma_model, b_sigma);
      const auto rows = cvb::find_boundary(cvb::parse_grid(b_a), b_n, sigma, b_x0, b_eps);
      write_text(b_out, cvb::boundary_csv(rows));
      if (!b_out.empty() && b_out != "-") {
        nlohmann::ordered_json j;
        j["a_thresh"] = std::stod(cvb::format_number(cvb::find_threshold_crossover(b_n, sigma, b_x0, 0.0)));
        if (b_scan_delta) {
          const auto iv = cvb::find_a_interval(b_n, sigma, b_x0, *b_scan_delta, b_eps);
          nlohmann::ordered_json k;
          k["delta"] = *b_scan_delta;
          if (iv) {
            k["a_min"] = std::stod(cvb::format_number(iv->a_min));
            k["a_max"] = iv->a_max ? nlohmann::ordered_json(std::stod(cvb::format_number(*iv->a_max)))
                                   : nlohmann::ordered_json("inf");
          } else {
            k["a_min"] = nullptr;
            k["a_max"] = nullptr;
          }
          j["a_interval"] = k;
        }
        std::cout << j.dump(2) << "\n";
      }
      return kOk;
    }
    if (simulate->parsed()) {
      cfg.measurement.sigma_model = sigma_from(m_sigma_model, m_sigma);
      if (m_sampling == "post_selected") cfg.sampling = cvb::SamplingMode::PostSelected;
      else if (m_sampling == "unconditioned") cfg.sampling = cvb::SamplingMode::Unconditioned;
      else throw cvb::DomainError(fmt::format("unknown sampling mode '{}'", m_sampling));
      const cvb::Scenario scenario{m_scenario, m_k};
      try {
        cvb::make_scenario(scenario);
      } catch (const cvb::DomainError& e) {
        std::cerr << "error: " << e.what() << " (known: " << names << ")\n";
        return kUsage;
      }
      const bool keep = !m_transcripts.empty();
      if (keep) {
        std::error_code ec;
        std::filesystem::create_directories(m_transcripts, ec);
        if (ec) throw IoError(fmt::format("cannot create '{}': {}", m_transcripts, ec.message()));
      }
      const auto runs = cvb::run_ensemble(cfg, scenario, m_first_seed, m_seeds, thread_count(m_threads), keep);
      const std::string label = cvb::scenario_label(scenario);
      write_text(m_out, cvb::verdict_csv(label, runs));
      if (keep) {
        for (const auto& r : runs) {
          write_text((std::filesystem::path(m_transcripts) / fmt::format("seed_{}.jsonl", r.seed)).string(),
                     r.transcript);
        }
      }
      const auto s = cvb::summarize(runs);
      std::cerr << fmt::format("{}: {} runs, broadcast {}, all_honest_abort {}, detected {}, failure {}, "
                               "contradictory {}\n",
                               label, s.runs, s.broadcast, s.all_honest_abort, s.detected, s.failures, s.contradictory);
      return kOk;
    }
    if (verify->parsed()) {
      if (!v_fault.empty()) {
        if (v_fault != "tritter") throw cvb::DomainError(fmt::format("unknown fault '{}' (tritter)", v_fault));
        v_opts.inject_tritter_fault = true;
      }
      if (v_only.empty()) {
        for (int i = 1; i <= 11; ++i) v_only.push_back(i);
      }
      bool all = true;
      for (int id : v_only) {
        const auto r = cvb::run_check(id, v_opts);
        std::cout << cvb::format_check(r) << std::endl;
        all = all && r.pass;
      }
      std::cout << (all ? "all checks passed" : "some checks failed") << "\n";
      return all ? kOk : kCheckFailed;
    }
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const cvb::DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return kUsage;
  } catch (const cvb::StructuralError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const cvb::DegenerateInputError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
  return kUsage;
}
