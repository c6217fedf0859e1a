#pragma once

// Three-player detectable broadcast over the simulated network. Players run
// the distribution steps (i-1)..(i-3), the test steps (ii-1)..(ii-7) and the
// broadcast steps (iii-1)..(iii-5); each player's behaviour is a Strategy.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvbroadcast/bits.hpp"
#include "cvbroadcast/chi_square.hpp"
#include "cvbroadcast/measurement.hpp"
#include "cvbroadcast/netsim.hpp"
#include "cvbroadcast/primitive.hpp"

namespace cvb {

enum class SamplingMode {
  PostSelected,  // every state is drawn conditioned on acceptance
  Unconditioned  // raw Gaussian draws; most runs are rejected
};

struct ProtocolConfig {
  std::size_t states = 20000;
  double a = 1.5;
  double n = 2.0;
  MeasurementModel measurement{};
  AcceptanceWindow window{4.0, 0.0, 1.0, kDefaultSenderBinFraction};
  double k_sender_fraction = 0.10;    // of all states
  double k_receiver_fraction = 0.10;  // of all states
  double l_fraction = 0.10;           // of the retained states, split over six L sets
  double v_fraction = 0.05;           // of the accepted intersection, per V set
  double significance = 1e-6;         // per statistical test
  double min_size_fraction = 0.5;     // of the expected size of J_i and of the conflict reply
  SamplingMode sampling = SamplingMode::PostSelected;
  std::uint64_t seed = 1;

  // StructuralError when the sets cannot be drawn; DomainError for bad values.
  void validate() const;
  nlohmann::json to_json() const;
  static ProtocolConfig from_json(const nlohmann::json& j);
};

// Statistics an honest player expects from the configured resource.
struct ProtocolModel {
  std::array<double, 8> patterns{};  // conditional on all three accepted
  double acceptance = 1.0;           // probability that a state is accepted by all three
  double primitive_mass = 1.0;
  double eta = 0.0;

  static ProtocolModel compute(const ProtocolConfig& config);

  // Accepted-conditional distribution of (b_first, b_second), index 2*b_first + b_second.
  std::array<double, 4> pair(PlayerId first, PlayerId second) const;
  std::array<double, 2> single(PlayerId p) const;
  // The eight patterns followed by a rejection category.
  std::vector<double> with_rejection() const;
};

// Largest number of consistency violations accepted among `size` checked records.
std::size_t violation_tolerance(std::size_t size, double eta);

class Strategy;

struct StrategyContext {
  PlayerId self;
  const ProtocolConfig& config;
  RngStream& rng;
};

// Hooks consulted at every point where a player could deviate. The base
// class is the honest player.
class Strategy {
 public:
  virtual ~Strategy() = default;

  virtual std::string name() const { return "honest"; }
  virtual bool honest() const { return true; }

  // Displacement factor K applied to every own mode received in (i-1).
  virtual double shift_factor(StrategyContext&) { return 1.0; }
  // Outcome disclosed to another player; nullopt claims a failed detection.
  virtual std::optional<double> report_outcome(std::size_t, Mode, double measured, StrategyContext&) {
    return measured;
  }
  // Whether an accepted own run is included in the (ii-3) announcement.
  virtual bool announce_accepted(std::size_t, Bit, StrategyContext&) { return true; }
  virtual bool send_flag(const std::string&, PlayerId, bool own_flag, StrategyContext&) { return own_flag; }
  // Bits sent to (R0, R1) in (iii-1).
  virtual std::array<Bit, 2> broadcast_bits(Bit b, StrategyContext&) { return {b, b}; }
  virtual std::vector<std::size_t> index_set_reply(PlayerId, Bit, std::vector<std::size_t> honest_set,
                                                   StrategyContext&) {
    return honest_set;
  }
  virtual std::optional<Bit> broadcast_flag(std::optional<Bit> own_flag, StrategyContext&) { return own_flag; }
  // R0's answer to the (iii-5) demand; `index_set` is the J0 it received.
  virtual std::vector<std::size_t> conflict_reply(std::vector<std::size_t> honest_reply,
                                                  const std::vector<std::size_t>& /*index_set*/, StrategyContext&) {
    return honest_reply;
  }
};

using StrategySet = std::array<std::shared_ptr<Strategy>, 3>;

StrategySet honest_strategies();

enum class Outcome { BroadcastAchieved, AllHonestAbort, DetectedAndAborted, Failure };

std::string_view to_string(Outcome o);

struct Verdict {
  Outcome outcome = Outcome::AllHonestAbort;
  std::optional<Bit> bit;                       // for BroadcastAchieved
  std::string reason;                           // for Failure, or the abort step
  std::array<std::optional<Bit>, 2> decisions;  // final (R0, R1); nullopt is the undecided flag
  std::optional<Bit> sender_bit;                // what S meant to send
  bool aborted = false;                         // some honest player aborted or stayed undecided

  std::string label() const;  // e.g. broadcast_achieved(0)
};

// Results passed between phases.
struct DistributionResult {
  std::array<bool, 3> flags{true, true, true};
  std::vector<std::size_t> retained;  // sorted
};

struct TestResult {
  std::array<bool, 3> flags{true, true, true};
  std::vector<std::size_t> working_set;  // W, sorted, even
};

// Every player's state across phases; exposed for tests and tooling.
struct PlayerView {
  std::vector<std::optional<double>> own_outcome;  // by state index
  std::vector<double> sender_magnitude;            // announced |x_S|, NaN if unknown
  std::vector<char> accepted_own;                  // own mode accepted
};

class ProtocolRun {
 public:
  ProtocolRun(const ProtocolConfig& config, const ProtocolModel& model, StrategySet strategies);

  DistributionResult run_distribution_phase();
  TestResult run_test_phase(const DistributionResult& distribution);
  // Pairs W into records and runs (iii-1)..(iii-5).
  Verdict run_broadcast_phase(const TestResult& test);
  Verdict run();

  const Network& network() const { return network_; }
  const ProtocolConfig& config() const { return config_; }
  // Records assembled from W before discarding u-records (audit view).
  const std::vector<PrimitiveRecord>& records() const { return records_; }

 private:
  StrategyContext context(PlayerId p);
  bool is_honest(PlayerId p) const;
  bool sender_accepts(double x) const;
  bool receiver_accepts(double x, double sender_magnitude) const;
  std::optional<std::size_t> test_category(double xs, double xr0, double xr1) const;
  Verdict abort_verdict(const std::string& step) const;
  Verdict classify(const std::array<std::optional<Bit>, 2>& decisions, Bit sender_bit) const;
  bool exchange_flags(const std::string& phase, const std::string& step, std::array<bool, 3>& flags);
  void note_test(const std::string& phase, const std::string& step, PlayerId who, const std::string& what,
                 const ChiSquareResult& r);

  ProtocolConfig config_;
  ProtocolModel model_;
  StrategySet strategies_;
  std::array<RngStream, 3> rngs_;
  Network network_;
  std::array<PlayerView, 3> views_;
  std::vector<PrimitiveRecord> records_;
};

struct ProtocolOutput {
  Verdict verdict;
  std::vector<Event> events;
};

ProtocolOutput run_protocol(const ProtocolConfig& config, const StrategySet& strategies);
ProtocolOutput run_protocol(const ProtocolConfig& config, const ProtocolModel& model, const StrategySet& strategies);

}  // namespace cvb
