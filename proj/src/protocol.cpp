#include "cvbroadcast/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "cvbroadcast/errors.hpp"
#include "cvbroadcast/gaussian.hpp"
#include "cvbroadcast/window.hpp"

namespace cvb {

namespace {

constexpr double kUnknown = std::numeric_limits<double>::quiet_NaN();

const char* kDistribution = "distribution";
const char* kTest = "test";
const char* kBroadcast = "broadcast";

struct SetSizes {
  std::size_t k_sender = 0;
  std::size_t k_receiver = 0;
  std::size_t retained = 0;
  std::size_t l_total = 0;
};

SetSizes set_sizes(const ProtocolConfig& c) {
  SetSizes s;
  const auto m = static_cast<double>(c.states);
  s.k_sender = static_cast<std::size_t>(std::floor(c.k_sender_fraction * m));
  s.k_receiver = static_cast<std::size_t>(std::floor(c.k_receiver_fraction * m));
  s.retained = c.states - std::min(c.states, s.k_sender + s.k_receiver);
  s.l_total = static_cast<std::size_t>(std::floor(c.l_fraction * static_cast<double>(s.retained)));
  return s;
}

void require_fraction(double f, const char* what) {
  if (!(f > 0.0 && f < 1.0)) throw DomainError(fmt::format("{} = {} must lie in (0, 1)", what, f));
}

int bit_of(std::size_t pattern, PlayerId p) { return static_cast<int>((pattern >> (2 - index_of(p))) & 1u); }

std::vector<std::size_t> mask_to_list(const std::vector<char>& mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> shuffled(std::vector<std::size_t> v, std::uint64_t seed, std::string_view label) {
  RngStream rng(seed, label);
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

std::vector<std::size_t> sorted_slice(const std::vector<std::size_t>& v, std::size_t from, std::size_t count) {
  std::vector<std::size_t> out(v.begin() + static_cast<std::ptrdiff_t>(from),
                               v.begin() + static_cast<std::ptrdiff_t>(from + count));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SubsystemRef> refs_for(const std::vector<std::size_t>& states, Mode mode) {
  std::vector<SubsystemRef> out;
  out.reserve(states.size());
  for (std::size_t i : states) out.push_back({i, mode});
  return out;
}

Trit trit_of(Bit b) { return b == Bit::Zero ? Trit::Zero : Trit::One; }

std::string flag_text(const std::optional<Bit>& b) { return b ? std::to_string(value_of(*b)) : "bot"; }

template <class T>
const T* find_payload(const std::vector<Message>& inbox, PlayerId from) {
  for (const auto& m : inbox) {
    if (m.from == from) {
      if (const auto* p = std::get_if<T>(&m.payload)) return p;
    }
  }
  return nullptr;
}

OutcomeSource make_source(const ProtocolConfig& c) {
  const GaussianState state = set_primitive_displacement(make_thermal_symmetric_state(c.a, c.n), c.window.x0);
  const double sigma = c.measurement.sigma(c.window.x0);
  const std::uint64_t seed = c.seed;
  if (c.sampling == SamplingMode::PostSelected) {
    auto sampler = std::make_shared<WindowedSampler>(state, sigma, c.window, c.measurement.convention);
    return [sampler, seed](std::size_t i) {
      RngStream rng(seed, "state", i);
      return (*sampler)(rng);
    };
  }
  auto dist = std::make_shared<OutcomeDistribution>(state, sigma);
  return [dist, seed](std::size_t i) {
    RngStream rng(seed, "state", i);
    return (*dist)(rng);
  };
}

}  // namespace

void ProtocolConfig::validate() const {
  if (states == 0) throw StructuralError("the number of distributed states must be positive");
  symmetric_coefficients(a);
  if (!(n >= 1.0) || !std::isfinite(n)) throw DomainError(fmt::format("noise factor n = {} must be >= 1", n));
  window.validate();
  if (sampling == SamplingMode::PostSelected && !std::isfinite(window.delta_max)) {
    throw DomainError("post-selected sampling needs a finite delta_max");
  }
  require_fraction(k_sender_fraction, "k_sender_fraction");
  require_fraction(k_receiver_fraction, "k_receiver_fraction");
  require_fraction(l_fraction, "l_fraction");
  require_fraction(v_fraction, "v_fraction");
  require_fraction(significance, "significance");
  if (!(min_size_fraction >= 0.0 && min_size_fraction <= 1.0)) {
    throw DomainError(fmt::format("min_size_fraction = {} must lie in [0, 1]", min_size_fraction));
  }
  if (k_sender_fraction + k_receiver_fraction >= 1.0) {
    throw StructuralError("the two distribution test sets leave no states");
  }
  if (3.0 * v_fraction >= 1.0) throw StructuralError("the three control sets cover the whole intersection");
  const SetSizes s = set_sizes(*this);
  if (s.k_sender == 0 || s.k_receiver == 0) {
    throw StructuralError(fmt::format("{} states leave an empty distribution test set", states));
  }
  if (s.l_total < 6) throw StructuralError(fmt::format("{} states leave an empty exchange set", states));
  if (s.retained - s.l_total < 2) throw StructuralError("no states left for the working set");
}

nlohmann::json ProtocolConfig::to_json() const {
  nlohmann::json j;
  j["states"] = states;
  j["a"] = a;
  j["n"] = n;
  j["sigma_model"] = measurement.sigma_model.name();
  j["sigma"] = measurement.sigma_model.parameter();
  j["convention"] = measurement.convention == BitConvention::PositiveIsZero ? "positive_is_zero" : "positive_is_one";
  j["x0"] = window.x0;
  j["delta_min"] = window.delta_min;
  j["delta_max"] = window.delta_max;
  j["sender_bin_fraction"] = window.sender_bin_fraction;
  j["k_sender_fraction"] = k_sender_fraction;
  j["k_receiver_fraction"] = k_receiver_fraction;
  j["l_fraction"] = l_fraction;
  j["v_fraction"] = v_fraction;
  j["significance"] = significance;
  j["min_size_fraction"] = min_size_fraction;
  j["sampling"] = sampling == SamplingMode::PostSelected ? "post_selected" : "unconditioned";
  j["seed"] = seed;
  return j;
}

ProtocolConfig ProtocolConfig::from_json(const nlohmann::json& j) {
  ProtocolConfig c;
  c.states = j.value("states", c.states);
  c.a = j.value("a", c.a);
  c.n = j.value("n", c.n);
  const std::string kind = j.value("sigma_model", std::string("fixed"));
  const double sigma = j.value("sigma", 0.0);
  if (kind == "fixed") c.measurement.sigma_model = SigmaModel::fixed(sigma);
  else if (kind == "proportional") c.measurement.sigma_model = SigmaModel::proportional(sigma);
  else throw DomainError(fmt::format("unknown sigma model '{}'", kind));
  const std::string conv = j.value("convention", std::string("positive_is_zero"));
  if (conv == "positive_is_zero") c.measurement.convention = BitConvention::PositiveIsZero;
  else if (conv == "positive_is_one") c.measurement.convention = BitConvention::PositiveIsOne;
  else throw DomainError(fmt::format("unknown bit convention '{}'", conv));
  c.window.x0 = j.value("x0", c.window.x0);
  c.window.delta_min = j.value("delta_min", c.window.delta_min);
  c.window.delta_max = j.value("delta_max", c.window.delta_max);
  c.window.sender_bin_fraction = j.value("sender_bin_fraction", c.window.sender_bin_fraction);
  c.k_sender_fraction = j.value("k_sender_fraction", c.k_sender_fraction);
  c.k_receiver_fraction = j.value("k_receiver_fraction", c.k_receiver_fraction);
  c.l_fraction = j.value("l_fraction", c.l_fraction);
  c.v_fraction = j.value("v_fraction", c.v_fraction);
  c.significance = j.value("significance", c.significance);
  c.min_size_fraction = j.value("min_size_fraction", c.min_size_fraction);
  const std::string sampling = j.value("sampling", std::string("post_selected"));
  if (sampling == "post_selected") c.sampling = SamplingMode::PostSelected;
  else if (sampling == "unconditioned") c.sampling = SamplingMode::Unconditioned;
  else throw DomainError(fmt::format("unknown sampling mode '{}'", sampling));
  c.seed = j.value("seed", c.seed);
  return c;
}

ProtocolModel ProtocolModel::compute(const ProtocolConfig& config) {
  config.validate();
  const double sigma = config.measurement.sigma(config.window.x0);
  const WindowStatistics stats =
      window_statistics(config.a, config.n, sigma, config.window, config.measurement.convention);
  ProtocolModel m;
  for (std::size_t i = 0; i < 8; ++i) m.patterns[i] = stats.conditionals.weight(i);
  m.acceptance = config.sampling == SamplingMode::PostSelected ? 1.0 : stats.acceptance_probability;
  m.primitive_mass = stats.conditionals.primitive_mass();
  m.eta = error_bound_eta(std::min(m.primitive_mass / 3.0, 1.0 / 3.0));
  return m;
}

std::array<double, 4> ProtocolModel::pair(PlayerId first, PlayerId second) const {
  std::array<double, 4> out{};
  for (std::size_t i = 0; i < 8; ++i) {
    out[static_cast<std::size_t>(2 * bit_of(i, first) + bit_of(i, second))] += patterns[i];
  }
  return out;
}

std::array<double, 2> ProtocolModel::single(PlayerId p) const {
  std::array<double, 2> out{};
  for (std::size_t i = 0; i < 8; ++i) out[static_cast<std::size_t>(bit_of(i, p))] += patterns[i];
  return out;
}

std::vector<double> ProtocolModel::with_rejection() const {
  std::vector<double> out;
  for (double p : patterns) out.push_back(p * acceptance);
  out.push_back(1.0 - acceptance);
  return out;
}

std::size_t violation_tolerance(std::size_t size, double eta) {
  const double n = static_cast<double>(size);
  return static_cast<std::size_t>(std::ceil(n * eta + 3.0 * std::sqrt(n * eta * (1.0 - eta)))) + 2;
}

StrategySet honest_strategies() {
  return {std::make_shared<Strategy>(), std::make_shared<Strategy>(), std::make_shared<Strategy>()};
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::BroadcastAchieved: return "broadcast_achieved";
    case Outcome::AllHonestAbort: return "all_honest_abort";
    case Outcome::DetectedAndAborted: return "detected_and_aborted";
    case Outcome::Failure: return "failure";
  }
  return "?";
}

std::string Verdict::label() const {
  if (outcome == Outcome::BroadcastAchieved && bit) return fmt::format("broadcast_achieved({})", value_of(*bit));
  if (outcome == Outcome::Failure) return fmt::format("failure({})", reason);
  return std::string(to_string(outcome));
}

ProtocolRun::ProtocolRun(const ProtocolConfig& config, const ProtocolModel& model, StrategySet strategies)
    : config_(config),
      model_(model),
      strategies_(std::move(strategies)),
      rngs_{RngStream(config.seed, "strategy/S"), RngStream(config.seed, "strategy/R0"),
            RngStream(config.seed, "strategy/R1")},
      network_(config.states, PlayerId::R1, (config.validate(), make_source(config))) {
  for (auto& s : strategies_) {
    if (!s) s = std::make_shared<Strategy>();
  }
  for (auto& v : views_) {
    v.own_outcome.assign(config_.states, std::nullopt);
    v.sender_magnitude.assign(config_.states, kUnknown);
    v.accepted_own.assign(config_.states, 0);
  }
}

StrategyContext ProtocolRun::context(PlayerId p) { return StrategyContext{p, config_, rngs_[index_of(p)]}; }

bool ProtocolRun::is_honest(PlayerId p) const { return strategies_[index_of(p)]->honest(); }

bool ProtocolRun::sender_accepts(double x) const { return config_.window.sender_accepts(x); }

bool ProtocolRun::receiver_accepts(double x, double sender_magnitude) const {
  return config_.window.receiver_accepts(x, sender_magnitude);
}

// Eight sign patterns, or 8 for a rejected or unreported run.
std::optional<std::size_t> ProtocolRun::test_category(double xs, double xr0, double xr1) const {
  if (!sender_accepts(xs)) return std::nullopt;
  const double ref = std::abs(xs);
  if (!receiver_accepts(xr0, ref) || !receiver_accepts(xr1, ref)) return std::nullopt;
  const auto conv = config_.measurement.convention;
  return pattern_index(bit_for_sign(xs, conv), bit_for_sign(xr0, conv), bit_for_sign(xr1, conv));
}

void ProtocolRun::note_test(const std::string& phase, const std::string& step, PlayerId who, const std::string& what,
                            const ChiSquareResult& r) {
  network_.note(phase, step, "test", who,
                fmt::format("{} n={} chi2={:.12g} dof={} p={:.12g} {}{}", what, r.total, r.statistic,
                            r.degrees_of_freedom, r.p_value, r.pass ? "pass" : "fail",
                            r.reason.empty() ? "" : " " + r.reason));
}

bool ProtocolRun::exchange_flags(const std::string& phase, const std::string& step, std::array<bool, 3>& flags) {
  for (PlayerId p : kPlayers) {
    for (PlayerId q : kPlayers) {
      if (p == q) continue;
      auto ctx = context(p);
      const bool sent = strategies_[index_of(p)]->send_flag(step, q, flags[index_of(p)], ctx);
      network_.send(Message{p, q, phase, step, Flag{sent}});
    }
  }
  network_.end_round();
  std::array<bool, 3> updated = flags;
  for (PlayerId p : kPlayers) {
    for (const auto& m : network_.receive(p)) {
      if (const auto* f = std::get_if<Flag>(&m.payload); f && !f->value) updated[index_of(p)] = false;
    }
  }
  flags = updated;
  bool go_on = true;
  for (PlayerId p : kPlayers) {
    network_.note(phase, step, "flag", p, flags[index_of(p)] ? "1" : "0");
    if (is_honest(p) && !flags[index_of(p)]) go_on = false;
  }
  return go_on;
}

Verdict ProtocolRun::abort_verdict(const std::string& step) const {
  Verdict v;
  v.aborted = true;
  v.reason = step;
  const bool adversary = std::any_of(kPlayers.begin(), kPlayers.end(), [&](PlayerId p) { return !is_honest(p); });
  v.outcome = adversary ? Outcome::DetectedAndAborted : Outcome::AllHonestAbort;
  return v;
}

Verdict ProtocolRun::classify(const std::array<std::optional<Bit>, 2>& decisions, Bit sender_bit) const {
  Verdict v;
  v.decisions = decisions;
  v.sender_bit = sender_bit;
  const bool adversary = std::any_of(kPlayers.begin(), kPlayers.end(), [&](PlayerId p) { return !is_honest(p); });
  std::vector<std::optional<Bit>> honest;
  if (is_honest(PlayerId::R0)) honest.push_back(decisions[0]);
  if (is_honest(PlayerId::R1)) honest.push_back(decisions[1]);

  std::size_t undecided = 0;
  for (const auto& d : honest) undecided += d ? 0 : 1;
  v.aborted = undecided > 0;
  if (honest.size() == 2 && honest[0] && honest[1] && *honest[0] != *honest[1]) {
    v.outcome = Outcome::Failure;
    v.reason = "contradictory_decisions";
    return v;
  }
  if (is_honest(PlayerId::S)) {
    for (const auto& d : honest) {
      if (d && *d != sender_bit) {
        v.outcome = Outcome::Failure;
        v.reason = "validity";
        return v;
      }
    }
  }
  if (undecided == honest.size()) {
    v.outcome = adversary ? Outcome::DetectedAndAborted : Outcome::AllHonestAbort;
    v.reason = "undecided";
    return v;
  }
  if (undecided > 0) {
    v.outcome = Outcome::Failure;
    v.reason = "partial_abort";
    return v;
  }
  v.outcome = Outcome::BroadcastAchieved;
  v.bit = *honest.front();
  return v;
}

DistributionResult ProtocolRun::run_distribution_phase() {
  const std::size_t m = config_.states;
  const double x0 = config_.window.x0;
  DistributionResult out;

  // (i-1) R1 keeps its own modes and hands out the other two.
  std::vector<std::size_t> all(m);
  std::iota(all.begin(), all.end(), std::size_t{0});
  network_.transfer(PlayerId::R1, PlayerId::S, refs_for(all, Mode::S), kDistribution, "(i-1)");
  network_.transfer(PlayerId::R1, PlayerId::R0, refs_for(all, Mode::R0), kDistribution, "(i-1)");
  network_.end_round();
  for (PlayerId p : kPlayers) {
    auto ctx = context(p);
    const double k = strategies_[index_of(p)]->shift_factor(ctx);
    if (k != 1.0) network_.displace(p, refs_for(all, own_mode(p)), (k - 1.0) * (-x0 / 3.0), kDistribution, "(i-1)");
  }

  // (i-2)
  const SetSizes sizes = set_sizes(config_);
  const auto order = shuffled(all, config_.seed, "sets/distribution");
  const auto k_s = sorted_slice(order, 0, sizes.k_sender);
  const auto k_r = sorted_slice(order, sizes.k_sender, sizes.k_receiver);
  out.retained = sorted_slice(order, sizes.k_sender + sizes.k_receiver, sizes.retained);

  network_.publish(PlayerId::S, kDistribution, "(i-2)", IndexSet{k_s});
  network_.publish(PlayerId::R0, kDistribution, "(i-2)", IndexSet{k_r});
  network_.end_round();
  for (PlayerId p : kPlayers) network_.receive(p);

  network_.transfer(PlayerId::S, PlayerId::R0, refs_for(k_s, Mode::S), kDistribution, "(i-2)");
  network_.transfer(PlayerId::R0, PlayerId::S, refs_for(k_r, Mode::R0), kDistribution, "(i-2)");
  network_.end_round();

  // Each test set: `holder` measures the S and R0 modes, R1 its own.
  struct TestSet {
    const std::vector<std::size_t>* indices;
    PlayerId holder;
    std::vector<double> xs, xr0, xr1;
  };
  std::array<TestSet, 2> sets{TestSet{&k_s, PlayerId::R0, {}, {}, {}}, TestSet{&k_r, PlayerId::S, {}, {}, {}}};
  for (auto& t : sets) {
    t.xs = network_.measure(t.holder, refs_for(*t.indices, Mode::S), kDistribution, "(i-2)");
    t.xr0 = network_.measure(t.holder, refs_for(*t.indices, Mode::R0), kDistribution, "(i-2)");
    t.xr1 = network_.measure(PlayerId::R1, refs_for(*t.indices, Mode::R1), kDistribution, "(i-2)");
  }

  // Results are exchanged between the two testers of each set.
  std::array<OutcomeAnnouncement, 2> from_holder;
  std::array<OutcomeAnnouncement, 2> from_r1;
  for (std::size_t s = 0; s < 2; ++s) {
    auto& t = sets[s];
    auto hctx = context(t.holder);
    auto rctx = context(PlayerId::R1);
    for (std::size_t k = 0; k < t.indices->size(); ++k) {
      const std::size_t i = (*t.indices)[k];
      for (Mode mode : {Mode::S, Mode::R0}) {
        const double x = mode == Mode::S ? t.xs[k] : t.xr0[k];
        from_holder[s].indices.push_back(i);
        from_holder[s].modes.push_back(mode);
        from_holder[s].values.push_back(strategies_[index_of(t.holder)]->report_outcome(i, mode, x, hctx));
      }
      from_r1[s].indices.push_back(i);
      from_r1[s].modes.push_back(Mode::R1);
      from_r1[s].values.push_back(strategies_[index_of(PlayerId::R1)]->report_outcome(i, Mode::R1, t.xr1[k], rctx));
    }
    network_.send(Message{t.holder, PlayerId::R1, kDistribution, "(i-2)", from_holder[s]});
    network_.send(Message{PlayerId::R1, t.holder, kDistribution, "(i-2)", from_r1[s]});
  }
  network_.end_round();
  std::array<std::vector<Message>, 3> inbox;
  for (PlayerId p : kPlayers) inbox[index_of(p)] = network_.receive(p);

  const std::vector<double> expected = model_.with_rejection();
  auto run_test = [&](const TestSet& t, bool holder_view) {
    std::vector<std::size_t> counts(9, 0);
    const auto& peer = holder_view ? from_r1[&t == &sets[0] ? 0 : 1] : from_holder[&t == &sets[0] ? 0 : 1];
    for (std::size_t k = 0; k < t.indices->size(); ++k) {
      double xs = t.xs[k];
      double xr0 = t.xr0[k];
      double xr1 = t.xr1[k];
      if (holder_view) {
        xr1 = peer.values[k].value_or(kUnknown);
      } else {
        xs = peer.values[2 * k].value_or(kUnknown);
        xr0 = peer.values[2 * k + 1].value_or(kUnknown);
      }
      counts[test_category(xs, xr0, xr1).value_or(8)] += 1;
    }
    return chi_square_consistency(counts, expected, config_.significance);
  };

  const auto r0_on_ks = run_test(sets[0], true);
  const auto r1_on_ks = run_test(sets[0], false);
  const auto s_on_kr = run_test(sets[1], true);
  const auto r1_on_kr = run_test(sets[1], false);
  note_test(kDistribution, "(i-2)", PlayerId::R0, "K_S", r0_on_ks);
  note_test(kDistribution, "(i-2)", PlayerId::R1, "K_S", r1_on_ks);
  note_test(kDistribution, "(i-2)", PlayerId::S, "K_R0", s_on_kr);
  note_test(kDistribution, "(i-2)", PlayerId::R1, "K_R0", r1_on_kr);
  out.flags = {s_on_kr.pass, r0_on_ks.pass, r1_on_ks.pass && r1_on_kr.pass};

  // (i-3)
  exchange_flags(kDistribution, "(i-3)", out.flags);
  return out;
}

TestResult ProtocolRun::run_test_phase(const DistributionResult& distribution) {
  const std::size_t m = config_.states;
  const auto conv = config_.measurement.convention;
  TestResult out;
  const auto& retained = distribution.retained;

  // (ii-2) six disjoint exchange sets L_P^Q: Q hands its subsystems to P.
  const auto order = shuffled(retained, config_.seed, "sets/exchange");
  const std::size_t l_total = set_sizes(config_).l_total;
  struct Exchange {
    PlayerId chooser;
    PlayerId giver;
    std::vector<std::size_t> indices;
  };
  std::vector<Exchange> exchanges;
  {
    std::size_t from = 0;
    std::size_t slot = 0;
    for (PlayerId p : kPlayers) {
      for (PlayerId q : kPlayers) {
        if (p == q) continue;
        const std::size_t count = l_total / 6 + (slot < l_total % 6 ? 1 : 0);
        exchanges.push_back({p, q, sorted_slice(order, from, count)});
        from += count;
        ++slot;
      }
    }
  }
  for (const auto& e : exchanges) network_.send(Message{e.chooser, e.giver, kTest, "(ii-2)", IndexSet{e.indices}});
  network_.end_round();
  for (PlayerId p : kPlayers) network_.receive(p);
  for (const auto& e : exchanges) {
    network_.transfer(e.giver, e.chooser, refs_for(e.indices, own_mode(e.giver)), kTest, "(ii-2)");
  }
  network_.end_round();

  // (ii-3) everyone measures what it holds.
  std::array<std::vector<std::array<double, 3>>, 3> held;
  for (PlayerId p : kPlayers) {
    held[index_of(p)].assign(m, {kUnknown, kUnknown, kUnknown});
    std::vector<SubsystemRef> mine;
    for (std::size_t i : retained) {
      for (Mode mode : {Mode::S, Mode::R0, Mode::R1}) {
        const SubsystemRef r{i, mode};
        if (network_.owner(r) == p && !network_.measured(r)) mine.push_back(r);
      }
    }
    const auto xs = network_.measure(p, mine, kTest, "(ii-3)");
    for (std::size_t k = 0; k < mine.size(); ++k) held[index_of(p)][mine[k].state][index_of(mine[k].mode)] = xs[k];
    auto& view = views_[index_of(p)];
    for (std::size_t i : retained) {
      const double own = held[index_of(p)][i][index_of(own_mode(p))];
      if (!std::isnan(own)) view.own_outcome[i] = own;
    }
  }

  // The holder of each sender mode announces its magnitude.
  for (PlayerId p : kPlayers) {
    OutcomeAnnouncement ann;
    auto ctx = context(p);
    for (std::size_t i : retained) {
      const double x = held[index_of(p)][i][0];
      if (std::isnan(x)) continue;
      const auto reported = strategies_[index_of(p)]->report_outcome(i, Mode::S, x, ctx);
      ann.indices.push_back(i);
      ann.modes.push_back(Mode::S);
      ann.values.push_back(reported ? std::optional<double>(std::abs(*reported)) : std::nullopt);
      views_[index_of(p)].sender_magnitude[i] = std::abs(x);
    }
    if (!ann.indices.empty()) network_.publish(p, kTest, "(ii-3)", ann);
  }
  network_.end_round();
  for (PlayerId p : kPlayers) {
    for (const auto& msg : network_.receive(p)) {
      const auto* ann = std::get_if<OutcomeAnnouncement>(&msg.payload);
      if (!ann) continue;
      for (std::size_t k = 0; k < ann->indices.size(); ++k) {
        views_[index_of(p)].sender_magnitude[ann->indices[k]] = ann->values[k].value_or(kUnknown);
      }
    }
  }

  auto accepted_by = [&](PlayerId viewer, std::size_t i, Mode mode) {
    const double x = held[index_of(viewer)][i][index_of(mode)];
    if (mode == Mode::S) return sender_accepts(x);
    return receiver_accepts(x, views_[index_of(viewer)].sender_magnitude[i]);
  };

  // Accepted-index announcements in rotation S -> R0 -> R1.
  std::array<std::vector<char>, 3> announced;
  for (PlayerId p : kPlayers) {
    auto& view = views_[index_of(p)];
    auto ctx = context(p);
    IndexSet set;
    for (std::size_t i : retained) {
      if (!view.own_outcome[i]) continue;
      if (!accepted_by(p, i, own_mode(p))) continue;
      view.accepted_own[i] = 1;
      if (strategies_[index_of(p)]->announce_accepted(i, bit_for_sign(*view.own_outcome[i], conv), ctx)) {
        set.indices.push_back(i);
      }
    }
    network_.publish(p, kTest, "(ii-3)", set);
    network_.end_round();
    for (PlayerId q : kPlayers) network_.receive(q);
    announced[index_of(p)].assign(m, 0);
    for (std::size_t i : set.indices) announced[index_of(p)][i] = 1;
  }

  // (ii-4) pairwise check on the exchange sets.
  for (const auto& e : exchanges) {
    PlayerId third = PlayerId::S;
    for (PlayerId t : kPlayers) {
      if (t != e.chooser && t != e.giver) third = t;
    }
    std::vector<std::size_t> counts(4, 0);
    std::size_t used = 0;
    for (std::size_t i : e.indices) {
      if (!announced[index_of(third)][i]) continue;
      if (!accepted_by(e.chooser, i, own_mode(e.chooser)) || !accepted_by(e.chooser, i, own_mode(e.giver))) continue;
      const int b1 = value_of(bit_for_sign(held[index_of(e.chooser)][i][index_of(own_mode(e.chooser))], conv));
      const int b2 = value_of(bit_for_sign(held[index_of(e.chooser)][i][index_of(own_mode(e.giver))], conv));
      counts[static_cast<std::size_t>(2 * b1 + b2)] += 1;
      ++used;
    }
    const std::string what = fmt::format("U({},{})", to_string(e.chooser), to_string(e.giver));
    if (used == 0) {
      network_.note(kTest, "(ii-4)", "test", e.chooser, what + " n=0 fail empty");
      out.flags[index_of(e.chooser)] = false;
      continue;
    }
    const auto pm = model_.pair(e.chooser, e.giver);
    const auto r = chi_square_consistency(counts, std::vector<double>(pm.begin(), pm.end()), config_.significance);
    note_test(kTest, "(ii-4)", e.chooser, what, r);
    if (!r.pass) out.flags[index_of(e.chooser)] = false;
  }

  // (ii-5) own-bit marginal on the three-way intersection.
  std::vector<char> mhat(m, 0);
  for (std::size_t i : retained) {
    mhat[i] = announced[0][i] && announced[1][i] && announced[2][i] ? 1 : 0;
  }
  const auto mhat_list = mask_to_list(mhat);
  for (PlayerId p : kPlayers) {
    if (mhat_list.empty()) {
      network_.note(kTest, "(ii-5)", "test", p, "M n=0 fail empty");
      out.flags[index_of(p)] = false;
      continue;
    }
    std::vector<std::size_t> counts(2, 0);
    for (std::size_t i : mhat_list) {
      const auto& x = views_[index_of(p)].own_outcome[i];
      counts[static_cast<std::size_t>(value_of(bit_for_sign(x.value_or(0.0), conv)))] += 1;
    }
    const auto sm = model_.single(p);
    const auto r = chi_square_consistency(counts, std::vector<double>(sm.begin(), sm.end()), config_.significance);
    note_test(kTest, "(ii-5)", p, "M", r);
    if (!r.pass) out.flags[index_of(p)] = false;
  }

  // (ii-6) control sets revealed in turn.
  std::vector<char> in_control(m, 0);
  if (!mhat_list.empty()) {
    const auto control_order = shuffled(mhat_list, config_.seed, "sets/control");
    const auto per_set = static_cast<std::size_t>(std::floor(config_.v_fraction * static_cast<double>(mhat_list.size())));
    std::vector<double> expected(model_.patterns.begin(), model_.patterns.end());
    expected.push_back(0.0);
    for (PlayerId p : kPlayers) {
      const auto v = sorted_slice(control_order, index_of(p) * per_set, per_set);
      for (std::size_t i : v) in_control[i] = 1;
      network_.publish(p, kTest, "(ii-6)", IndexDemand{v, std::nullopt});
      network_.end_round();
      for (PlayerId q : kPlayers) network_.receive(q);
      std::array<std::vector<std::optional<double>>, 3> reported;
      for (PlayerId q : kPlayers) {
        if (q == p) continue;
        OutcomeAnnouncement ann;
        auto ctx = context(q);
        for (std::size_t i : v) {
          ann.indices.push_back(i);
          ann.modes.push_back(own_mode(q));
          ann.values.push_back(strategies_[index_of(q)]->report_outcome(
              i, own_mode(q), views_[index_of(q)].own_outcome[i].value_or(kUnknown), ctx));
        }
        reported[index_of(q)] = ann.values;
        network_.send(Message{q, p, kTest, "(ii-6)", ann});
      }
      network_.end_round();
      network_.receive(p);
      if (v.empty()) continue;
      std::vector<std::size_t> counts(9, 0);
      for (std::size_t k = 0; k < v.size(); ++k) {
        std::array<double, 3> x{};
        for (PlayerId q : kPlayers) {
          x[index_of(q)] = q == p ? views_[index_of(p)].own_outcome[v[k]].value_or(kUnknown)
                                  : reported[index_of(q)][k].value_or(kUnknown);
        }
        counts[test_category(x[0], x[1], x[2]).value_or(8)] += 1;
      }
      const auto r = chi_square_consistency(counts, expected, config_.significance);
      note_test(kTest, "(ii-6)", p, "V", r);
      if (!r.pass) out.flags[index_of(p)] = false;
    }
  }

  // (ii-7)
  if (!exchange_flags(kTest, "(ii-7)", out.flags)) return out;
  for (std::size_t i : mhat_list) {
    if (!in_control[i]) out.working_set.push_back(i);
  }
  if (out.working_set.size() % 2 != 0) out.working_set.pop_back();
  network_.note(kTest, "(ii-7)", "working_set", std::nullopt, std::to_string(out.working_set.size()));
  return out;
}

Verdict ProtocolRun::run_broadcast_phase(const TestResult& test) {
  const auto conv = config_.measurement.convention;
  const auto& w = test.working_set;

  std::array<std::vector<Trit>, 3> trits;
  std::vector<BitTriple> runs;
  runs.reserve(w.size());
  for (std::size_t i : w) {
    BitTriple t{};
    for (PlayerId p : kPlayers) {
      t[index_of(p)] = bit_for_sign(views_[index_of(p)].own_outcome[i].value_or(0.0), conv);
    }
    runs.push_back(t);
  }
  records_ = assemble_primitive(runs);
  for (PlayerId p : kPlayers) {
    std::vector<Bit> bits;
    bits.reserve(runs.size());
    for (const auto& t : runs) bits.push_back(t[index_of(p)]);
    trits[index_of(p)] = pair_bits(bits);
  }
  const std::size_t n_records = records_.size();

  // u-records are announced and dropped by everyone.
  std::vector<char> live(n_records, 1);
  for (PlayerId p : kPlayers) {
    IndexSet set;
    for (std::size_t r = 0; r < n_records; ++r) {
      if (trits[index_of(p)][r] == Trit::U) set.indices.push_back(r);
    }
    network_.publish(p, kTest, "(ii-7)", set);
    for (std::size_t r : set.indices) live[r] = 0;
  }
  network_.end_round();
  for (PlayerId p : kPlayers) network_.receive(p);
  const auto live_count = static_cast<std::size_t>(std::count(live.begin(), live.end(), 1));
  network_.note(kTest, "(ii-7)", "records", std::nullopt,
                fmt::format("paired={} live={}", n_records, live_count));

  // (iii-1)
  RngStream bit_rng(config_.seed, "sender_bit");
  const Bit b = bit_from_int(static_cast<int>(bit_rng() & 1u));
  {
    auto ctx = context(PlayerId::S);
    const auto sent = strategies_[0]->broadcast_bits(b, ctx);
    network_.send(Message{PlayerId::S, PlayerId::R0, kBroadcast, "(iii-1)", BroadcastBit{sent[0]}});
    network_.send(Message{PlayerId::S, PlayerId::R1, kBroadcast, "(iii-1)", BroadcastBit{sent[1]}});
  }
  network_.end_round();
  std::array<Bit, 2> received_bit{Bit::Zero, Bit::Zero};
  for (std::size_t r = 0; r < 2; ++r) {
    const PlayerId me = r == 0 ? PlayerId::R0 : PlayerId::R1;
    const auto inbox = network_.receive(me);
    if (const auto* bb = find_payload<BroadcastBit>(inbox, PlayerId::S)) received_bit[r] = bb->value;
  }

  // (iii-2)
  for (std::size_t r = 0; r < 2; ++r) {
    const PlayerId me = r == 0 ? PlayerId::R0 : PlayerId::R1;
    network_.send(Message{me, PlayerId::S, kBroadcast, "(iii-2)", IndexDemand{{}, received_bit[r]}});
  }
  network_.end_round();
  for (const auto& msg : network_.receive(PlayerId::S)) {
    const auto* d = std::get_if<IndexDemand>(&msg.payload);
    if (!d || !d->value) continue;
    std::vector<std::size_t> honest_set;
    for (std::size_t k = 0; k < n_records; ++k) {
      if (live[k] && trits[0][k] == trit_of(*d->value)) honest_set.push_back(k);
    }
    auto ctx = context(PlayerId::S);
    auto reply = strategies_[0]->index_set_reply(msg.from, *d->value, std::move(honest_set), ctx);
    network_.send(Message{PlayerId::S, msg.from, kBroadcast, "(iii-2)", IndexReply{std::move(reply)}});
  }
  network_.end_round();

  auto valid_index_list = [&](const std::vector<std::size_t>& list, std::vector<char>& seen) {
    std::size_t bad = 0;
    for (std::size_t k : list) {
      if (k >= n_records || !live[k] || seen[k]) {
        ++bad;
        continue;
      }
      seen[k] = 1;
    }
    return bad;
  };

  std::array<std::vector<std::size_t>, 2> index_sets;
  std::array<std::vector<char>, 2> index_masks;
  std::array<std::optional<Bit>, 2> c;
  for (std::size_t r = 0; r < 2; ++r) {
    const PlayerId me = r == 0 ? PlayerId::R0 : PlayerId::R1;
    const auto inbox = network_.receive(me);
    if (const auto* reply = find_payload<IndexReply>(inbox, PlayerId::S)) index_sets[r] = reply->indices;
    index_masks[r].assign(n_records, 0);
    std::size_t violations = valid_index_list(index_sets[r], index_masks[r]);
    for (std::size_t k : index_sets[r]) {
      if (k < n_records && trits[index_of(me)][k] == trit_of(received_bit[r])) ++violations;
    }
    const double expected_size = static_cast<double>(live_count) / 3.0;
    const std::size_t tolerance = violation_tolerance(index_sets[r].size(), model_.eta);
    const bool big_enough = static_cast<double>(index_sets[r].size()) >= config_.min_size_fraction * expected_size;
    const bool consistent = violations <= tolerance && big_enough;
    if (consistent) c[r] = received_bit[r];
    network_.note(kBroadcast, "(iii-2)", "consistency", me,
                  fmt::format("b={} size={} violations={} tolerance={} min_size={:.12g} c={}",
                              value_of(received_bit[r]), index_sets[r].size(), violations, tolerance,
                              config_.min_size_fraction * expected_size, flag_text(c[r])));
  }

  // (iii-3)
  {
    auto ctx0 = context(PlayerId::R0);
    auto ctx1 = context(PlayerId::R1);
    network_.send(Message{PlayerId::R0, PlayerId::R1, kBroadcast, "(iii-3)",
                          FlagExchange{strategies_[1]->broadcast_flag(c[0], ctx0)}});
    network_.send(Message{PlayerId::R1, PlayerId::R0, kBroadcast, "(iii-3)",
                          FlagExchange{strategies_[2]->broadcast_flag(c[1], ctx1)}});
  }
  network_.end_round();
  std::array<std::optional<Bit>, 2> other_flag;
  for (std::size_t r = 0; r < 2; ++r) {
    const PlayerId me = r == 0 ? PlayerId::R0 : PlayerId::R1;
    const PlayerId peer = r == 0 ? PlayerId::R1 : PlayerId::R0;
    const auto inbox = network_.receive(me);
    if (const auto* f = find_payload<FlagExchange>(inbox, peer)) other_flag[r] = f->value;
  }

  // (iii-4) an undecided receiver adopts the other's flag.
  std::array<std::optional<Bit>, 2> decision = c;
  for (std::size_t r = 0; r < 2; ++r) {
    if (!c[r]) decision[r] = other_flag[r];
  }

  // (iii-5) R1 resolves a conflict by asking R0 for evidence.
  const bool conflict = c[1] && other_flag[1] && *other_flag[1] != *c[1];
  if (conflict) {
    const Bit claimed = *other_flag[1];
    network_.send(Message{PlayerId::R1, PlayerId::R0, kBroadcast, "(iii-5)", IndexDemand{{}, flip(claimed)}});
    network_.end_round();
    for (const auto& msg : network_.receive(PlayerId::R0)) {
      const auto* d = std::get_if<IndexDemand>(&msg.payload);
      if (!d || !d->value) continue;
      std::vector<std::size_t> honest_reply;
      for (std::size_t k : index_sets[0]) {
        if (k < n_records && trits[1][k] == trit_of(*d->value)) honest_reply.push_back(k);
      }
      auto ctx = context(PlayerId::R0);
      auto reply = strategies_[1]->conflict_reply(std::move(honest_reply), index_sets[0], ctx);
      network_.send(Message{PlayerId::R0, PlayerId::R1, kBroadcast, "(iii-5)", IndexReply{std::move(reply)}});
    }
    network_.end_round();
    std::vector<std::size_t> evidence;
    const auto inbox = network_.receive(PlayerId::R1);
    if (const auto* reply = find_payload<IndexReply>(inbox, PlayerId::R0)) evidence = reply->indices;

    std::vector<char> seen(n_records, 0);
    std::size_t in_j1 = valid_index_list(evidence, seen);
    std::size_t not_two = 0;
    for (std::size_t k : evidence) {
      if (k >= n_records) continue;
      if (index_masks[1][k]) ++in_j1;
      if (trits[2][k] != Trit::Two) ++not_two;
    }
    const double expected_size = static_cast<double>(live_count) / 6.0;
    const std::size_t tolerance = violation_tolerance(evidence.size(), model_.eta);
    const bool big_enough = static_cast<double>(evidence.size()) >= config_.min_size_fraction * expected_size;
    const bool convinced = in_j1 == 0 && not_two <= tolerance && big_enough;
    if (convinced) decision[1] = claimed;
    network_.note(kBroadcast, "(iii-5)", "conflict_check", PlayerId::R1,
                  fmt::format("size={} in_J1={} not_two={} tolerance={} min_size={:.12g} {}", evidence.size(), in_j1,
                              not_two, tolerance, config_.min_size_fraction * expected_size,
                              convinced ? "adopt" : "keep"));
  }

  for (std::size_t r = 0; r < 2; ++r) {
    network_.note(kBroadcast, "(iii-5)", "decision", r == 0 ? PlayerId::R0 : PlayerId::R1, flag_text(decision[r]));
  }
  return classify(decision, b);
}

Verdict ProtocolRun::run() {
  Verdict v;
  const auto dist = run_distribution_phase();
  bool go_on = true;
  for (PlayerId p : kPlayers) {
    if (is_honest(p) && !dist.flags[index_of(p)]) go_on = false;
  }
  if (!go_on) {
    v = abort_verdict("(i-3)");
  } else {
    const auto test = run_test_phase(dist);
    go_on = true;
    for (PlayerId p : kPlayers) {
      if (is_honest(p) && !test.flags[index_of(p)]) go_on = false;
    }
    v = go_on ? run_broadcast_phase(test) : abort_verdict("(ii-7)");
  }
  network_.note("verdict", "", "verdict", std::nullopt,
                fmt::format("{} R0={} R1={}", v.label(), flag_text(v.decisions[0]), flag_text(v.decisions[1])));
  return v;
}

ProtocolOutput run_protocol(const ProtocolConfig& config, const ProtocolModel& model, const StrategySet& strategies) {
  ProtocolRun run(config, model, strategies);
  ProtocolOutput out;
  out.verdict = run.run();
  out.events = run.network().events();
  return out;
}

ProtocolOutput run_protocol(const ProtocolConfig& config, const StrategySet& strategies) {
  return run_protocol(config, ProtocolModel::compute(config), strategies);
}

}  // namespace cvb
