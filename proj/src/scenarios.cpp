#include "cvbroadcast/scenarios.hpp"

#include <cmath>
#include <memory>

#include <fmt/format.h>

#include "cvbroadcast/errors.hpp"

namespace cvb {

std::string ShiftingReceiver::name() const { return fmt::format("shifting_receiver(K={:.12g})", k_); }

bool HidingReceiver::announce_accepted(std::size_t, Bit own_bit, StrategyContext& ctx) {
  if (own_bit != Bit::Zero) return true;
  return ctx.rng.uniform() >= rate_;
}

std::optional<Bit> FalseFlagReceiver::broadcast_flag(std::optional<Bit> own_flag, StrategyContext&) {
  if (!own_flag) return own_flag;
  return flip(*own_flag);
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"all_honest", "sender_equivocates", "receiver_shift_attack",
                                              "receiver_hides", "receiver_false_flag"};
  return names;
}

std::string scenario_label(const Scenario& scenario) {
  if (scenario.name == "receiver_shift_attack") return fmt::format("receiver_shift_attack(K={:.12g})", scenario.k);
  return scenario.name;
}

StrategySet make_scenario(const Scenario& scenario) {
  StrategySet set = honest_strategies();
  const auto& n = scenario.name;
  if (n == "all_honest") return set;
  if (n == "sender_equivocates") {
    set[index_of(PlayerId::S)] = std::make_shared<EquivocatingSender>();
  } else if (n == "receiver_shift_attack") {
    if (!std::isfinite(scenario.k)) throw DomainError("shift factor K must be finite");
    set[index_of(PlayerId::R0)] = std::make_shared<ShiftingReceiver>(scenario.k);
  } else if (n == "receiver_hides") {
    set[index_of(PlayerId::R0)] = std::make_shared<HidingReceiver>();
  } else if (n == "receiver_false_flag") {
    set[index_of(PlayerId::R0)] = std::make_shared<FalseFlagReceiver>();
  } else {
    throw DomainError(fmt::format("unknown scenario '{}'", n));
  }
  return set;
}

}  // namespace cvb
