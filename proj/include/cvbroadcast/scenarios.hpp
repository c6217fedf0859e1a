#pragma once

// Named strategy sets: the honest baseline and the adversaries exercised by
// the safety ensembles. At most one player deviates in each.

#include <optional>
#include <string>
#include <vector>

#include "cvbroadcast/protocol.hpp"

namespace cvb {

// S sends b to R0 and the opposite bit to R1, with index sets that match
// each bit.
class EquivocatingSender : public Strategy {
 public:
  std::string name() const override { return "equivocating_sender"; }
  bool honest() const override { return false; }
  std::array<Bit, 2> broadcast_bits(Bit b, StrategyContext&) override { return {b, flip(b)}; }
};

// Displaces every own mode by (K - 1) times the primitive displacement.
class ShiftingReceiver : public Strategy {
 public:
  explicit ShiftingReceiver(double k) : k_(k) {}
  std::string name() const override;
  bool honest() const override { return false; }
  double shift_factor(StrategyContext&) override { return k_; }

 private:
  double k_;
};

// Leaves accepted runs with own bit 0 out of the accepted-index
// announcement with probability `rate`.
class HidingReceiver : public Strategy {
 public:
  explicit HidingReceiver(double rate = 0.5) : rate_(rate) {}
  std::string name() const override { return "hiding_receiver"; }
  bool honest() const override { return false; }
  bool announce_accepted(std::size_t, Bit own_bit, StrategyContext& ctx) override;

 private:
  double rate_;
};

// Reports the opposite flag in (iii-3) and answers the conflict demand with
// the whole index set it received.
class FalseFlagReceiver : public Strategy {
 public:
  std::string name() const override { return "false_flag_receiver"; }
  bool honest() const override { return false; }
  std::optional<Bit> broadcast_flag(std::optional<Bit> own_flag, StrategyContext&) override;
  std::vector<std::size_t> conflict_reply(std::vector<std::size_t>, const std::vector<std::size_t>& index_set,
                                          StrategyContext&) override {
    return index_set;
  }
};

struct Scenario {
  std::string name;
  double k = 3.0;  // shift factor, receiver_shift_attack only
};

// all_honest, sender_equivocates, receiver_shift_attack, receiver_hides,
// receiver_false_flag. DomainError for an unknown name.
StrategySet make_scenario(const Scenario& scenario);
const std::vector<std::string>& scenario_names();
std::string scenario_label(const Scenario& scenario);

}  // namespace cvb
