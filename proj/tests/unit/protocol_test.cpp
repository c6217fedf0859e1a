#include <algorithm>

#include <gtest/gtest.h>

#include "cvbroadcast/errors.hpp"
#include "cvbroadcast/protocol.hpp"
#include "cvbroadcast/scenarios.hpp"
#include "cvbroadcast/transcript.hpp"

namespace cvb {
namespace {

ProtocolConfig small_config(std::uint64_t seed) {
  ProtocolConfig c;
  c.states = 6000;
  c.seed = seed;
  return c;
}

Bit sender_bit_for(std::uint64_t seed) {
  RngStream rng(seed, "sender_bit");
  return bit_from_int(static_cast<int>(rng() & 1u));
}

std::uint64_t seed_with_sender_bit(Bit b) {
  std::uint64_t seed = 1;
  while (sender_bit_for(seed) != b) ++seed;
  return seed;
}

// Flips its (iii-3) flag and answers the conflict demand with made-up
// indices covering every record, so some of them lie in J1.
class FabricatingReceiver : public FalseFlagReceiver {
 public:
  std::vector<std::size_t> conflict_reply(std::vector<std::size_t>, const std::vector<std::size_t>& index_set,
                                          StrategyContext&) override {
    const std::size_t top = index_set.empty() ? 0 : *std::max_element(index_set.begin(), index_set.end());
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k <= top; ++k) out.push_back(k);
    return out;
  }
};

class SilentReceiver : public FalseFlagReceiver {
 public:
  std::vector<std::size_t> conflict_reply(std::vector<std::size_t>, const std::vector<std::size_t>&,
                                          StrategyContext&) override {
    return {};
  }
};

const Event* find_note(const std::vector<Event>& events, const std::string& step, const std::string& kind) {
  for (const auto& e : events) {
    if (e.step == step && e.kind == kind) return &e;
  }
  return nullptr;
}

TEST(Config, ZeroStatesIsStructural) {
  ProtocolConfig c;
  c.states = 0;
  EXPECT_THROW(c.validate(), StructuralError);
  EXPECT_THROW(run_protocol(c, honest_strategies()), StructuralError);
}

TEST(Config, InfeasibleFractions) {
  ProtocolConfig c;
  c.k_sender_fraction = 0.6;
  c.k_receiver_fraction = 0.5;
  EXPECT_THROW(c.validate(), StructuralError);
  c = ProtocolConfig{};
  c.v_fraction = 0.4;
  EXPECT_THROW(c.validate(), StructuralError);
  c = ProtocolConfig{};
  c.significance = 1.5;
  EXPECT_THROW(c.validate(), DomainError);
  c = ProtocolConfig{};
  c.a = 0.8;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(Config, JsonRoundTrip) {
  ProtocolConfig c;
  c.states = 1234;
  c.a = 2.0;
  c.measurement.sigma_model = SigmaModel::proportional(0.1);
  c.sampling = SamplingMode::Unconditioned;
  c.seed = 99;
  const auto back = ProtocolConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_THROW(ProtocolConfig::from_json(nlohmann::json{{"sampling", "sometimes"}}), DomainError);
}

TEST(Model, PairAndSingleMarginals) {
  const auto m = ProtocolModel::compute(ProtocolConfig{});
  for (PlayerId p : kPlayers) {
    for (PlayerId q : kPlayers) {
      if (p == q) continue;
      const auto pair = m.pair(p, q);
      EXPECT_NEAR(pair[0] + pair[1] + pair[2] + pair[3], 1.0, 1e-12);
      // Both players reading 0 needs two zeros in one run.
      EXPECT_LT(pair[0], 1e-6);
      EXPECT_NEAR(pair[1], m.single(p)[0], 1e-6);
      EXPECT_NEAR(pair[2], m.single(q)[0], 1e-6);
    }
    const auto s = m.single(p);
    EXPECT_NEAR(s[0] + s[1], 1.0, 1e-12);
  }
  EXPECT_NEAR(m.single(PlayerId::S)[0] + m.single(PlayerId::R0)[0] + m.single(PlayerId::R1)[0], 1.0, 1e-5);
  const auto r = m.with_rejection();
  ASSERT_EQ(r.size(), 9u);
  EXPECT_EQ(r[8], 0.0);
  EXPECT_LT(m.eta, 1e-4);
}

TEST(ViolationTolerance, GrowsWithSize) {
  EXPECT_EQ(violation_tolerance(0, 0.01), 2u);
  EXPECT_EQ(violation_tolerance(10000, 0.0), 2u);
  EXPECT_EQ(violation_tolerance(10000, 0.01), 100u + 30u + 2u);
}

TEST(Distribution, HonestIdealParametersPass) {
  ProtocolConfig c;
  c.states = 20000;
  c.n = 1.0;
  c.window = AcceptanceWindow{5.0, 0.0, 2.0, 0.05};
  c.seed = 3;
  ProtocolRun run(c, ProtocolModel::compute(c), honest_strategies());
  const auto d = run.run_distribution_phase();
  EXPECT_TRUE(d.flags[0] && d.flags[1] && d.flags[2]);
  EXPECT_TRUE(std::is_sorted(d.retained.begin(), d.retained.end()));
  EXPECT_EQ(d.retained.size(), c.states - 2 * 2000);
}

TEST(Distribution, ShiftAttackDetected) {
  const auto c = small_config(4);
  ProtocolRun run(c, ProtocolModel::compute(c), make_scenario(Scenario{"receiver_shift_attack", 3.0}));
  const auto d = run.run_distribution_phase();
  EXPECT_FALSE(d.flags[0]);
  EXPECT_FALSE(d.flags[2]);
}

TEST(TestPhase, HonestWorkingSetEven) {
  for (std::size_t states : {6000u, 6001u, 6003u, 7777u}) {
    auto c = small_config(8);
    c.states = states;
    ProtocolRun run(c, ProtocolModel::compute(c), honest_strategies());
    const auto d = run.run_distribution_phase();
    const auto t = run.run_test_phase(d);
    EXPECT_TRUE(t.flags[0] && t.flags[1] && t.flags[2]) << states;
    EXPECT_FALSE(t.working_set.empty());
    EXPECT_EQ(t.working_set.size() % 2, 0u) << states;
    EXPECT_TRUE(std::is_sorted(t.working_set.begin(), t.working_set.end()));
  }
}

TEST(TestPhase, HidingDetected) {
  const auto c = small_config(9);
  ProtocolRun run(c, ProtocolModel::compute(c), make_scenario(Scenario{"receiver_hides"}));
  const auto d = run.run_distribution_phase();
  ASSERT_TRUE(d.flags[0] && d.flags[2]);
  const auto t = run.run_test_phase(d);
  EXPECT_FALSE(t.flags[0]);
  EXPECT_FALSE(t.flags[2]);
}

TEST(Broadcast, HonestSenderZero) {
  const auto out = run_protocol(small_config(seed_with_sender_bit(Bit::Zero)), honest_strategies());
  EXPECT_EQ(out.verdict.outcome, Outcome::BroadcastAchieved);
  EXPECT_EQ(out.verdict.label(), "broadcast_achieved(0)");
  EXPECT_EQ(out.verdict.decisions[0], Bit::Zero);
  EXPECT_EQ(out.verdict.decisions[1], Bit::Zero);
  EXPECT_FALSE(out.verdict.aborted);
}

TEST(Broadcast, EquivocatingSenderLeavesReceiversAgreeing) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto out = run_protocol(small_config(seed), make_scenario(Scenario{"sender_equivocates"}));
    EXPECT_EQ(out.verdict.decisions[0], out.verdict.decisions[1]) << seed;
    EXPECT_NE(out.verdict.outcome, Outcome::Failure) << out.verdict.label();
    ASSERT_NE(find_note(out.events, "(iii-5)", "conflict_check"), nullptr);
  }
}

TEST(Broadcast, FabricatedEvidenceRejected) {
  const auto seed = seed_with_sender_bit(Bit::One);
  const auto out = run_protocol(small_config(seed), {std::make_shared<Strategy>(),
                                                     std::make_shared<FabricatingReceiver>(),
                                                     std::make_shared<Strategy>()});
  const Event* check = find_note(out.events, "(iii-5)", "conflict_check");
  ASSERT_NE(check, nullptr);
  EXPECT_NE(check->detail.find("keep"), std::string::npos) << check->detail;
  EXPECT_EQ(check->detail.find("in_J1=0 "), std::string::npos) << check->detail;
  EXPECT_EQ(out.verdict.decisions[1], Bit::One);
  EXPECT_EQ(out.verdict.label(), "broadcast_achieved(1)");
}

TEST(Broadcast, EmptyEvidenceRejected) {
  const auto out = run_protocol(small_config(2), {std::make_shared<Strategy>(), std::make_shared<SilentReceiver>(),
                                                  std::make_shared<Strategy>()});
  const Event* check = find_note(out.events, "(iii-5)", "conflict_check");
  ASSERT_NE(check, nullptr);
  EXPECT_NE(check->detail.find("size=0"), std::string::npos);
  EXPECT_NE(check->detail.find("keep"), std::string::npos);
  EXPECT_EQ(out.verdict.decisions[1], sender_bit_for(2));
}

TEST(Protocol, DeterministicTranscript) {
  const auto c = small_config(21);
  const auto a = run_protocol(c, make_scenario(Scenario{"receiver_false_flag"}));
  const auto b = run_protocol(c, make_scenario(Scenario{"receiver_false_flag"}));
  EXPECT_EQ(transcript_jsonl(c, "x", a.events), transcript_jsonl(c, "x", b.events));
  EXPECT_EQ(a.verdict.label(), b.verdict.label());
  const auto other = run_protocol(small_config(22), make_scenario(Scenario{"receiver_false_flag"}));
  EXPECT_NE(transcript_jsonl(c, "x", a.events), transcript_jsonl(c, "x", other.events));
}

TEST(Protocol, UnconditionedSamplingRuns) {
  auto c = small_config(5);
  c.sampling = SamplingMode::Unconditioned;
  c.states = 2000;
  c.window = AcceptanceWindow{1.0, 0.0, 1.0, 0.2};
  c.n = 1.0;
  const auto out = run_protocol(c, honest_strategies());
  EXPECT_NE(out.verdict.outcome, Outcome::Failure) << out.verdict.label();
}

TEST(Scenarios, NamesAndLabels) {
  EXPECT_EQ(scenario_names().size(), 5u);
  EXPECT_EQ(scenario_label(Scenario{"receiver_shift_attack", 3.0}), "receiver_shift_attack(K=3)");
  EXPECT_THROW(make_scenario(Scenario{"nobody"}), DomainError);
  for (const auto& n : scenario_names()) {
    const auto set = make_scenario(Scenario{n});
    const auto dishonest = std::count_if(set.begin(), set.end(), [](const auto& s) { return !s->honest(); });
    EXPECT_EQ(dishonest, n == "all_honest" ? 0 : 1);
  }
}

TEST(Ensemble, SummaryAndCsv) {
  ProtocolConfig c;
  c.states = 4000;
  const auto runs = run_ensemble(c, Scenario{"all_honest"}, 10, 4, 2, false);
  ASSERT_EQ(runs.size(), 4u);
  EXPECT_EQ(runs[0].seed, 10u);
  const auto s = summarize(runs);
  EXPECT_EQ(s.broadcast, 4u);
  const auto csv = verdict_csv("all_honest", runs);
  EXPECT_EQ(csv.rfind("# cvbroadcast ", 0), 0u);
  EXPECT_NE(csv.find(std::string(kVerdictCsvHeader) + "\n"), std::string::npos);
  EXPECT_NE(csv.find("\n10,all_honest,broadcast_achieved("), std::string::npos);
}

}  // namespace
}  // namespace cvb
