#include <gtest/gtest.h>

#include "cvbroadcast/errors.hpp"
#include "cvbroadcast/netsim.hpp"
#include "cvbroadcast/protocol.hpp"

namespace cvb {
namespace {

OutcomeSource counting_source(int* calls) {
  return [calls](std::size_t i) {
    ++*calls;
    const double v = static_cast<double>(i);
    return OutcomeTriple{v, v + 0.1, v + 0.2};
  };
}

TEST(Rng, DeterministicAndLabelled) {
  RngStream a(7, "x", 1), b(7, "x", 1), c(7, "y", 1), d(7, "x", 2);
  const auto va = a();
  EXPECT_EQ(va, b());
  EXPECT_NE(va, c());
  EXPECT_NE(va, d());
  RngStream u(1, "u");
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, 1.0);
  }
}

TEST(Network, MessagesArriveAfterRoundEnds) {
  int calls = 0;
  Network net(4, PlayerId::S, counting_source(&calls));
  net.send(Message{PlayerId::S, PlayerId::R0, "p", "s", Flag{true}});
  EXPECT_TRUE(net.receive(PlayerId::R0).empty());
  net.end_round();
  const auto inbox = net.receive(PlayerId::R0);
  ASSERT_EQ(inbox.size(), 1u);
  EXPECT_TRUE(std::get<Flag>(inbox[0].payload).value);
  EXPECT_TRUE(net.receive(PlayerId::R1).empty());
  EXPECT_EQ(net.round(), 1u);
  EXPECT_THROW(net.send(Message{PlayerId::R1, PlayerId::R1, "p", "s", Flag{}}), StructuralError);
}

TEST(Network, OwnershipEnforced) {
  int calls = 0;
  Network net(2, PlayerId::S, counting_source(&calls));
  const SubsystemRef r0{0, Mode::R0};
  EXPECT_THROW(net.measure(PlayerId::R0, {r0}, "p", "s"), OwnershipViolation);
  net.transfer(PlayerId::S, PlayerId::R0, {r0}, "p", "s");
  EXPECT_EQ(net.owner(r0), PlayerId::R0);
  EXPECT_THROW(net.transfer(PlayerId::S, PlayerId::R1, {r0}, "p", "s"), OwnershipViolation);
  EXPECT_THROW(net.displace(PlayerId::S, {r0}, 1.0, "p", "s"), OwnershipViolation);
  const auto x = net.measure(PlayerId::R0, {r0}, "p", "s");
  EXPECT_DOUBLE_EQ(x[0], 0.1);
  EXPECT_THROW(net.measure(PlayerId::R0, {r0}, "p", "s"), OwnershipViolation);
  EXPECT_THROW(net.transfer(PlayerId::R0, PlayerId::S, {r0}, "p", "s"), OwnershipViolation);
  EXPECT_THROW(net.measure(PlayerId::S, {SubsystemRef{5, Mode::S}}, "p", "s"), StructuralError);
}

TEST(Network, JointOutcomesDrawnOncePerState) {
  int calls = 0;
  Network net(3, PlayerId::S, counting_source(&calls));
  net.transfer(PlayerId::S, PlayerId::R1, {SubsystemRef{2, Mode::R1}}, "p", "s");
  net.displace(PlayerId::R1, {SubsystemRef{2, Mode::R1}}, -1.0, "p", "s");
  const auto xs = net.measure(PlayerId::S, {SubsystemRef{2, Mode::S}}, "p", "s");
  const auto xr = net.measure(PlayerId::R1, {SubsystemRef{2, Mode::R1}}, "p", "s");
  EXPECT_EQ(calls, 1);
  EXPECT_DOUBLE_EQ(xs[0], 2.0);
  EXPECT_DOUBLE_EQ(xr[0], 1.2);
  EXPECT_EQ(net.measured_count(), 2u);
}

TEST(Network, SecrecyOfLoggedTraffic) {
  int calls = 0;
  Network net(1, PlayerId::S, counting_source(&calls));
  net.publish(PlayerId::R0, "p", "s", IndexSet{{1, 2, 3}});
  net.end_round();
  net.receive(PlayerId::S);
  net.receive(PlayerId::R1);
  std::string why;
  EXPECT_TRUE(check_secrecy(net.events(), &why)) << why;

  auto forged = net.events();
  forged.back().to = PlayerId::R0;
  EXPECT_FALSE(check_secrecy(forged, &why));
  auto doubled = net.events();
  doubled.push_back(doubled.back());
  EXPECT_FALSE(check_secrecy(doubled, &why));
}

TEST(Network, DigestsDistinguishPayloads) {
  EXPECT_NE(digest_of(canonical_text(IndexSet{{1, 2}})), digest_of(canonical_text(IndexSet{{1, 3}})));
  EXPECT_NE(canonical_text(FlagExchange{std::nullopt}), canonical_text(FlagExchange{Bit::Zero}));
  EXPECT_EQ(kind_of(IndexReply{}), "index_reply");
}

TEST(Network, HonestRunConservesSubsystemsAndSecrecy) {
  ProtocolConfig c;
  c.states = 3000;
  c.seed = 5;
  ProtocolRun run(c, ProtocolModel::compute(c), honest_strategies());
  const auto v = run.run();
  EXPECT_EQ(v.outcome, Outcome::BroadcastAchieved);
  std::string why;
  EXPECT_TRUE(check_secrecy(run.network().events(), &why)) << why;
  // Every subsystem is measured exactly once, by its final owner.
  EXPECT_EQ(run.network().measured_count(), 3 * c.states);
  for (std::size_t i = 0; i < c.states; ++i) {
    for (PlayerId p : kPlayers) {
      ASSERT_TRUE(run.network().measured(SubsystemRef{i, own_mode(p)}));
    }
  }
}

}  // namespace
}  // namespace cvb
