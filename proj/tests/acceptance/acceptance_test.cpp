// One test per numbered acceptance criterion. Each prints its verdict line.

#include <iostream>

#include <gtest/gtest.h>

#include "cvbroadcast/verify.hpp"

namespace cvb {
namespace {

void expect_pass(int id) {
  const auto r = run_check(id, VerifyOptions{});
  std::cout << format_check(r) << std::endl;
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Acceptance, C01_EntanglementThreshold) { expect_pass(1); }
TEST(Acceptance, C02_UpperEntanglementBound) { expect_pass(2); }
TEST(Acceptance, C03_LimitingCases) { expect_pass(3); }
TEST(Acceptance, C04_DegeneratePoint) { expect_pass(4); }
TEST(Acceptance, C05_ClosedFormVsQuadrature) { expect_pass(5); }
TEST(Acceptance, C06_SmallKExpansion) { expect_pass(6); }
TEST(Acceptance, C07_TritterIdentities) { expect_pass(7); }
TEST(Acceptance, C08_FullInseparability) { expect_pass(8); }
TEST(Acceptance, C09_MonteCarloAgreement) { expect_pass(9); }
TEST(Acceptance, C10_ProtocolSafetyEnsembles) { expect_pass(10); }
TEST(Acceptance, C11_Determinism) { expect_pass(11); }

TEST(AcceptanceMutation, CorruptedTritterFailsCheck7) {
  VerifyOptions o;
  o.inject_tritter_fault = true;
  const auto r = run_check(7, o);
  std::cout << format_check(r) << std::endl;
  EXPECT_FALSE(r.pass);
  EXPECT_NE(r.detail.find("|T T^T - I| = 1"), std::string::npos) << r.detail;
}

}  // namespace
}  // namespace cvb
