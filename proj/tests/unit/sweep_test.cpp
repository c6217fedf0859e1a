#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "cvbroadcast/boundary.hpp"
#include "cvbroadcast/errors.hpp"
#include "cvbroadcast/sweep.hpp"

namespace cvb {
namespace {

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

TEST(Grid, Forms) {
  EXPECT_EQ(parse_grid("1.5"), std::vector<double>{1.5});
  EXPECT_EQ(parse_grid("1,2,3"), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(parse_grid("0:1:5"), (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));
  EXPECT_TRUE(parse_grid("0:1:0").empty());
  EXPECT_THROW(parse_grid(""), DomainError);
  EXPECT_THROW(parse_grid("1:2"), DomainError);
  EXPECT_THROW(parse_grid("0:1:2.5"), DomainError);
  EXPECT_THROW(parse_grid("a,b"), DomainError);
}

TEST(Sweep, EmptyGridGivesHeaderOnly) {
  SweepSpec spec;
  spec.a = {1.5};
  spec.n = {1.0};
  spec.x0 = parse_grid("1:2:0");
  spec.delta = {0.0};
  const auto csv = sweep_csv(spec, run_sweep(spec));
  EXPECT_EQ(csv, "# cvbroadcast 1.0.0 sweep\na,n,sigma_model,sigma,x0,delta,p_tilde,eta\n");
}

TEST(Sweep, WorkPointPlateau) {
  SweepSpec spec;
  spec.a = {1.5};
  spec.n = {2.0};
  spec.x0 = parse_grid("0.5:10:20");
  spec.delta = parse_grid("0:2:5");
  const auto rows = run_sweep(spec, 4);
  ASSERT_EQ(rows.size(), 100u);
  const auto plateau = std::count_if(rows.begin(), rows.end(),
                                     [](const SweepRow& r) { return std::abs(r.p_tilde - 1.0 / 3.0) < 1e-4; });
  EXPECT_GT(plateau, 10);
  for (const auto& r : rows) {
    EXPECT_LE(r.p_tilde, 1.0 / 3.0 + 1e-15);
    EXPECT_GE(r.eta, 0.0);
  }
}

TEST(Sweep, RisesTowardOneThirdWithDisplacement) {
  SweepSpec spec;
  spec.a = {1.5};
  spec.n = {1.0};
  spec.x0 = parse_grid("0.1:3:30");
  spec.delta = {0.0};
  const auto rows = run_sweep(spec);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i].p_tilde, rows[i - 1].p_tilde - 1e-15);
}

TEST(Sweep, NoiseRescalingAcrossRows) {
  SweepSpec one;
  one.a = {1.5};
  one.n = {1.0};
  one.x0 = {2.0};
  one.delta = {0.5};
  SweepSpec four = one;
  four.n = {4.0};
  four.x0 = {4.0};
  four.delta = {1.0};
  EXPECT_NEAR(run_sweep(one)[0].p_tilde, run_sweep(four)[0].p_tilde, 1e-15);
}

TEST(Sweep, DeterministicAcrossThreadCounts) {
  SweepSpec spec;
  spec.a = parse_grid("1.2:3:7");
  spec.n = {1.0, 2.0};
  spec.x0 = parse_grid("0.5:8:9");
  spec.delta = parse_grid("0:3:4");
  spec.sigma = SigmaModel::proportional(0.1);
  const auto a = sweep_csv(spec, run_sweep(spec, 1));
  const auto b = sweep_csv(spec, run_sweep(spec, 8));
  EXPECT_EQ(a, b);
  EXPECT_EQ(line_count(a), 2u + 7 * 2 * 9 * 4);
  EXPECT_NE(a.find(",proportional,"), std::string::npos);
}

TEST(Sweep, DomainErrorsPropagate) {
  SweepSpec spec;
  spec.a = {0.5};
  spec.n = {1.0};
  spec.x0 = {1.0};
  spec.delta = {0.0};
  EXPECT_THROW(run_sweep(spec, 2), DomainError);
}

TEST(Boundary, CsvSentinels) {
  std::vector<BoundaryRow> rows(3);
  rows[0].a = 1.1;
  rows[1] = BoundaryRow{1.3, false, 0.0, std::nullopt};
  rows[2] = BoundaryRow{2.0, false, 0.25, 7.5};
  EXPECT_EQ(boundary_csv(rows),
            "# cvbroadcast 1.0.0 boundary\na,delta_min,delta_max\n1.1,none,none\n1.3,0,inf\n2,0.25,7.5\n");
}

TEST(Report, FieldsAndRounding) {
  const auto j = probability_report(1.5, 2.0, SigmaModel::fixed(0.0), 4.0, 1.0);
  for (const char* key : {"a", "n", "sigma_model", "sigma", "x0", "delta", "p_tilde", "deficit", "delta1_tilde",
                          "delta2_tilde", "delta3_tilde", "eta"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_NEAR(j["p_tilde"].get<double>(), 1.0 / 3.0, 1e-6);
  EXPECT_EQ(j["p_tilde"].get<double>(), std::stod(format_number(j["p_tilde"].get<double>())));
  EXPECT_DOUBLE_EQ(probability_report(1.5, 1.0, SigmaModel::fixed(0.0), 0.0, 0.0)["p_tilde"].get<double>(), 0.125);
}

TEST(Format, TwelveDigits) {
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(format_number(INFINITY), "inf");
  EXPECT_EQ(format_number(2.0), "2");
}

}  // namespace
}  // namespace cvb
