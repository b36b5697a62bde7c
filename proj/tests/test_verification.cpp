#include <cmath>

#include <gtest/gtest.h>

#include "lordiag/verification.hpp"

using namespace lordiag;

namespace {

const std::string problems = LORDIAG_PROBLEMS;

CoordinateSystem oracle_coordinates(const OracleSpec& o, const Grid& g) {
  CoordinateSystem cs;
  for (std::size_t i = 0; i < 3; ++i) {
    cs.x[i] = sample_scalar(g, o.diffeo[i]);
    cs.f[i] = ScalarField(g);
  }
  return cs;
}

}  // namespace

TEST(Verification, OracleDiffeoDiagonalizesPullback) {
  const OracleSpec o = load_oracle(problems + "/nonlinear.oracle");
  ProblemSpec spec = make_pullback_metric(o);
  spec.resolution = 17;
  const Grid g = Grid::from_problem(spec);
  const MetricField m = sample_metric(g, spec.metric);
  // Finite-difference Jacobian of the exact map: second-order small.
  const double coarse = pullback_offdiagonal(m, oracle_coordinates(o, g)).max_abs();
  spec.resolution = 33;
  const Grid g2 = Grid::from_problem(spec);
  const double fine = pullback_offdiagonal(sample_metric(g2, spec.metric), oracle_coordinates(o, g2)).max_abs();
  EXPECT_LT(fine, 1e-3);
  EXPECT_NEAR(coarse / fine, 4.0, 0.6);
}

TEST(Verification, IdentityCoordinatesOnDiagonalMetric) {
  const ProblemSpec spec = load_problem(problems + "/warped.prob");
  const Grid g = Grid::from_problem(spec);
  CoordinateSystem cs;
  for (std::size_t i = 0; i < 3; ++i) {
    cs.x[i] = ScalarField(g);
    cs.f[i] = ScalarField(g);
    for (std::size_t n = 0; n < g.size(); ++n) cs.x[i][n] = g.point(n)[static_cast<int>(i)];
  }
  EXPECT_EQ(pullback_offdiagonal(sample_metric(g, spec.metric), cs).max_abs(), 0.0);
}

TEST(Verification, ReportRoundTripsAndDecidesPass) {
  const ProblemSpec spec = load_problem(problems + "/minkowski.prob");
  const Grid g = Grid::from_problem(spec);
  ScalarField off(g);
  std::array<ScalarField, 3> fr{ScalarField(g), ScalarField(g), ScalarField(g)};
  off[5] = 2e-3;
  fr[1][7] = -0.05;
  ReportInputs in;
  in.offdiag = &off;
  in.frobenius = &fr;
  in.gauge_residual = {1e-9, 2e-9, 3e-9};
  in.iterations = 4;
  in.converged = true;
  in.stop_reason = "tolerance";
  const DiagonalizationReport r = assemble_report(in, spec, "text");
  EXPECT_FALSE(r.pass);
  ASSERT_EQ(r.failed.size(), 1u);
  EXPECT_EQ(r.failed[0], "offdiag_max");
  EXPECT_DOUBLE_EQ(r.frobenius_max, 0.05);
  EXPECT_DOUBLE_EQ(r.frobenius_tol, 10.0 / 32.0);
  EXPECT_EQ(r.problem_hash.rfind("fnv1a64:", 0), 0u);
  EXPECT_EQ(parse_report(serialize_report(r)), r);
}

TEST(Verification, OracleParserRejectsMissingPieces) {
  EXPECT_THROW(parse_oracle("[diffeo]\nf1 = x f2 = y f3 = z\n[domain]\nx = 0 1 y = 0 1 z = 0 1\nresolution = 9\n"), Error);
  const std::string singular = R"([diffeo]
f1 = x   f2 = x   f3 = z
f1_x = 1 f1_y = 0 f1_z = 0
f2_x = 1 f2_y = 0 f2_z = 0
f3_x = 0 f3_y = 0 f3_z = 1
[diagonal]
d1 = 1 d2 = 1 d3 = -1
[domain]
x = 0 1 y = 0 1 z = 0 1
resolution = 9
)";
  EXPECT_THROW(make_pullback_metric(parse_oracle(singular)), Error);
}
