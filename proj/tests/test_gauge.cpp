#include <cmath>

#include <gtest/gtest.h>

#include "lordiag/pipeline.hpp"

using namespace lordiag;

namespace {

BaseGeometry base_of(int res, const std::array<const char*, 6>& g) {
  std::array<Expr, 6> e;
  for (std::size_t c = 0; c < 6; ++c) e[c] = parse_expr(g[c]);
  return BaseGeometry::from_metric(sample_metric(Grid::cube(res), e));
}

const std::array<const char*, 6> minkowski{"1", "0", "0", "1", "0", "-1"};
const std::array<const char*, 6> sheared{"1", "0.2*z", "0", "1 + 0.04*z^2", "0.1*x", "0.01*x^2 - exp(2*x)"};

}  // namespace

TEST(Gauge, IdentityHasZeroResidualOnFlatFrame) {
  const BaseGeometry base = base_of(9, minkowski);
  EXPECT_EQ(nonlinear_residual(GaugeField(base.grid()), base).max(), 0.0);
}

TEST(Gauge, ConstantGaugeKeepsFlatResidualZero) {
  const BaseGeometry base = base_of(9, minkowski);
  GaugeField g(base.grid());
  for (std::size_t n = 0; n < g.size(); ++n) g.set_params(n, {0.3, 0.2, -0.1});
  EXPECT_LT(nonlinear_residual(g, base).max(), 1e-13);
}

TEST(Gauge, LinearizationMatchesFiniteDifferences) {
  const BaseGeometry base = base_of(9, sheared);
  for (std::uint64_t seed : {3u, 11u}) EXPECT_LT(linearization_self_test(base, seed, 1e-6), 1e-5);
}

TEST(Gauge, CauchySurfaceGeometry) {
  const Grid g = Grid::cube(9);
  const CauchySurface s(g, {0, 0, 2}, 1.0);
  EXPECT_NEAR(s.unit_normal()[2], 1.0, 1e-15);
  EXPECT_EQ(s.surface_size(), 81u);
  EXPECT_TRUE(s.on_surface(g.index(3, 3, 4)));
  EXPECT_NEAR(s.distance(g.index(0, 0, 8)), 0.5, 1e-15);
  const auto& order = s.march_order();
  for (std::size_t i = 1; i < order.size(); ++i) EXPECT_LE(std::abs(s.distance(order[i - 1])), std::abs(s.distance(order[i])));
  EXPECT_THROW(CauchySurface(g, {0, 0, 1}, 5.0), Error);
  EXPECT_THROW(CauchySurface(g, {0, 0, 0}, 0.5), Error);
}

TEST(Gauge, TransversalityFlagsCharacteristicSurface) {
  const BaseGeometry base = base_of(9, minkowski);
  const TransversalityReport tangent = transversality_check(base.frame, CauchySurface(base.grid(), {0, 0, 1}, 0.5));
  EXPECT_FALSE(tangent.pass());
  EXPECT_TRUE(tangent.frame_index == 1 || tangent.frame_index == 2);
  EXPECT_NE(tangent.message(base.grid()).find("frame vector e"), std::string::npos);
  EXPECT_TRUE(transversality_check(base.frame, CauchySurface(base.grid(), {1, 1, 1}, 1.5)).pass());
}

TEST(Gauge, MarchReproducesLinearSolutions) {
  // u = x + y - 1 vanishes on the surface x + y = 1 and has a . grad u = 1.5 for a = (1, 0.5, 0.25).
  // Only z-faces lose their upwind neighbor, and u does not depend on z, so the march is exact.
  const Grid g = Grid::cube(9);
  const CauchySurface s(g, {1, 1, 0}, 1.0);
  VectorField a(g);
  std::vector<double> rhs(g.size(), 1.5), u(g.size(), 0.0);
  std::vector<std::uint8_t> closure(g.size(), 0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    a.set(n, Vec3(1, 0.5, 0.25));
    closure[n] = static_cast<std::uint8_t>(exit_axes(s, a.at(n), n));
  }
  // Nodes at equal distance from the surface see each other only on the next sweep.
  for (int sweep = 0; sweep < 10; ++sweep) march_transport(s, a, closure, rhs, u);
  double err = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Vec3 p = g.point(n);
    const double exact = p[0] + p[1] - 1.0;
    err = std::max(err, std::abs(u[n] - exact));
  }
  EXPECT_LT(err, 1e-12);
}

TEST(Gauge, SolverKeepsIdentityOnFlatSpace) {
  const BaseGeometry base = base_of(9, minkowski);
  const CauchyResult r = solve_cauchy(base, CauchySurface(base.grid(), {1, 1, 1}, 1.5), CauchyOptions{});
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.stop_reason, "tolerance");
  EXPECT_EQ(r.gauge.max_rapidity(), 0.0);
}

TEST(Gauge, SolverReducesResidualAndStaysInGroup) {
  const BaseGeometry base = base_of(17, sheared);
  const CauchySurface sigma(base.grid(), {1, 1, 1}, 1.5);
  const double initial = nonlinear_residual(GaugeField(base.grid()), base).max();
  const CauchyResult r = solve_cauchy(base, sigma, CauchyOptions{});
  EXPECT_LT(r.residual_max, 1e-3 * initial);
  EXPECT_LT(r.max_group_defect, 1e-12);
  for (std::size_t n = 0; n < base.grid().size(); ++n) {
    if (sigma.on_surface(n)) {
      EXPECT_EQ(r.gauge.matrix(n), Mat3::Identity());
    }
  }
  ASSERT_FALSE(r.log.empty());
  EXPECT_EQ(r.log.front().iteration, 1);
  const std::string csv = format_convergence_log(r.log);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,res12,res23,res13,max_rapidity");
}

TEST(Gauge, GaugeApplyRotatesCoframe) {
  const BaseGeometry base = base_of(9, minkowski);
  GaugeField g(base.grid());
  for (std::size_t n = 0; n < g.size(); ++n) g.set_params(n, {0.0, 0.5, 0.0});
  const Coframe co = gauge_apply(g, base.coframe);
  const std::array<Expr, 6> eta_exprs{parse_expr("1"), parse_expr("0"), parse_expr("0"), parse_expr("1"), parse_expr("0"), parse_expr("-1")};
  const MetricField m = sample_metric(base.grid(), eta_exprs);
  const Mat3 w = co.matrix(0);
  // Still orthonormal: w^T eta w = g.
  EXPECT_NEAR((w.transpose() * eta() * w - m.at(0)).norm(), 0.0, 1e-14);
  EXPECT_GT((w - Mat3::Identity()).norm(), 0.1);
}
