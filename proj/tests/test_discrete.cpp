#include <cmath>

#include <gtest/gtest.h>

#include "lordiag/exterior.hpp"

using namespace lordiag;

namespace {

ScalarField sample(const Grid& g, double (*f)(double, double, double)) {
  ScalarField s(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Vec3 p = g.point(n);
    s[n] = f(p[0], p[1], p[2]);
  }
  return s;
}

double quadratic(double x, double y, double z) { return 3 * x * x - x * y + 2 * z * z + y; }
double smooth(double x, double y, double z) { return std::sin(2 * x) * std::exp(y) + std::cos(z * y); }

}  // namespace

TEST(Grid, IndexingRoundTrips) {
  Grid g = Grid::cube(9);
  g.n = {9, 11, 13};
  const std::size_t n = g.index(3, 7, 12);
  EXPECT_EQ(g.ijk(n), (std::array<int, 3>{3, 7, 12}));
  EXPECT_EQ(g.stride(0), 1u);
  EXPECT_EQ(g.stride(1), 9u);
  EXPECT_EQ(g.stride(2), 99u);
  EXPECT_DOUBLE_EQ(g.point(n)[1], 7.0 / 10.0);
  EXPECT_TRUE(g.on_boundary(g.index(0, 4, 4)));
  EXPECT_FALSE(g.on_boundary(g.index(1, 4, 4)));
  EXPECT_THROW(Grid::cube(8), Error);
}

TEST(Discrete, PartialExactOnQuadratics) {
  const Grid g = Grid::cube(9);
  const ScalarField f = sample(g, quadratic);
  const auto dx = partial(g, f.plane(0), 0);
  const auto dz = partial(g, f.plane(0), 2);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Vec3 p = g.point(n);
    EXPECT_NEAR(dx[n], 6 * p[0] - p[1], 1e-12);
    EXPECT_NEAR(dz[n], 4 * p[2], 1e-12);
  }
}

TEST(Discrete, PartialSecondOrderIncludingBoundary) {
  double previous = 0.0;
  for (int res : {17, 33, 65}) {
    const Grid g = Grid::cube(res);
    const auto d = partial(g, sample(g, smooth).plane(0), 1);
    double err = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
      const Vec3 p = g.point(n);
      err = std::max(err, std::abs(d[n] - (std::sin(2 * p[0]) * std::exp(p[1]) - p[2] * std::sin(p[2] * p[1]))));
    }
    if (previous > 0.0) {
      EXPECT_NEAR(previous / err, 4.0, 0.6);
    }
    previous = err;
  }
}

TEST(Discrete, GradientIsClosedOnQuadratics) {
  const Grid g = Grid::cube(9);
  const TwoFormField ddf = ext_d(ext_d<0>(sample(g, quadratic)));
  EXPECT_LT(ddf.max_abs(), 1e-11);
}

TEST(Discrete, WedgeAndExteriorDerivativeOfOneForm) {
  const Grid g = Grid::cube(9);
  // a = y dx + x z dy + x^2 dz
  OneFormField a(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Vec3 p = g.point(n);
    a.set(n, Vec3(p[1], p[0] * p[2], p[0] * p[0]));
  }
  const TwoFormField da = ext_d(a);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Vec3 p = g.point(n);
    // (da)_23 = d_y a_z - d_z a_y = -x; (da)_31 = d_z a_x - d_x a_z = -2x; (da)_12 = d_x a_y - d_y a_x = z - 1.
    EXPECT_NEAR((da.at(n) - Vec3(-p[0], -2 * p[0], p[2] - 1)).norm(), 0.0, 1e-12);
  }
  const ThreeFormField top = wedge<1, 2>(a, da);
  const std::size_t c = g.center();
  const Vec3 p = g.point(c);
  EXPECT_NEAR(top[c], Vec3(p[1], p[0] * p[2], p[0] * p[0]).dot(Vec3(-p[0], -2 * p[0], p[2] - 1)), 1e-12);
  const TwoFormField aa = wedge<1, 1>(a, a);
  EXPECT_EQ(aa.max_abs(), 0.0);
}

TEST(Discrete, MetricSamplingChecksSignature) {
  const Grid g = Grid::cube(9);
  const std::array<Expr, 6> lorentz{parse_expr("1"), parse_expr("0"), parse_expr("0"), parse_expr("1"), parse_expr("0"), parse_expr("-1")};
  const MetricField m = sample_metric(g, lorentz);
  EXPECT_TRUE(has_lorentz_signature(m.at(0)));
  const std::array<Expr, 6> riemann{parse_expr("1"), parse_expr("0"), parse_expr("0"), parse_expr("1"), parse_expr("0"), parse_expr("1")};
  EXPECT_FALSE(has_lorentz_signature(Mat3::Identity()));
  EXPECT_THROW(sample_metric(g, riemann), Error);
}
