#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lordiag/error.hpp"
#include "lordiag/parallel.hpp"
#include "lordiag/problem.hpp"

namespace lordiag {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Uniform node grid on a box. Node (i,j,k) has flat index i + n0*(j + n1*k).
struct Grid {
  std::array<int, 3> n{9, 9, 9};
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};

  static Grid from_problem(const ProblemSpec& spec) {
    Grid g;
    for (std::size_t a = 0; a < 3; ++a) {
      g.n[a] = spec.resolution;
      g.lo[a] = spec.domain[a].lo;
      g.hi[a] = spec.domain[a].hi;
    }
    g.validate();
    return g;
  }

  static Grid cube(int nodes, double lo = 0.0, double hi = 1.0) {
    Grid g;
    g.n = {nodes, nodes, nodes};
    g.lo = {lo, lo, lo};
    g.hi = {hi, hi, hi};
    g.validate();
    return g;
  }

  void validate() const {
    for (std::size_t a = 0; a < 3; ++a) {
      if (n[a] < 9 || n[a] % 2 == 0) throw_input("grid node count must be odd and >= 9");
      if (!(hi[a] > lo[a])) throw_input("grid interval must have positive length");
    }
  }

  std::size_t size() const { return static_cast<std::size_t>(n[0]) * n[1] * n[2]; }
  double spacing(int axis) const { return (hi[axis] - lo[axis]) / (n[axis] - 1); }
  double coord(int axis, int i) const { return lo[axis] + i * spacing(axis); }
  std::size_t stride(int axis) const {
    return axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(n[0]) : static_cast<std::size_t>(n[0]) * n[1];
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(n[0]) * (j + static_cast<std::size_t>(n[1]) * k);
  }
  std::array<int, 3> ijk(std::size_t idx) const {
    const int i = static_cast<int>(idx % n[0]);
    const std::size_t r = idx / n[0];
    return {i, static_cast<int>(r % n[1]), static_cast<int>(r / n[1])};
  }
  Vec3 point(std::size_t idx) const {
    const auto c = ijk(idx);
    return {coord(0, c[0]), coord(1, c[1]), coord(2, c[2])};
  }
  std::size_t center() const { return index(n[0] / 2, n[1] / 2, n[2] / 2); }
  bool on_boundary(std::size_t idx) const {
    const auto c = ijk(idx);
    for (std::size_t a = 0; a < 3; ++a) {
      if (c[a] == 0 || c[a] == n[a] - 1) return true;
    }
    return false;
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

inline std::string format_node(const Grid& g, std::size_t idx) {
  const auto c = g.ijk(idx);
  return "(" + std::to_string(c[0]) + "," + std::to_string(c[1]) + "," + std::to_string(c[2]) + ")";
}

template <int Degree>
struct FormTag {};
struct VectorTag {};
struct MetricTag {};

/// Per-node components stored as one contiguous plane per component.
template <std::size_t N, typename Tag>
class ComponentField {
public:
  static constexpr std::size_t components = N;

  ComponentField() = default;
  explicit ComponentField(const Grid& grid, double fill = 0.0) : grid_(grid) {
    for (auto& p : planes_) p.assign(grid.size(), fill);
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return grid_.size(); }

  std::vector<double>& plane(std::size_t c) { return planes_[c]; }
  const std::vector<double>& plane(std::size_t c) const { return planes_[c]; }

  double& operator()(std::size_t c, std::size_t node) { return planes_[c][node]; }
  double operator()(std::size_t c, std::size_t node) const { return planes_[c][node]; }

  double& operator[](std::size_t node)
    requires(N == 1)
  {
    return planes_[0][node];
  }
  double operator[](std::size_t node) const
    requires(N == 1)
  {
    return planes_[0][node];
  }

  Vec3 at(std::size_t node) const
    requires(N == 3)
  {
    return {planes_[0][node], planes_[1][node], planes_[2][node]};
  }
  void set(std::size_t node, const Vec3& v)
    requires(N == 3)
  {
    planes_[0][node] = v[0];
    planes_[1][node] = v[1];
    planes_[2][node] = v[2];
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& p : planes_) {
      for (double v : p) m = std::max(m, std::abs(v));
    }
    return m;
  }
  bool all_finite() const {
    for (const auto& p : planes_) {
      for (double v : p) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  ComponentField& operator+=(const ComponentField& o) {
    for (std::size_t c = 0; c < N; ++c) {
      for (std::size_t i = 0; i < planes_[c].size(); ++i) planes_[c][i] += o.planes_[c][i];
    }
    return *this;
  }
  ComponentField& operator-=(const ComponentField& o) {
    for (std::size_t c = 0; c < N; ++c) {
      for (std::size_t i = 0; i < planes_[c].size(); ++i) planes_[c][i] -= o.planes_[c][i];
    }
    return *this;
  }
  ComponentField& operator*=(double s) {
    for (auto& p : planes_) {
      for (double& v : p) v *= s;
    }
    return *this;
  }
  friend ComponentField operator+(ComponentField a, const ComponentField& b) { return a += b; }
  friend ComponentField operator-(ComponentField a, const ComponentField& b) { return a -= b; }
  friend ComponentField operator*(double s, ComponentField a) { return a *= s; }

private:
  Grid grid_;
  std::array<std::vector<double>, N> planes_;
};

constexpr std::size_t form_components(int degree) { return degree == 0 || degree == 3 ? 1 : 3; }

/// Degree-K form in the coordinate basis: 1-forms on dy^a; 2-forms on
/// (dy2^dy3, dy3^dy1, dy1^dy2); 3-forms on dy1^dy2^dy3.
template <int K>
using Form = ComponentField<form_components(K), FormTag<K>>;

using ScalarField = Form<0>;
using OneFormField = Form<1>;
using TwoFormField = Form<2>;
using ThreeFormField = Form<3>;
using VectorField = ComponentField<3, VectorTag>;

/// Symmetric metric components, planes ordered g11, g12, g13, g22, g23, g33.
class MetricField : public ComponentField<6, MetricTag> {
public:
  using ComponentField::ComponentField;

  Mat3 at(std::size_t node) const {
    const auto& f = *this;
    Mat3 g;
    g << f(0, node), f(1, node), f(2, node), f(1, node), f(3, node), f(4, node), f(2, node), f(4, node), f(5, node);
    return g;
  }
  void set(std::size_t node, const Mat3& g) {
    auto& f = *this;
    f(0, node) = g(0, 0);
    f(1, node) = g(0, 1);
    f(2, node) = g(0, 2);
    f(3, node) = g(1, 1);
    f(4, node) = g(1, 2);
    f(5, node) = g(2, 2);
  }
};

/// Plane index of metric component (a,b).
constexpr std::size_t metric_plane(int a, int b) {
  if (a > b) std::swap(a, b);
  constexpr std::array<std::array<std::size_t, 3>, 3> table{{{0, 1, 2}, {1, 3, 4}, {2, 4, 5}}};
  return table[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
}

/// Counts eigenvalues of a symmetric matrix by sign; Lorentzian here means (+,+,-).
inline bool has_lorentz_signature(const Mat3& g) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(g, Eigen::EigenvaluesOnly);
  const Vec3 ev = es.eigenvalues();
  return ev[0] < 0.0 && ev[1] > 0.0 && ev[2] > 0.0;
}

/// Evaluates expressions at every node; rejects non-finite samples.
template <std::size_t N, typename Tag>
void sample_into(ComponentField<N, Tag>& field, std::span<const Expr> exprs) {
  const Grid& g = field.grid();
  for (std::size_t c = 0; c < N; ++c) {
    auto& plane = field.plane(c);
    parallel_for(g.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const Vec3 p = g.point(i);
        plane[i] = exprs[c].eval(p[0], p[1], p[2]);
      }
    });
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(plane[i])) {
        throw_input("expression " + print_expr(exprs[c]) + " is not finite at node " + format_node(g, i));
      }
    }
  }
}

inline ScalarField sample_scalar(const Grid& g, const Expr& e) {
  ScalarField f(g);
  sample_into(f, std::span<const Expr>(&e, 1));
  return f;
}

/// Samples the metric and checks signature (+,+,-) and |det g| > 1e-12 at every node.
inline MetricField sample_metric(const Grid& g, const std::array<Expr, 6>& exprs) {
  MetricField m(g);
  sample_into(m, std::span<const Expr>(exprs));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Mat3 gm = m.at(i);
    if (std::abs(gm.determinant()) <= 1e-12) throw_input("metric is degenerate at node " + format_node(g, i));
    if (!has_lorentz_signature(gm)) throw_input("metric signature is not (+,+,-) at node " + format_node(g, i));
  }
  return m;
}

inline MetricField sample_metric(const ProblemSpec& spec) { return sample_metric(Grid::from_problem(spec), spec.metric); }

/// CSV dump: header `i,j,k,x,y,z,<names...>`, one row per node in flat-index order,
/// values in full-precision scientific notation.
template <std::size_t N, typename Tag>
void write_csv(std::ostream& out, const ComponentField<N, Tag>& field, const std::array<std::string, N>& names) {
  const Grid& g = field.grid();
  out << "i,j,k,x,y,z";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17e", v);
    return buf;
  };
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    const auto c = g.ijk(idx);
    const Vec3 p = g.point(idx);
    out << c[0] << ',' << c[1] << ',' << c[2];
    for (std::size_t a = 0; a < 3; ++a) out << ',' << num(p[a]);
    for (std::size_t comp = 0; comp < N; ++comp) out << ',' << num(field(comp, idx));
    out << '\n';
  }
}

}  // namespace lordiag
