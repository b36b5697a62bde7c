#pragma once

// Integrability defect of a coframe and integration of an integrable coframe into
// coordinates x^i with w^i = f_i dx^i.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lordiag/exterior.hpp"
#include "lordiag/frame.hpp"

namespace lordiag {

/// Coefficient of w^i ^ dw^i on dy^1 ^ dy^2 ^ dy^3, for each i.
inline std::array<ScalarField, 3> frobenius_residual(const Coframe& co) {
  std::array<ScalarField, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    out[i] = ScalarField(co.grid());
    out[i].plane(0) = wedge<1, 2>(co.w[i], ext_d<1>(co.w[i])).plane(0);
  }
  return out;
}

inline double frobenius_max(const Coframe& co) {
  double m = 0.0;
  for (const auto& r : frobenius_residual(co)) m = std::max(m, r.max_abs());
  return m;
}

struct CoordinateSystem {
  std::array<ScalarField, 3> x;
  std::array<ScalarField, 3> f;
  std::size_t base_node{0};

  const Grid& grid() const { return x[0].grid(); }
};

/// CSV with columns i,j,k,x1,x2,x3,f1,f2,f3.
inline void write_csv(std::ostream& out, const CoordinateSystem& cs) {
  const Grid& g = cs.grid();
  out << "i,j,k,x1,x2,x3,f1,f2,f3\n";
  char buf[32];
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto c = g.ijk(n);
    out << c[0] << ',' << c[1] << ',' << c[2];
    for (const auto* group : {&cs.x, &cs.f}) {
      for (const auto& field : *group) {
        std::snprintf(buf, sizeof buf, "%.17e", field[n]);
        out << ',' << buf;
      }
    }
    out << '\n';
  }
}

namespace detail {

/// Cubic Lagrange interpolation of equally spaced samples at fractional index s; the end
/// stencils extrapolate.
inline double interp_cubic(const double* v, std::size_t stride, int n, double s) {
  int j = static_cast<int>(std::floor(s)) - 1;
  j = std::clamp(j, 0, n - 4);
  const double t = s - j;
  const double l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
  const double l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
  const double l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
  const double l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
  const double* p = v + static_cast<std::size_t>(j) * stride;
  return l0 * p[0] + l1 * p[stride] + l2 * p[2 * stride] + l3 * p[3 * stride];
}

/// Transports level values from the line at `from` to the line at `to` (both lines along
/// axis a, neighbors along axis m) following dA/dM = c. The foot point is traced back with RK4
/// on the slope field, interpolated cubically in both a and m.
struct LineTransport {
  const Grid& g;
  int a;  // interpolation axis
  int m;  // marching axis

  double slope(const std::vector<double>& c, std::size_t line, int m0, double s, double mu) const {
    const int nm = g.n[static_cast<std::size_t>(m)];
    const int na = g.n[static_cast<std::size_t>(a)];
    const std::size_t sa = g.stride(a), sm = g.stride(m);
    const double pos = m0 + mu;
    int j = std::clamp(static_cast<int>(std::floor(pos)) - 1, 0, nm - 4);
    const double t = pos - j;
    const double w[4] = {-(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0, t * (t - 2.0) * (t - 3.0) / 2.0,
                         -t * (t - 1.0) * (t - 3.0) / 2.0, t * (t - 1.0) * (t - 2.0) / 6.0};
    const std::size_t first = line - static_cast<std::size_t>(m0) * sm + static_cast<std::size_t>(j) * sm;
    double v = 0.0;
    for (int i = 0; i < 4; ++i) v += w[i] * interp_cubic(c.data() + first + static_cast<std::size_t>(i) * sm, sa, na, s);
    return v;
  }

  void operator()(std::vector<double>& x, const std::vector<double>& c, std::size_t from, std::size_t to, double dm) const {
    const int na = g.n[static_cast<std::size_t>(a)];
    const std::size_t sa = g.stride(a);
    const int m_from = g.ijk(from)[static_cast<std::size_t>(m)];
    const double dir = dm > 0.0 ? 1.0 : -1.0;
    const double ratio = dm / g.spacing(a);
    // Position along m measured from the `from` line in index units, signed by dir.
    auto f = [&](double s, double mu) { return ratio * slope(c, from, m_from, s, dir * mu); };
    for (int k = 0; k < na; ++k) {
      const double k1 = f(k, 1.0);
      const double k2 = f(k - 0.5 * k1, 0.5);
      const double k3 = f(k - 0.5 * k2, 0.5);
      const double k4 = f(k - k3, 0.0);
      const double s_foot = k - (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
      x[to + static_cast<std::size_t>(k) * sa] = interp_cubic(x.data() + from, sa, na, s_foot);
    }
  }
};

}  // namespace detail

/// Nearest node to a point, rejecting points outside the box.
inline std::size_t nearest_node(const Grid& g, const Vec3& p) {
  std::array<int, 3> c{};
  for (int a = 0; a < 3; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const double tol = 1e-12 * (g.hi[ua] - g.lo[ua]);
    if (p[a] < g.lo[ua] - tol || p[a] > g.hi[ua] + tol) throw_input("base point lies outside the domain");
    c[ua] = std::clamp(static_cast<int>(std::lround((p[a] - g.lo[ua]) / g.spacing(a))), 0, g.n[ua] - 1);
  }
  return g.index(c[0], c[1], c[2]);
}

/// Level function of one integrable 1-form, zero at the base node.
///
/// The leaves of w are graphs over the two axes other than the one where |w_a| is largest at the
/// base node. The level value is seeded along the coordinate line of that axis through the base
/// node by integrating w_a, then carried along leaf curves: first across the plane through the
/// base node, then through the volume.
inline ScalarField level_function(const OneFormField& w, std::size_t base, int coordinate_index) {
  const Grid& g = w.grid();
  const Vec3 w0 = w.at(base);
  int a = 0;
  for (int ax = 1; ax < 3; ++ax) {
    if (std::abs(w0[ax]) > std::abs(w0[a])) a = ax;
  }
  const int b = (a + 1) % 3;
  const int c = (a + 2) % 3;
  const auto& wa = w.plane(static_cast<std::size_t>(a));
  const double sign = wa[base] > 0.0 ? 1.0 : -1.0;
  std::vector<double> cb(g.size()), cc(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!(sign * wa[n] > 0.0)) {
      throw_solver("coordinate x" + std::to_string(coordinate_index + 1) + ": leaves of w" + std::to_string(coordinate_index + 1) +
                   " are not graphs over the chart at node " + format_node(g, n));
    }
    cb[n] = -w(static_cast<std::size_t>(b), n) / wa[n];
    cc[n] = -w(static_cast<std::size_t>(c), n) / wa[n];
  }

  ScalarField out(g);
  auto& x = out.plane(0);
  const auto p0 = g.ijk(base);
  const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b), uc = static_cast<std::size_t>(c);
  const std::size_t sa = g.stride(a), sb = g.stride(b), sc = g.stride(c);
  const int na = g.n[ua], nb = g.n[ub], nc = g.n[uc];
  const double ha = g.spacing(a);

  // Seed line: corrected trapezoid rule (fourth order) for the integral of w_a.
  const std::size_t line0 = base - static_cast<std::size_t>(p0[ua]) * sa;
  std::vector<double> d(static_cast<std::size_t>(na));
  {
    std::vector<double> v(static_cast<std::size_t>(na));
    for (int k = 0; k < na; ++k) v[static_cast<std::size_t>(k)] = wa[line0 + static_cast<std::size_t>(k) * sa];
    for (int k = 0; k < na; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (k == 0) d[uk] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * ha);
      else if (k == na - 1) d[uk] = (3.0 * v[uk] - 4.0 * v[uk - 1] + v[uk - 2]) / (2.0 * ha);
      else d[uk] = (v[uk + 1] - v[uk - 1]) / (2.0 * ha);
    }
    std::vector<double> acc(static_cast<std::size_t>(na), 0.0);
    for (int k = 1; k < na; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      acc[uk] = acc[uk - 1] + 0.5 * ha * (v[uk - 1] + v[uk]) - ha * ha / 12.0 * (d[uk] - d[uk - 1]);
    }
    const double shift = acc[static_cast<std::size_t>(p0[ua])];
    for (int k = 0; k < na; ++k) x[line0 + static_cast<std::size_t>(k) * sa] = acc[static_cast<std::size_t>(k)] - shift;
  }

  // Plane through the base node spanned by axes a and b.
  const detail::LineTransport along_b{g, a, b};
  const double hb = g.spacing(b);
  const std::size_t plane0 = line0 - static_cast<std::size_t>(p0[ub]) * sb;
  for (int j = p0[ub] + 1; j < nb; ++j) {
    along_b(x, cb, plane0 + static_cast<std::size_t>(j - 1) * sb, plane0 + static_cast<std::size_t>(j) * sb, hb);
  }
  for (int j = p0[ub] - 1; j >= 0; --j) {
    along_b(x, cb, plane0 + static_cast<std::size_t>(j + 1) * sb, plane0 + static_cast<std::size_t>(j) * sb, -hb);
  }

  // Volume: every (a, b) line marched along c from the base plane.
  const detail::LineTransport along_c{g, a, c};
  const double hc = g.spacing(c);
  const std::size_t origin = plane0 - static_cast<std::size_t>(p0[uc]) * sc;
  parallel_for(static_cast<std::size_t>(nb), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t j = lo; j < hi; ++j) {
      const std::size_t col = origin + j * sb;
      for (int k = p0[uc] + 1; k < nc; ++k) {
        along_c(x, cc, col + static_cast<std::size_t>(k - 1) * sc, col + static_cast<std::size_t>(k) * sc, hc);
      }
      for (int k = p0[uc] - 1; k >= 0; --k) {
        along_c(x, cc, col + static_cast<std::size_t>(k + 1) * sc, col + static_cast<std::size_t>(k) * sc, -hc);
      }
    }
  });
  return out;
}

struct IntegrationOptions {
  std::optional<Vec3> base_point;     // defaults to the center node
  double integrability_factor{10.0};  // threshold = factor * h
};

/// Coordinates x^i constant on the leaves of ker w^i, with scale factors f_i = 1 / e_i(x^i).
inline CoordinateSystem integrate_coordinates(const Coframe& co, const OrthonormalFrame& frame, const IntegrationOptions& opt = {}) {
  const Grid& g = co.grid();
  const double h = std::max({g.spacing(0), g.spacing(1), g.spacing(2)});
  const double threshold = opt.integrability_factor * h;
  const auto fr = frobenius_residual(co);
  for (std::size_t i = 0; i < 3; ++i) {
    const double m = fr[i].max_abs();
    if (!(m < threshold)) {
      throw_solver("integrability threshold exceeded: max |w" + std::to_string(i + 1) + " ^ dw" + std::to_string(i + 1) +
                   "| = " + std::to_string(m) + " >= " + std::to_string(threshold));
    }
  }
  CoordinateSystem cs;
  cs.base_node = opt.base_point ? nearest_node(g, *opt.base_point) : g.center();
  for (int i = 0; i < 3; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    cs.x[ui] = level_function(co.w[ui], cs.base_node, i);
    const auto dx = ext_d<0>(cs.x[ui]);
    cs.f[ui] = ScalarField(g);
    for (std::size_t n = 0; n < g.size(); ++n) {
      const double ex = dx.at(n).dot(frame.e[ui].at(n));
      if (!(ex > 0.0)) throw_solver("scale factor f" + std::to_string(i + 1) + " changes sign at node " + format_node(g, n));
      cs.f[ui][n] = 1.0 / ex;
    }
  }
  return cs;
}

/// max over nodes and i of |dx^i ^ w^i| (Euclidean norm of the 2-form components).
inline double proportionality_defect(const CoordinateSystem& cs, const Coframe& co) {
  double m = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto p = wedge<1, 1>(ext_d<0>(cs.x[i]), co.w[i]);
    for (std::size_t n = 0; n < p.size(); ++n) m = std::max(m, p.at(n).norm());
  }
  return m;
}

/// Coframe f_i dx^i rebuilt from coordinates.
inline Coframe recovered_coframe(const CoordinateSystem& cs) {
  const Grid& g = cs.grid();
  Coframe out{{OneFormField(g), OneFormField(g), OneFormField(g)}};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto dx = ext_d<0>(cs.x[i]);
    for (std::size_t n = 0; n < g.size(); ++n) out.w[i].set(n, cs.f[i][n] * dx.at(n));
  }
  return out;
}

struct MonotoneMap {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
};

inline MonotoneMap identity_map() {
  return {[](double t) { return t; }, [](double) { return 1.0; }};
}

/// x~^i = map_i(x^i), f~_i = f_i / map_i'(x^i).
inline CoordinateSystem reparametrize(const CoordinateSystem& cs, const std::array<MonotoneMap, 3>& maps) {
  CoordinateSystem out = cs;
  const Grid& g = cs.grid();
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t n = 0; n < g.size(); ++n) {
      const double t = cs.x[i][n];
      const double dm = maps[i].derivative(t);
      if (!(dm > 0.0)) {
        throw_input("map " + std::to_string(i + 1) + " is not strictly increasing at x" + std::to_string(i + 1) + " = " +
                    std::to_string(t) + " (node " + format_node(g, n) + ")");
      }
      out.x[i][n] = maps[i].value(t);
      out.f[i][n] = cs.f[i][n] / dm;
    }
  }
  return out;
}

}  // namespace lordiag
