#pragma once

// Gauge solver: find b in SO(2,1) at every node such that the coframe w^i = b^i_j wbar^j
// satisfies w^1^w^2^w^1_2 = w^2^w^3^w^2_3 = w^1^w^3^w^1_3 = 0, i.e. each w^i is integrable.
//
// With Omega(X) the matrix w^i_j(X), the connection of the rotated coframe is
//   Omega = b Omegabar b^-1 - db b^-1,
// and the three residuals are the frame components
//   r12 = w^1_2(e_3),  r23 = w^2_3(e_1),  r13 = -w^1_3(e_2).
// Perturbing b -> exp(beta) b changes w^i_j(e_k) by -e_k(beta^i_j) plus terms of order zero in
// beta, so each residual is a transport equation for one algebra coordinate along one frame
// direction: beta^2_3 along e_1, beta^1_3 along e_2, beta^1_2 along e_3.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lordiag/exterior.hpp"
#include "lordiag/frame.hpp"
#include "lordiag/so21.hpp"

namespace lordiag {

/// SO(2,1)-valued field in the rotation-boost-boost chart.
class GaugeField {
public:
  GaugeField() = default;
  explicit GaugeField(const Grid& grid) : grid_(grid), params_(grid.size()) {}

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return params_.size(); }
  const GaugeParams& params(std::size_t n) const { return params_[n]; }
  void set_params(std::size_t n, const GaugeParams& p) { params_[n] = p; }
  void set_matrix(std::size_t n, const Mat3& b) { params_[n] = so21_params(b); }
  Mat3 matrix(std::size_t n) const { return so21_from_params(params_[n]); }

  double max_rapidity() const {
    double m = 0.0;
    for (const auto& p : params_) m = std::max({m, std::abs(p.phi1), std::abs(p.phi2)});
    return m;
  }
  double max_group_defect() const {
    double m = 0.0;
    for (std::size_t n = 0; n < params_.size(); ++n) m = std::max(m, group_defect(matrix(n)));
    return m;
  }

private:
  Grid grid_;
  std::vector<GaugeParams> params_;
};

/// Reference orthonormal frame, its coframe and connection, with per-node caches.
struct BaseGeometry {
  OrthonormalFrame frame;
  Coframe coframe;
  ConnectionForms conn;
  std::vector<FrameConnection> conn_frame;  // [k](i, j) = wbar^i_j(ebar_k)

  BaseGeometry(Coframe co, OrthonormalFrame fr, ConnectionForms cn)
      : frame(std::move(fr)), coframe(std::move(co)), conn(std::move(cn)), conn_frame(frame_connection(coframe, conn)) {}

  static BaseGeometry from_metric(const MetricField& g) {
    OrthonormalFrame fr = lorentz_gram_schmidt(g);
    Coframe co = dual_coframe(fr);
    ConnectionForms cn = connection_forms(co);
    return BaseGeometry(std::move(co), std::move(fr), std::move(cn));
  }

  const Grid& grid() const { return coframe.grid(); }
};

/// The three residual scalars (coefficients of w^1^w^2^w^3).
struct GaugeResidual {
  ScalarField r12, r23, r13;

  std::array<double, 3> maxima() const { return {r12.max_abs(), r23.max_abs(), r13.max_abs()}; }
  /// Maxima over nodes off the boundary, where every stencil is centered.
  std::array<double, 3> interior_maxima() const {
    std::array<double, 3> m{0.0, 0.0, 0.0};
    const Grid& g = r12.grid();
    for (std::size_t n = 0; n < g.size(); ++n) {
      if (g.on_boundary(n)) continue;
      m[0] = std::max(m[0], std::abs(r12[n]));
      m[1] = std::max(m[1], std::abs(r23[n]));
      m[2] = std::max(m[2], std::abs(r13[n]));
    }
    return m;
  }
  double max() const {
    const auto m = maxima();
    return std::max({m[0], m[1], m[2]});
  }
};

/// Index bookkeeping shared by the residual and its linearization: unknown q is
/// beta(row[q], col[q]), transported along e_q, balancing entry (row[q], col[q]) of Omega(e_q).
inline constexpr std::array<int, 3> unknown_row{1, 0, 0};
inline constexpr std::array<int, 3> unknown_col{2, 2, 1};

namespace detail {

// derivative[axis][entry] of the matrix field, entries row-major.
using MatrixDerivative = std::array<std::array<std::vector<double>, 9>, 3>;

}  // namespace detail

/// Per-node quantities of the rotated coframe.
struct GaugeState {
  Grid grid;
  std::vector<Mat3> b;
  std::vector<Mat3> frame;                  // columns: coordinate components of e_k
  std::vector<FrameConnection> connection;  // [k](i, j) = w^i_j(e_k)
  detail::MatrixDerivative db;  // discrete derivatives of b

  GaugeResidual residual() const {
    GaugeResidual r{ScalarField(grid), ScalarField(grid), ScalarField(grid)};
    for (std::size_t n = 0; n < b.size(); ++n) {
      r.r12[n] = connection[n][2](0, 1);
      r.r23[n] = connection[n][0](1, 2);
      r.r13[n] = -connection[n][1](0, 2);
    }
    return r;
  }
};

namespace detail {

inline MatrixDerivative differentiate(const Grid& grid, const std::vector<Mat3>& m) {
  MatrixDerivative d;
  std::vector<double> plane(grid.size());
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      for (std::size_t n = 0; n < grid.size(); ++n) plane[n] = m[n](r, c);
      for (int ax = 0; ax < 3; ++ax) d[static_cast<std::size_t>(ax)][static_cast<std::size_t>(3 * r + c)] = partial(grid, plane, ax);
    }
  }
  return d;
}

inline Mat3 derivative_at(const MatrixDerivative& d, int axis, std::size_t n) {
  Mat3 m;
  for (int e = 0; e < 9; ++e) m(e / 3, e % 3) = d[static_cast<std::size_t>(axis)][static_cast<std::size_t>(e)][n];
  return m;
}

/// P_k = b Omegabar(e_k) b^-1 and T_k = e_k(b) b^-1 with discrete derivatives, so that
/// Omega_k = P_k - T_k.
struct ConnectionParts {
  FrameConnection p, t;
  Mat3 frame;
};

inline ConnectionParts connection_parts(const BaseGeometry& base, const Mat3& b, const MatrixDerivative& db, std::size_t n) {
  ConnectionParts out;
  const Mat3 binv = so21_inverse(b);
  const Mat3 ebar = base.frame.matrix(n);
  out.frame = ebar * binv;
  const auto& cbar = base.conn_frame[n];
  std::array<Mat3, 3> db_n{derivative_at(db, 0, n), derivative_at(db, 1, n), derivative_at(db, 2, n)};
  for (int k = 0; k < 3; ++k) {
    Mat3 mix = Mat3::Zero();
    Mat3 dk = Mat3::Zero();
    for (int m = 0; m < 3; ++m) mix += binv(m, k) * cbar[static_cast<std::size_t>(m)];
    for (int a = 0; a < 3; ++a) dk += out.frame(a, k) * db_n[static_cast<std::size_t>(a)];
    out.p[static_cast<std::size_t>(k)] = b * mix * binv;
    out.t[static_cast<std::size_t>(k)] = dk * binv;
  }
  return out;
}

}  // namespace detail

/// Connection and frame of the coframe b * wbar at every node.
inline GaugeState evaluate_gauge(const GaugeField& gauge, const BaseGeometry& base) {
  const Grid& grid = base.grid();
  if (!(gauge.grid() == grid)) throw_input("gauge field and base geometry live on different grids");
  GaugeState s{grid, std::vector<Mat3>(grid.size()), std::vector<Mat3>(grid.size()), std::vector<FrameConnection>(grid.size()), {}};
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t n = b; n < e; ++n) s.b[n] = gauge.matrix(n);
  });
  s.db = detail::differentiate(grid, s.b);
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t n = b; n < e; ++n) {
      const auto parts = detail::connection_parts(base, s.b[n], s.db, n);
      s.frame[n] = parts.frame;
      for (std::size_t k = 0; k < 3; ++k) s.connection[n][k] = parts.p[k] - parts.t[k];
    }
  });
  return s;
}

/// Residuals (r12, r23, r13) of the coframe b * wbar.
inline GaugeResidual nonlinear_residual(const GaugeField& gauge, const BaseGeometry& base) {
  return evaluate_gauge(gauge, base).residual();
}

inline GaugeResidual nonlinear_residual(const GaugeField& gauge, const Coframe& base, const OrthonormalFrame& frame,
                                        const ConnectionForms& conn) {
  return nonlinear_residual(gauge, BaseGeometry(base, frame, conn));
}

/// The coframe b * wbar.
inline Coframe gauge_apply(const GaugeField& gauge, const Coframe& base) {
  const Grid& grid = base.grid();
  if (!(gauge.grid() == grid)) throw_input("gauge_apply: fields live on different grids");
  Coframe out{{OneFormField(grid), OneFormField(grid), OneFormField(grid)}};
  for (std::size_t n = 0; n < grid.size(); ++n) out.set(n, gauge.matrix(n) * base.matrix(n));
  return out;
}

/// Algebra increment field, components (beta^2_3, beta^1_3, beta^1_2).
using AlgebraField = std::array<ScalarField, 3>;

inline AlgebraField zero_algebra(const Grid& g) { return {ScalarField(g), ScalarField(g), ScalarField(g)}; }

inline Vec3 algebra_at(const AlgebraField& beta, std::size_t n) { return {beta[0][n], beta[1][n], beta[2][n]}; }

/// Frozen-coefficient linearization around the current iterate:
///   e_q(beta_q) = source_q + (coupling * beta)_q,   q = 0, 1, 2,
/// with advection directions e_q of the current rotated frame.
struct LinearizedState {
  std::array<VectorField, 3> advection;
  std::array<ScalarField, 3> source;
  std::vector<Mat3> coupling;
  std::array<std::vector<std::uint8_t>, 3> closure;  // exit-axis bits plus closure flags, see linearize
};

/// Order-zero part Z_k(beta) = [beta, Omega_k] - sum_l beta^l_k Omega_l of the change in Omega_k.
inline Mat3 order_zero_change(const FrameConnection& omega, const Mat3& beta, int k) {
  Mat3 z = beta * omega[static_cast<std::size_t>(k)] - omega[static_cast<std::size_t>(k)] * beta;
  for (int l = 0; l < 3; ++l) z -= beta(l, k) * omega[static_cast<std::size_t>(l)];
  return z;
}

/// Exact derivative of the discrete residuals along t -> exp(t beta) b at t = 0.
inline GaugeResidual apply_linearization(const GaugeField& gauge, const BaseGeometry& base, const AlgebraField& beta) {
  const Grid& grid = base.grid();
  std::vector<Mat3> b(grid.size()), bb(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) {
    b[n] = gauge.matrix(n);
    bb[n] = so21_generator(algebra_at(beta, n)) * b[n];
  }
  const auto db = detail::differentiate(grid, b);
  const auto dbb = detail::differentiate(grid, bb);
  GaugeResidual out{ScalarField(grid), ScalarField(grid), ScalarField(grid)};
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const auto parts = detail::connection_parts(base, b[n], db, n);
    const Mat3 binv = so21_inverse(b[n]);
    const Mat3 beta_n = so21_generator(algebra_at(beta, n));
    FrameConnection omega;
    for (std::size_t k = 0; k < 3; ++k) omega[k] = parts.p[k] - parts.t[k];
    std::array<Mat3, 3> dbb_n{detail::derivative_at(dbb, 0, n), detail::derivative_at(dbb, 1, n), detail::derivative_at(dbb, 2, n)};
    FrameConnection delta;
    for (int k = 0; k < 3; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      Mat3 d = beta_n * parts.p[uk] - parts.p[uk] * beta_n + parts.t[uk] * beta_n;
      for (int l = 0; l < 3; ++l) d -= beta_n(l, k) * omega[static_cast<std::size_t>(l)];
      Mat3 transported = Mat3::Zero();
      for (int a = 0; a < 3; ++a) transported += parts.frame(a, k) * dbb_n[static_cast<std::size_t>(a)];
      d -= transported * binv;
      delta[uk] = d;
    }
    out.r12[n] = delta[2](0, 1);
    out.r23[n] = delta[0](1, 2);
    out.r13[n] = -delta[1](0, 2);
  }
  return out;
}

/// Initial surface {n . y = offset} and the nodes lying within h/2 of it.
class CauchySurface {
public:
  CauchySurface(const Grid& grid, const std::array<double, 3>& normal, double offset) : grid_(grid) {
    const Vec3 nv(normal[0], normal[1], normal[2]);
    const double len = nv.norm();
    if (!(len > 0.0)) throw_input("degenerate sigma: normal (0,0,0)");
    normal_ = nv / len;
    offset_ = offset / len;
    const double h = std::min({grid.spacing(0), grid.spacing(1), grid.spacing(2)});
    distance_.resize(grid.size());
    on_surface_.assign(grid.size(), 0);
    std::size_t count = 0;
    for (std::size_t n = 0; n < grid.size(); ++n) {
      distance_[n] = normal_.dot(grid.point(n)) - offset_;
      if (std::abs(distance_[n]) <= 0.5 * h * (1.0 + 1e-12)) {
        on_surface_[n] = 1;
        ++count;
      }
    }
    if (count == 0) throw_input("sigma does not intersect the grid");
    for (std::size_t n = 0; n < grid.size(); ++n) {
      if (on_surface_[n] == 0) order_.push_back(n);
    }
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(distance_[a]) < std::abs(distance_[b]); });
  }

  static CauchySurface from_problem(const ProblemSpec& spec, const Grid& grid) {
    return CauchySurface(grid, spec.sigma.normal, spec.sigma_offset());
  }

  const Grid& grid() const { return grid_; }
  const Vec3& unit_normal() const { return normal_; }
  double distance(std::size_t n) const { return distance_[n]; }
  bool on_surface(std::size_t n) const { return on_surface_[n] != 0; }
  /// Off-surface nodes by increasing distance from the surface.
  const std::vector<std::size_t>& march_order() const { return order_; }
  std::size_t surface_size() const { return grid_.size() - order_.size(); }

private:
  Grid grid_;
  Vec3 normal_;
  double offset_{0.0};
  std::vector<double> distance_;
  std::vector<unsigned char> on_surface_;
  std::vector<std::size_t> order_;
};

struct TransversalityReport {
  double min_pairing{std::numeric_limits<double>::infinity()};
  int frame_index{0};  // 1-based index of the worst frame vector
  std::size_t node{0};
  double threshold{0.1};
  bool pass() const { return min_pairing > threshold; }
  std::string message(const Grid& g) const {
    std::ostringstream out;
    out << "transversality " << (pass() ? "ok" : "failure") << ": frame vector e" << frame_index << " makes pairing "
        << min_pairing << " with the sigma normal at node " << format_node(g, node) << " (threshold " << threshold << ")";
    return out.str();
  }
};

/// min over surface nodes and i of |n . e_i| / |e_i| with the unit Euclidean normal n.
inline TransversalityReport transversality_check(const OrthonormalFrame& frame, const CauchySurface& sigma, double threshold = 0.1) {
  TransversalityReport rep;
  rep.threshold = threshold;
  const Grid& g = frame.grid();
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!sigma.on_surface(n)) continue;
    for (int i = 0; i < 3; ++i) {
      const Vec3 e = frame.e[static_cast<std::size_t>(i)].at(n);
      const double p = std::abs(sigma.unit_normal().dot(e)) / e.norm();
      if (p < rep.min_pairing) {
        rep.min_pairing = p;
        rep.frame_index = i + 1;
        rep.node = n;
      }
    }
  }
  return rep;
}

inline OrthonormalFrame frame_from_state(const GaugeState& s) {
  OrthonormalFrame f{{VectorField(s.grid), VectorField(s.grid), VectorField(s.grid)}};
  for (std::size_t n = 0; n < s.frame.size(); ++n) f.set(n, s.frame[n]);
  return f;
}

namespace detail {

// Index offset from node n one step outward across each face named in `axes`.
inline std::ptrdiff_t exit_step(const Grid& g, std::size_t n, unsigned axes) {
  const auto c = g.ijk(n);
  std::ptrdiff_t e = 0;
  for (int ax = 0; ax < 3; ++ax) {
    if (!(axes & (1u << ax))) continue;
    const auto s = static_cast<std::ptrdiff_t>(g.stride(ax));
    e += c[static_cast<std::size_t>(ax)] == 0 ? -s : s;
  }
  return e;
}

}  // namespace detail

/// Axes at node n whose upwind neighbor toward the surface, along the characteristic of the
/// advection a, lies outside the box (bit per axis). Those characteristics leave the box before
/// reaching the surface, so the node needs boundary data.
inline unsigned exit_axes(const CauchySurface& sigma, const Vec3& a, std::size_t n) {
  if (sigma.on_surface(n)) return 0;
  const Grid& g = sigma.grid();
  const double side = sigma.distance(n) > 0.0 ? 1.0 : -1.0;
  const double dir = -side * (sigma.unit_normal().dot(a) >= 0.0 ? 1.0 : -1.0);
  const auto c = g.ijk(n);
  unsigned missing = 0;
  for (int ax = 0; ax < 3; ++ax) {
    const auto ua = static_cast<std::size_t>(ax);
    if (a[ax] == 0.0) continue;
    const int target = c[ua] + (dir * a[ax] > 0.0 ? 1 : -1);
    if (target < 0 || target >= g.n[ua]) missing |= 1u << ax;
  }
  return missing;
}

inline constexpr double closure_data_ratio = 3.0;
inline constexpr std::uint8_t closure_data = 8;
inline constexpr std::uint8_t closure_extrapolate = 16;

/// Frozen-coefficient linearization.
///
/// At nodes with exit axes the derivative along each exit axis is taken from the node two steps
/// inward, which is already settled by the march, so the face equation becomes a transport
/// along the face with known forcing. Where the exit axes carry most of the stencil the value
/// is set directly instead: extrapolated inward along the exit axes when both source nodes are
/// nearer the surface, otherwise from the gradient along the surface normal.
inline LinearizedState linearize(const GaugeState& state, const CauchySurface& sigma) {
  const Grid& grid = state.grid;
  LinearizedState lin{{VectorField(grid), VectorField(grid), VectorField(grid)},
                      {ScalarField(grid), ScalarField(grid), ScalarField(grid)},
                      std::vector<Mat3>(grid.size()),
                      {std::vector<std::uint8_t>(grid.size()), std::vector<std::uint8_t>(grid.size()),
                       std::vector<std::uint8_t>(grid.size())}};
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t n = b; n < e; ++n) {
      const auto& omega = state.connection[n];
      const Mat3 binv = so21_inverse(state.b[n]);
      for (int q = 0; q < 3; ++q) {
        const auto uq = static_cast<std::size_t>(q);
        const int row = unknown_row[uq], col = unknown_col[uq];
        const Vec3 a = state.frame[n].col(q);
        lin.advection[uq].set(n, a);
        const unsigned missing = exit_axes(sigma, a, n);
        lin.closure[uq][n] = static_cast<std::uint8_t>(missing);
        double src = omega[uq](row, col);
        double scale = 1.0;
        if (missing != 0) {
          double transported = 0.0, w_in = 0.0, w_out = 0.0;
          for (int ax = 0; ax < 3; ++ax) {
            transported += a[ax] * detail::derivative_at(state.db, ax, n).row(row).dot(binv.col(col));
            (missing & (1u << ax) ? w_out : w_in) += std::abs(a[ax]) / grid.spacing(ax);
          }
          if (w_out > closure_data_ratio * w_in) {
            const auto e = static_cast<std::size_t>(detail::exit_step(grid, n, missing));
            const std::size_t n1 = n - e, n2 = n1 - e;
            const double d0 = std::abs(sigma.distance(n)), d1 = std::abs(sigma.distance(n1));
            if (std::abs(sigma.distance(n2)) < d1 && d1 < d0) {
              lin.closure[uq][n] |= closure_extrapolate;
              src = 2.0 * state.b[n1](row, col) - state.b[n2](row, col) - state.b[n](row, col);
            } else {
              lin.closure[uq][n] |= closure_data;
              const double an = sigma.unit_normal().dot(a);
              const double target = std::abs(an) >= 0.1 * a.norm() ? sigma.distance(n) * (src + transported) / an : 0.0;
              src = target - state.b[n](row, col);
            }
            scale = 0.0;
          } else {
            for (int ax = 0; ax < 3; ++ax) {
              if (!(missing & (1u << ax))) continue;
              const std::size_t n2 = n - 2 * static_cast<std::size_t>(detail::exit_step(grid, n, 1u << ax));
              const Mat3 binv2 = so21_inverse(state.b[n2]);
              src += a[ax] * (detail::derivative_at(state.db, ax, n).row(row).dot(binv.col(col)) -
                              detail::derivative_at(state.db, ax, n2).row(row).dot(binv2.col(col)));
            }
          }
        }
        lin.source[uq][n] = src;
        for (int p = 0; p < 3; ++p) {
          const Mat3 z = order_zero_change(omega, so21_generator(Vec3::Unit(p)), q);
          lin.coupling[n](q, p) = scale * z(row, col);
        }
      }
    }
  });
  return lin;
}

/// One upwind Gauss-Seidel sweep for a(u) = f away from the surface, u = 0 on it.
///
/// Each node takes, per axis, the neighbor lying toward the surface along the characteristic
/// through it, which gives a positive-weight stencil. Exit axes flagged in `closure` are left
/// out, and nodes whose value is set directly take it from f (see linearize).
inline void march_transport(const CauchySurface& sigma, const VectorField& advection, std::span<const std::uint8_t> closure,
                            std::span<const double> rhs, std::vector<double>& u) {
  const Grid& g = sigma.grid();
  const Vec3& nrm = sigma.unit_normal();
  std::array<double, 3> inv_h{1.0 / g.spacing(0), 1.0 / g.spacing(1), 1.0 / g.spacing(2)};
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (sigma.on_surface(n)) u[n] = 0.0;
  }
  for (std::size_t n : sigma.march_order()) {
    const Vec3 a = advection.at(n);
    const double side = sigma.distance(n) > 0.0 ? 1.0 : -1.0;
    const double dir = -side * (nrm.dot(a) >= 0.0 ? 1.0 : -1.0);
    if (closure[n] & closure_data) {
      u[n] = rhs[n];
      continue;
    }
    if (closure[n] & closure_extrapolate) {
      const auto e = static_cast<std::size_t>(detail::exit_step(g, n, closure[n]));
      u[n] = rhs[n] + 2.0 * u[n - e] - u[n - 2 * e];
      continue;
    }
    double sum = 0.0, w_in = 0.0;
    for (int ax = 0; ax < 3; ++ax) {
      if (a[ax] == 0.0 || (closure[n] & (1u << ax))) continue;
      const double w = std::abs(a[ax]) * inv_h[static_cast<std::size_t>(ax)];
      const std::size_t s = g.stride(ax);
      sum += w * u[dir * a[ax] > 0.0 ? n + s : n - s];
      w_in += w;
    }
    u[n] = w_in > 0.0 ? (sum - dir * rhs[n]) / w_in : 0.0;
  }
}

/// Solves the linearized system by lagging the order-zero coupling.
inline AlgebraField solve_linearized(const LinearizedState& lin, const CauchySurface& sigma, int inner_iterations) {
  const Grid& g = sigma.grid();
  AlgebraField beta = zero_algebra(g);
  std::vector<double> rhs(g.size());
  for (int it = 0; it < inner_iterations; ++it) {
    AlgebraField next = beta;
    double change = 0.0, scale = 0.0;
    for (int q = 0; q < 3; ++q) {
      const auto uq = static_cast<std::size_t>(q);
      for (std::size_t n = 0; n < g.size(); ++n) {
        rhs[n] = lin.source[uq][n] + lin.coupling[n].row(q).dot(algebra_at(beta, n));
      }
      march_transport(sigma, lin.advection[uq], lin.closure[uq], rhs, next[uq].plane(0));
    }
    for (int q = 0; q < 3; ++q) {
      for (std::size_t n = 0; n < g.size(); ++n) {
        change = std::max(change, std::abs(next[static_cast<std::size_t>(q)][n] - beta[static_cast<std::size_t>(q)][n]));
        scale = std::max(scale, std::abs(next[static_cast<std::size_t>(q)][n]));
      }
    }
    beta = std::move(next);
    if (change <= 1e-3 * scale) break;
  }
  return beta;
}

struct IterationRecord {
  int iteration{0};
  std::array<double, 3> residual{};  // r12, r23, r13 maxima
  double max_rapidity{0.0};
  double group_defect{0.0};
};

struct CauchyResult {
  GaugeField gauge;
  int iterations{0};
  bool converged{false};
  std::string stop_reason;
  std::vector<IterationRecord> log;
  std::array<double, 3> residual{};  // interior maxima of r12, r23, r13 at the returned iterate
  double residual_max{0.0};
  double max_group_defect{0.0};
};

/// CSV convergence log: iteration, per-equation residual maxima, max rapidity.
inline std::string format_convergence_log(const std::vector<IterationRecord>& log) {
  std::ostringstream out;
  out << "iteration,res12,res23,res13,max_rapidity\n";
  char buf[128];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17e,%.17e,%.17e,%.17e\n", r.iteration, r.residual[0], r.residual[1], r.residual[2],
                  r.max_rapidity);
    out << buf;
  }
  return out.str();
}

struct CauchyOptions {
  double tol{1e-8};
  int max_iter{200};
  int inner_iterations{6};
  double transversality_threshold{0.1};
  double rapidity_limit{10.0};
  double group_tolerance{1e-12};
  int divergence_window{5};
  int stagnation_window{8};
};

inline CauchyOptions cauchy_options(const SolverSettings& s) {
  CauchyOptions o;
  o.tol = s.tol;
  o.max_iter = s.max_iter;
  o.inner_iterations = s.inner_iterations;
  o.transversality_threshold = s.transversality_threshold;
  return o;
}

/// Picard iteration on the linearized transport system, starting from b = identity, which
/// keeps the base coframe as Cauchy data on the surface. Returns the iterate with the smallest
/// residual once the residual drops below tol, stagnates, or max_iter is reached.
inline CauchyResult solve_cauchy(const BaseGeometry& base, const CauchySurface& sigma, const CauchyOptions& opt) {
  const Grid& grid = base.grid();
  CauchyResult result;
  GaugeField gauge(grid);
  GaugeField best = gauge;
  double best_residual = std::numeric_limits<double>::infinity();
  int best_iteration = 0;
  double previous = std::numeric_limits<double>::infinity();
  int increases = 0;

  for (int it = 1; it <= opt.max_iter; ++it) {
    const GaugeState state = evaluate_gauge(gauge, base);
    const auto maxima = state.residual().interior_maxima();
    const double current = std::max({maxima[0], maxima[1], maxima[2]});
    double defect = 0.0;
    for (const auto& b : state.b) defect = std::max(defect, group_defect(b));
    result.log.push_back({it, maxima, gauge.max_rapidity(), defect});
    result.max_group_defect = std::max(result.max_group_defect, defect);
    result.iterations = it;
    if (defect > opt.group_tolerance) {
      throw_solver("group invariant violated: |b^T eta b - eta| = " + std::to_string(defect) + " at iteration " + std::to_string(it));
    }
    if (!std::isfinite(current)) throw_solver("iteration divergence: non-finite residual at iteration " + std::to_string(it));

    const TransversalityReport tr = transversality_check(frame_from_state(state), sigma, opt.transversality_threshold);
    if (!tr.pass()) throw_solver(tr.message(grid));

    if (current < best_residual) {
      best_residual = current;
      result.residual = maxima;
      best = gauge;
      best_iteration = it;
    }
    if (current < opt.tol) {
      result.converged = true;
      result.stop_reason = "tolerance";
      break;
    }
    increases = current > previous ? increases + 1 : 0;
    previous = current;
    if (increases >= opt.divergence_window && current > 10.0 * best_residual) {
      throw_solver("iteration divergence: residual increased over " + std::to_string(increases) +
                   " consecutive iterations (now " + std::to_string(current) + ")");
    }
    if (it - best_iteration >= opt.stagnation_window) {
      result.stop_reason = "stagnation";
      break;
    }
    if (it == opt.max_iter) {
      result.stop_reason = "max_iter";
      break;
    }

    const LinearizedState lin = linearize(state, sigma);
    const AlgebraField beta = solve_linearized(lin, sigma, opt.inner_iterations);
    for (std::size_t n = 0; n < grid.size(); ++n) {
      if (sigma.on_surface(n)) continue;
      gauge.set_matrix(n, so21_exp(algebra_at(beta, n)) * state.b[n]);
    }
    const double rap = gauge.max_rapidity();
    if (!(rap <= opt.rapidity_limit)) {
      throw_solver("trust region violated: rapidity " + std::to_string(rap) + " exceeds " + std::to_string(opt.rapidity_limit));
    }
  }
  result.gauge = std::move(best);
  result.residual_max = best_residual;
  return result;
}

}  // namespace lordiag
