#pragma once

// Lorentz-orthonormal frames, dual coframes and Levi-Civita connection 1-forms.
//
// Conventions: eta = diag(1, 1, -1), so frame index 3 (0-based 2) is timelike. Connection
// forms w^i_j satisfy dw^i = sum_j w^j ^ w^i_j, and metric compatibility gives
//   w^2_1 = -w^1_2,   w^3_1 = w^1_3,   w^3_2 = w^2_3,   w^i_i = 0.

#include <array>
#include <cmath>
#include <string>

#include "lordiag/exterior.hpp"
#include "lordiag/grid.hpp"

namespace lordiag {

inline constexpr std::array<double, 3> eta_diag{1.0, 1.0, -1.0};

inline const Mat3& eta() {
  static const Mat3 m = Vec3(eta_diag[0], eta_diag[1], eta_diag[2]).asDiagonal();
  return m;
}

/// Vector fields e_1, e_2, e_3 with g(e_i, e_j) = eta_ij.
struct OrthonormalFrame {
  std::array<VectorField, 3> e;

  const Grid& grid() const { return e[0].grid(); }
  /// Column m holds the coordinate components of e_m.
  Mat3 matrix(std::size_t node) const {
    Mat3 m;
    for (int c = 0; c < 3; ++c) m.col(c) = e[static_cast<std::size_t>(c)].at(node);
    return m;
  }
  void set(std::size_t node, const Mat3& m) {
    for (int c = 0; c < 3; ++c) e[static_cast<std::size_t>(c)].set(node, m.col(c));
  }
};

/// One-forms w^1, w^2, w^3.
struct Coframe {
  std::array<OneFormField, 3> w;

  const Grid& grid() const { return w[0].grid(); }
  /// Row i holds the coordinate components of w^i.
  Mat3 matrix(std::size_t node) const {
    Mat3 m;
    for (int r = 0; r < 3; ++r) m.row(r) = w[static_cast<std::size_t>(r)].at(node).transpose();
    return m;
  }
  void set(std::size_t node, const Mat3& m) {
    for (int r = 0; r < 3; ++r) w[static_cast<std::size_t>(r)].set(node, m.row(r).transpose());
  }
};

/// Connection 1-forms stored once per independent entry (w^1_2, w^1_3, w^2_3);
/// the remaining entries follow from the signature symmetries.
struct ConnectionForms {
  OneFormField w12, w13, w23;

  const Grid& grid() const { return w12.grid(); }

  /// Sign and stored plane for entry (i, j), 0-based.
  double component(int i, int j, int axis, std::size_t node) const {
    if (i == j) return 0.0;
    const auto a = static_cast<std::size_t>(axis);
    if (i == 0 && j == 1) return w12(a, node);
    if (i == 1 && j == 0) return -w12(a, node);
    if ((i == 0 && j == 2) || (i == 2 && j == 0)) return w13(a, node);
    return w23(a, node);
  }

  OneFormField entry(int i, int j) const {
    OneFormField out(grid());
    for (int a = 0; a < 3; ++a) {
      for (std::size_t n = 0; n < out.size(); ++n) out(static_cast<std::size_t>(a), n) = component(i, j, a, n);
    }
    return out;
  }

  /// Matrix of w^i_j(v) for a coordinate vector v at `node`.
  Mat3 evaluate(std::size_t node, const Vec3& v) const {
    const double a = w12.at(node).dot(v);
    const double b = w13.at(node).dot(v);
    const double c = w23.at(node).dot(v);
    Mat3 m;
    m << 0.0, a, b, -a, 0.0, c, b, c, 0.0;
    return m;
  }
};

/// Deterministic Gram-Schmidt against g: d/dy1 and d/dy2 give the spacelike e_1, e_2;
/// e_3 completes the frame as a timelike vector with positive d/dy3 component.
inline OrthonormalFrame lorentz_gram_schmidt(const MetricField& g) {
  const Grid& grid = g.grid();
  OrthonormalFrame frame{{VectorField(grid), VectorField(grid), VectorField(grid)}};
  constexpr double pivot_floor = 1e-10;
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const Mat3 gm = g.at(n);
    if (!has_lorentz_signature(gm)) throw_input("metric signature is not (+,+,-) at node " + format_node(grid, n));
    auto ip = [&](const Vec3& u, const Vec3& v) { return u.dot(gm * v); };
    std::array<Vec3, 3> e;
    for (int k = 0; k < 3; ++k) {
      Vec3 v = Vec3::Unit(k);
      for (int j = 0; j < k; ++j) v -= eta_diag[static_cast<std::size_t>(j)] * ip(v, e[static_cast<std::size_t>(j)]) * e[static_cast<std::size_t>(j)];
      const double norm2 = ip(v, v) * eta_diag[static_cast<std::size_t>(k)];
      if (!(norm2 > pivot_floor)) {
        throw_input("near-degenerate Gram-Schmidt pivot " + std::to_string(k + 1) + " at node " + format_node(grid, n));
      }
      e[static_cast<std::size_t>(k)] = v / std::sqrt(norm2);
    }
    for (std::size_t k = 0; k < 3; ++k) frame.e[k].set(n, e[k]);
  }
  return frame;
}

/// Coframe dual to `frame`: the inverse of the frame component matrix.
inline Coframe dual_coframe(const OrthonormalFrame& frame) {
  const Grid& grid = frame.grid();
  Coframe co{{OneFormField(grid), OneFormField(grid), OneFormField(grid)}};
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const Mat3 e = frame.matrix(n);
    const double det = e.determinant();
    if (!(std::abs(det) > 1e-14)) throw_input("singular frame matrix at node " + format_node(grid, n));
    co.set(n, e.inverse());
  }
  return co;
}

/// Frame dual to a coframe.
inline OrthonormalFrame dual_frame(const Coframe& co) {
  const Grid& grid = co.grid();
  OrthonormalFrame frame{{VectorField(grid), VectorField(grid), VectorField(grid)}};
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const Mat3 w = co.matrix(n);
    if (!(std::abs(w.determinant()) > 1e-14)) throw_input("singular coframe matrix at node " + format_node(grid, n));
    frame.set(n, w.inverse());
  }
  return frame;
}

/// Per-node frame components of the connection: result[k](i, j) = w^i_j(e_k).
using FrameConnection = std::array<Mat3, 3>;

/// Levi-Civita connection of an orthonormal coframe, solved pointwise from the structure
/// functions c^i_jk = dw^i(e_j, e_k):
///   Gamma_{ikj} = 1/2 (c_{jki} + c_{kji} + c_{ijk}),  c_{ijk} = eta_ii c^i_jk,
///   w^i_j = sum_k eta_ii Gamma_{ikj} w^k.
inline ConnectionForms connection_forms(const Coframe& co) {
  const Grid& grid = co.grid();
  const std::array<TwoFormField, 3> dw{ext_d(co.w[0]), ext_d(co.w[1]), ext_d(co.w[2])};
  ConnectionForms conn{OneFormField(grid), OneFormField(grid), OneFormField(grid)};
  parallel_for(grid.size(), [&](std::size_t b, std::size_t end) {
    for (std::size_t n = b; n < end; ++n) {
      const Mat3 wm = co.matrix(n);
      const Mat3 em = wm.inverse();
      double c[3][3][3];
      for (int i = 0; i < 3; ++i) {
        const Vec3 f = dw[static_cast<std::size_t>(i)].at(n);
        for (int j = 0; j < 3; ++j) {
          for (int k = 0; k < 3; ++k) c[i][j][k] = eta_diag[static_cast<std::size_t>(i)] * eval_two_form(f, em.col(j), em.col(k));
        }
      }
      // gamma(i, k, j) = w^i_j(e_k) with the first index raised.
      auto gamma = [&](int i, int k, int j) {
        return eta_diag[static_cast<std::size_t>(i)] * 0.5 * (c[j][k][i] + c[k][j][i] + c[i][j][k]);
      };
      auto store = [&](OneFormField& out, int i, int j) {
        Vec3 v = Vec3::Zero();
        for (int k = 0; k < 3; ++k) v += gamma(i, k, j) * wm.row(k).transpose();
        out.set(n, v);
      };
      store(conn.w12, 0, 1);
      store(conn.w13, 0, 2);
      store(conn.w23, 1, 2);
    }
  });
  return conn;
}

/// Per-node w^i_j(e_k) for the frame dual to `co`.
inline std::vector<FrameConnection> frame_connection(const Coframe& co, const ConnectionForms& conn) {
  std::vector<FrameConnection> out(co.grid().size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    const Mat3 em = co.matrix(n).inverse();
    for (int k = 0; k < 3; ++k) out[n][static_cast<std::size_t>(k)] = conn.evaluate(n, em.col(k));
  }
  return out;
}

/// Max-norm of dw^i - sum_j w^j ^ w^i_j over i, nodes and components.
inline double structure_residual(const Coframe& co, const ConnectionForms& conn) {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    TwoFormField r = ext_d(co.w[static_cast<std::size_t>(i)]);
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      r -= wedge<1, 1>(co.w[static_cast<std::size_t>(j)], conn.entry(i, j));
    }
    worst = std::max(worst, r.max_abs());
  }
  return worst;
}

/// Christoffel symbols Gamma^a_{bc}, flattened as [a][b][c].
using Christoffel = std::array<double, 27>;

inline constexpr std::size_t christoffel_index(int a, int b, int c) { return static_cast<std::size_t>(9 * a + 3 * b + c); }

/// Gamma^a_{bc} = 1/2 g^{ad} (d_b g_{dc} + d_c g_{db} - d_d g_{bc}) with finite differences.
inline std::vector<Christoffel> christoffel_oracle(const MetricField& g) {
  const Grid& grid = g.grid();
  // dg[axis][plane]
  std::array<std::array<std::vector<double>, 6>, 3> dg;
  for (int ax = 0; ax < 3; ++ax) {
    for (std::size_t p = 0; p < 6; ++p) dg[static_cast<std::size_t>(ax)][p] = partial(grid, g.plane(p), ax);
  }
  std::vector<Christoffel> out(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const Mat3 gm = g.at(n);
    if (!(std::abs(gm.determinant()) > 1e-12)) throw_input("singular metric at node " + format_node(grid, n));
    const Mat3 ginv = gm.inverse();
    auto d = [&](int ax, int a, int b) { return dg[static_cast<std::size_t>(ax)][metric_plane(a, b)][n]; };
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        for (int c = 0; c < 3; ++c) {
          double s = 0.0;
          for (int dd = 0; dd < 3; ++dd) s += ginv(a, dd) * (d(b, dd, c) + d(c, dd, b) - d(dd, b, c));
          out[n][christoffel_index(a, b, c)] = 0.5 * s;
        }
      }
    }
  }
  return out;
}

/// Connection forms implied by Christoffel symbols in the given frame:
///   w^i_j(d_c) = w^i_a (d_c e_j^a + Gamma^a_{cb} e_j^b).
/// Returns all nine entries without imposing the symmetries.
inline std::array<std::array<OneFormField, 3>, 3> connection_from_christoffel(const OrthonormalFrame& frame, const Coframe& co,
                                                                               const std::vector<Christoffel>& gamma) {
  const Grid& grid = frame.grid();
  // de[j][c][a] = d_c e_j^a
  std::array<std::array<std::array<std::vector<double>, 3>, 3>, 3> de;
  for (std::size_t j = 0; j < 3; ++j) {
    for (int c = 0; c < 3; ++c) {
      for (std::size_t a = 0; a < 3; ++a) de[j][static_cast<std::size_t>(c)][a] = partial(grid, frame.e[j].plane(a), c);
    }
  }
  std::array<std::array<OneFormField, 3>, 3> out;
  for (auto& row : out) {
    for (auto& f : row) f = OneFormField(grid);
  }
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const Mat3 wm = co.matrix(n);
    const Mat3 em = frame.matrix(n);
    for (int j = 0; j < 3; ++j) {
      for (int c = 0; c < 3; ++c) {
        Vec3 nabla;  // coordinate components of nabla_{d_c} e_j
        for (int a = 0; a < 3; ++a) {
          double s = de[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)][static_cast<std::size_t>(a)][n];
          for (int b = 0; b < 3; ++b) s += gamma[n][christoffel_index(a, c, b)] * em(b, j);
          nabla[a] = s;
        }
        const Vec3 comps = wm * nabla;
        for (int i = 0; i < 3; ++i) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](static_cast<std::size_t>(c), n) = comps[i];
      }
    }
  }
  return out;
}

}  // namespace lordiag
