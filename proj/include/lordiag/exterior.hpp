#pragma once

// Exterior calculus on the node grid. Derivatives are second-order central differences in
// the interior and second-order one-sided differences on boundary faces.

#include <span>
#include <vector>

#include "lordiag/grid.hpp"

namespace lordiag {

/// d f / d y^axis for a plane of nodal values.
inline std::vector<double> partial(const Grid& g, std::span<const double> f, int axis) {
  std::vector<double> out(g.size());
  const std::size_t s = g.stride(axis);
  const int n = g.n[axis];
  const double inv2h = 1.0 / (2.0 * g.spacing(axis));
  parallel_for(g.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t idx = b; idx < e; ++idx) {
      const int i = g.ijk(idx)[axis];
      if (i == 0) {
        out[idx] = (-3.0 * f[idx] + 4.0 * f[idx + s] - f[idx + 2 * s]) * inv2h;
      } else if (i == n - 1) {
        out[idx] = (3.0 * f[idx] - 4.0 * f[idx - s] + f[idx - 2 * s]) * inv2h;
      } else {
        out[idx] = (f[idx + s] - f[idx - s]) * inv2h;
      }
    }
  });
  return out;
}

/// Exterior derivative of a K-form (K <= 2).
template <int K>
  requires(K >= 0 && K <= 2)
Form<K + 1> ext_d(const Form<K>& a) {
  const Grid& g = a.grid();
  Form<K + 1> out(g);
  if constexpr (K == 0) {
    for (int ax = 0; ax < 3; ++ax) out.plane(ax) = partial(g, a.plane(0), ax);
  } else if constexpr (K == 1) {
    // (da)_{23} = d2 a3 - d3 a2, cyclic.
    for (int c = 0; c < 3; ++c) {
      const int p = (c + 1) % 3;
      const int q = (c + 2) % 3;
      const auto dp_aq = partial(g, a.plane(q), p);
      const auto dq_ap = partial(g, a.plane(p), q);
      auto& o = out.plane(c);
      for (std::size_t i = 0; i < g.size(); ++i) o[i] = dp_aq[i] - dq_ap[i];
    }
  } else {
    auto& o = out.plane(0);
    for (int c = 0; c < 3; ++c) {
      const auto d = partial(g, a.plane(c), c);
      for (std::size_t i = 0; i < g.size(); ++i) o[i] += d[i];
    }
  }
  return out;
}

/// Pointwise exterior product of a K-form and an L-form (K + L <= 3).
template <int K, int L>
  requires(K >= 0 && L >= 0 && K + L <= 3)
Form<K + L> wedge(const Form<K>& a, const Form<L>& b) {
  const Grid& g = a.grid();
  if (!(g == b.grid())) throw_input("wedge: fields live on different grids");
  Form<K + L> out(g);
  const std::size_t n = g.size();
  if constexpr (K == 0) {
    for (std::size_t c = 0; c < Form<L>::components; ++c) {
      for (std::size_t i = 0; i < n; ++i) out(c, i) = a[i] * b(c, i);
    }
  } else if constexpr (L == 0) {
    for (std::size_t c = 0; c < Form<K>::components; ++c) {
      for (std::size_t i = 0; i < n; ++i) out(c, i) = a(c, i) * b[i];
    }
  } else if constexpr (K == 1 && L == 1) {
    for (std::size_t i = 0; i < n; ++i) out.set(i, a.at(i).cross(b.at(i)));
  } else {
    // 1^2 and 2^1 both reduce to the Euclidean pairing of components.
    for (std::size_t i = 0; i < n; ++i) out[i] = a.at(i).dot(b.at(i));
  }
  return out;
}

/// Pointwise pairing a(v) = sum_a a_a v^a.
inline ScalarField contract(const OneFormField& a, const VectorField& v) {
  if (!(a.grid() == v.grid())) throw_input("contract: fields live on different grids");
  ScalarField out(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.at(i).dot(v.at(i));
  return out;
}

/// Value of a 2-form on a pair of vectors, F(u, v) with components (F23, F31, F12).
inline double eval_two_form(const Vec3& f, const Vec3& u, const Vec3& v) { return f.dot(u.cross(v)); }

/// Scalar multiple of a form by a scalar field.
template <int K>
Form<K> scale(const ScalarField& s, const Form<K>& a) {
  return wedge<0, K>(s, a);
}

}  // namespace lordiag
