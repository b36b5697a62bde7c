#pragma once

// The identity component of SO(2,1) = {b : b^T eta b = eta}, eta = diag(1, 1, -1), in the
// product chart b = R(theta) B1(phi1) B2(phi2): a rotation in the (1,2) plane followed by
// boosts mixing index 1 with 3 and index 2 with 3.
//
// Algebra elements are stored as (u, v, w) = (beta^2_3, beta^1_3, beta^1_2).

#include <algorithm>
#include <cmath>

#include "lordiag/frame.hpp"

namespace lordiag {

struct GaugeParams {
  double theta{0.0};
  double phi1{0.0};
  double phi2{0.0};
};

inline Mat3 rotation12(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

inline Mat3 boost13(double phi) {
  const double ch = std::cosh(phi), sh = std::sinh(phi);
  Mat3 b;
  b << ch, 0.0, sh, 0.0, 1.0, 0.0, sh, 0.0, ch;
  return b;
}

inline Mat3 boost23(double phi) {
  const double ch = std::cosh(phi), sh = std::sinh(phi);
  Mat3 b;
  b << 1.0, 0.0, 0.0, 0.0, ch, sh, 0.0, sh, ch;
  return b;
}

inline Mat3 so21_from_params(double theta, double phi1, double phi2) { return rotation12(theta) * boost13(phi1) * boost23(phi2); }
inline Mat3 so21_from_params(const GaugeParams& p) { return so21_from_params(p.theta, p.phi1, p.phi2); }

/// Inverse of the product chart for any b in the identity component.
inline GaugeParams so21_params(const Mat3& b) {
  GaugeParams p;
  // Third row of R B1 B2 is (sinh phi1, cosh phi1 sinh phi2, cosh phi1 cosh phi2).
  p.phi1 = std::asinh(b(2, 0));
  p.phi2 = std::asinh(b(2, 1) / std::cosh(p.phi1));
  const Mat3 r = b * (boost13(p.phi1) * boost23(p.phi2)).inverse();
  p.theta = std::atan2(r(1, 0), r(0, 0));
  return p;
}

/// Inverse via eta b^T eta, exact for group elements.
inline Mat3 so21_inverse(const Mat3& b) { return eta() * b.transpose() * eta(); }

/// Algebra element with beta^2_3 = beta^3_2 = u, beta^1_3 = beta^3_1 = v, beta^1_2 = -beta^2_1 = w.
inline Mat3 so21_generator(const Vec3& uvw) {
  Mat3 m;
  m << 0.0, uvw[2], uvw[1], -uvw[2], 0.0, uvw[0], uvw[1], uvw[0], 0.0;
  return m;
}

/// Closed-form exponential: beta^3 = kappa beta with kappa = u^2 + v^2 - w^2.
inline Mat3 so21_exp(const Vec3& uvw) {
  const Mat3 beta = so21_generator(uvw);
  const double kappa = uvw[0] * uvw[0] + uvw[1] * uvw[1] - uvw[2] * uvw[2];
  double c1 = 1.0, c2 = 0.5;  // exp = I + c1 beta + c2 beta^2
  if (std::abs(kappa) < 1e-8) {
    c1 = 1.0 + kappa / 6.0 + kappa * kappa / 120.0;
    c2 = 0.5 + kappa / 24.0 + kappa * kappa / 720.0;
  } else if (kappa > 0.0) {
    const double r = std::sqrt(kappa);
    c1 = std::sinh(r) / r;
    c2 = (std::cosh(r) - 1.0) / kappa;
  } else {
    const double r = std::sqrt(-kappa);
    c1 = std::sin(r) / r;
    c2 = (1.0 - std::cos(r)) / (-kappa);
  }
  return Mat3::Identity() + c1 * beta + c2 * beta * beta;
}

/// || b^T eta b - eta ||_max
inline double group_defect(const Mat3& b) { return (b.transpose() * eta() * b - eta()).cwiseAbs().maxCoeff(); }

}  // namespace lordiag
