#pragma once

// Checks on pipeline output: the metric in the computed coordinates, oracle fixtures with a
// known diagonalizing diffeomorphism, and the run report.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lordiag/exterior.hpp"
#include "lordiag/frobenius.hpp"
#include "lordiag/problem.hpp"

namespace lordiag {

/// Normalized off-diagonal content max_{i != j} |gh_ij| / sqrt|gh_ii gh_jj| of the metric in
/// the coordinates x^i, gh = J^-T g J^-1 with J = dx/dy. The one-node boundary rind is left 0.
inline ScalarField pullback_offdiagonal(const MetricField& g, const CoordinateSystem& coords) {
  const Grid& grid = g.grid();
  if (!(grid == coords.grid())) throw_input("pullback_offdiagonal: fields live on different grids");
  std::array<OneFormField, 3> dx{ext_d<0>(coords.x[0]), ext_d<0>(coords.x[1]), ext_d<0>(coords.x[2])};
  ScalarField out(grid);
  for (std::size_t n = 0; n < grid.size(); ++n) {
    if (grid.on_boundary(n)) continue;
    Mat3 j;
    for (int i = 0; i < 3; ++i) j.row(i) = dx[static_cast<std::size_t>(i)].at(n).transpose();
    const double scale = j.cwiseAbs().maxCoeff();
    if (!(std::abs(j.determinant()) > 1e-12 * scale * scale * scale)) throw_input("singular coordinate Jacobian at node " + format_node(grid, n));
    const Mat3 jinv = j.inverse();
    const Mat3 gh = jinv.transpose() * g.at(n) * jinv;
    double m = 0.0;
    for (int a = 0; a < 3; ++a) {
      for (int b = a + 1; b < 3; ++b) m = std::max(m, std::abs(gh(a, b)) / std::sqrt(std::abs(gh(a, a) * gh(b, b))));
    }
    out[n] = m;
  }
  return out;
}

/// Diagonal metric D and diffeomorphism phi with its Jacobian entered symbolically.
struct OracleSpec {
  std::array<Expr, 3> diagonal;
  std::array<Expr, 3> diffeo;
  std::array<Expr, 9> jacobian;  // row-major d phi^i / d y^a
  ProblemSpec base;              // domain, resolution, sigma and solver settings
};

/// Oracle fixture files:
///
///   [diffeo]
///   f1 = <expr>   f2 = <expr>   f3 = <expr>
///   f1_x = <expr> f1_y = <expr> f1_z = <expr>    (and likewise for f2, f3)
///   [diagonal]
///   d1 = <expr in x,y,z>   d2 = ...   d3 = ...
///
/// plus [domain], [sigma] and [solver] as in problem files. The diagonal entries are functions
/// of the target coordinates and are evaluated at phi(y).
inline OracleSpec parse_oracle(std::string_view text) {
  const auto s = detail::parse_sections(text);
  for (const auto& [name, entries] : s) {
    if (name != "diffeo" && name != "diagonal" && name != "domain" && name != "sigma" && name != "solver") {
      throw_input("unknown section [" + name + "]");
    }
  }
  if (!s.contains("diffeo")) throw_input("missing section [diffeo]");
  if (!s.contains("diagonal")) throw_input("missing section [diagonal]");
  OracleSpec o;
  static const std::array<std::string, 3> fn{"f1", "f2", "f3"};
  static const std::array<std::string, 3> dn{"d1", "d2", "d3"};
  static constexpr std::array<char, 3> ax{'x', 'y', 'z'};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < 3; ++i) {
    names.push_back(fn[i]);
    for (char a : ax) names.push_back(fn[i] + "_" + a);
  }
  detail::check_known_keys(s, "diffeo", {names.begin(), names.end()});
  detail::check_known_keys(s, "diagonal", {dn.begin(), dn.end()});
  auto need = [&](const std::string& section, const std::string& key) {
    const detail::Entry* e = detail::find_entry(s, section, key);
    if (e == nullptr) throw_input("missing " + key + " in [" + section + "]");
    return detail::parse_entry_expr(*e);
  };
  for (std::size_t i = 0; i < 3; ++i) {
    o.diffeo[i] = need("diffeo", fn[i]);
    o.diagonal[i] = need("diagonal", dn[i]);
    for (std::size_t a = 0; a < 3; ++a) o.jacobian[3 * i + a] = need("diffeo", fn[i] + "_" + ax[a]);
  }
  detail::parse_common(s, o.base);
  for (auto& m : o.base.metric) m = Expr::number(0.0);
  validate(o.base);
  return o;
}

inline OracleSpec load_oracle(const std::string& path) { return parse_oracle(read_text_file(path)); }

/// g_ab = sum_i D_i(phi) dphi^i/dy^a dphi^i/dy^b, simplified. Rejects a Jacobian that is
/// singular at any node of the declared grid.
inline ProblemSpec make_pullback_metric(const OracleSpec& o) {
  ProblemSpec spec = o.base;
  std::array<Expr, 3> d;
  for (std::size_t i = 0; i < 3; ++i) d[i] = simplify(substitute(o.diagonal[i], o.diffeo));
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b) {
      Expr sum = Expr::number(0.0);
      for (std::size_t i = 0; i < 3; ++i) {
        Expr term = Expr::multiply(Expr::multiply(d[i], o.jacobian[3 * i + static_cast<std::size_t>(a)]),
                                   o.jacobian[3 * i + static_cast<std::size_t>(b)]);
        sum = Expr::add(sum, term);
      }
      spec.metric[metric_plane(a, b)] = simplify(sum);
    }
  }
  const Grid grid = Grid::from_problem(spec);
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const Vec3 p = grid.point(n);
    Mat3 j;
    for (int e = 0; e < 9; ++e) j(e / 3, e % 3) = o.jacobian[static_cast<std::size_t>(e)].eval(p[0], p[1], p[2]);
    if (!std::isfinite(j.sum()) || std::abs(j.determinant()) <= 1e-12) {
      throw_input("singular diffeomorphism Jacobian at node " + format_node(grid, n));
    }
  }
  return spec;
}

/// 64-bit FNV-1a, used as a content fingerprint of the problem file.
inline std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct DiagonalizationReport {
  double offdiag_max{0.0};
  std::array<double, 3> frobenius{};  // per i
  double frobenius_max{0.0};
  std::array<double, 3> gauge_residual{};  // r12, r23, r13
  double gauge_residual_max{0.0};
  int iterations{0};
  double h{0.0};
  bool converged{false};
  std::string stop_reason{"none"};
  // tolerances the pass decision was made against
  double offdiag_tol{1e-3};
  double frobenius_tol{0.0};
  double gauge_tol{1e-3};
  // provenance
  std::string problem_hash{"none"};
  int resolution{0};
  double tol{0.0};
  int max_iter{0};
  bool pass{false};
  std::vector<std::string> failed;

  friend bool operator==(const DiagonalizationReport&, const DiagonalizationReport&) = default;
};

struct ReportInputs {
  const ScalarField* offdiag{nullptr};
  const std::array<ScalarField, 3>* frobenius{nullptr};
  std::array<double, 3> gauge_residual{};
  int iterations{0};
  bool converged{false};
  std::string stop_reason{"none"};
};

/// Maxima, tolerances and the pass decision. The Frobenius tolerance is integrability_factor * h.
inline DiagonalizationReport assemble_report(const ReportInputs& in, const ProblemSpec& spec, std::string_view problem_text) {
  DiagonalizationReport r;
  r.offdiag_max = in.offdiag != nullptr ? in.offdiag->max_abs() : 0.0;
  if (in.frobenius != nullptr) {
    for (std::size_t i = 0; i < 3; ++i) r.frobenius[i] = (*in.frobenius)[i].max_abs();
  }
  r.frobenius_max = *std::max_element(r.frobenius.begin(), r.frobenius.end());
  r.gauge_residual = in.gauge_residual;
  r.gauge_residual_max = *std::max_element(r.gauge_residual.begin(), r.gauge_residual.end());
  r.iterations = in.iterations;
  r.h = std::max({spec.spacing(0), spec.spacing(1), spec.spacing(2)});
  r.converged = in.converged;
  r.stop_reason = in.stop_reason;
  r.offdiag_tol = spec.solver.offdiag_tol;
  r.frobenius_tol = spec.solver.integrability_factor * r.h;
  r.gauge_tol = spec.solver.gauge_tol;
  char hash[32];
  std::snprintf(hash, sizeof hash, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a(problem_text)));
  r.problem_hash = hash;
  r.resolution = spec.resolution;
  r.tol = spec.solver.tol;
  r.max_iter = spec.solver.max_iter;
  if (!(r.offdiag_max < r.offdiag_tol)) r.failed.push_back("offdiag_max");
  if (!(r.frobenius_max < r.frobenius_tol)) r.failed.push_back("frobenius_max");
  if (!(r.gauge_residual_max < r.gauge_tol)) r.failed.push_back("gauge_residual_max");
  r.pass = r.failed.empty();
  return r;
}

namespace detail {

inline std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw_input("report: bad number for " + key + ": '" + v + "'");
  return out;
}

inline int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw_input("report: bad integer for " + key + ": '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw_input("report: bad boolean for " + key + ": '" + v + "'");
}

}  // namespace detail

/// One `key = value` per line, fixed key order, doubles in %.17e.
inline std::string serialize_report(const DiagonalizationReport& r) {
  using detail::full_precision;
  std::ostringstream out;
  auto line = [&](std::string_view k, const std::string& v) { out << k << " = " << v << "\n"; };
  line("offdiag_max", full_precision(r.offdiag_max));
  line("frobenius_max", full_precision(r.frobenius_max));
  line("frobenius_1", full_precision(r.frobenius[0]));
  line("frobenius_2", full_precision(r.frobenius[1]));
  line("frobenius_3", full_precision(r.frobenius[2]));
  line("gauge_residual_max", full_precision(r.gauge_residual_max));
  line("gauge_residual_12", full_precision(r.gauge_residual[0]));
  line("gauge_residual_23", full_precision(r.gauge_residual[1]));
  line("gauge_residual_13", full_precision(r.gauge_residual[2]));
  line("iterations", std::to_string(r.iterations));
  line("h", full_precision(r.h));
  line("converged", r.converged ? "true" : "false");
  line("stop_reason", r.stop_reason);
  line("offdiag_tol", full_precision(r.offdiag_tol));
  line("frobenius_tol", full_precision(r.frobenius_tol));
  line("gauge_tol", full_precision(r.gauge_tol));
  line("problem_hash", r.problem_hash);
  line("resolution", std::to_string(r.resolution));
  line("tol", full_precision(r.tol));
  line("max_iter", std::to_string(r.max_iter));
  std::string failed;
  for (const auto& f : r.failed) failed += (failed.empty() ? "" : ",") + f;
  line("failed", failed.empty() ? "none" : failed);
  line("pass", r.pass ? "true" : "false");
  return out.str();
}

inline DiagonalizationReport parse_report(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    if (detail::trim(raw).empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) throw_input("report: malformed line '" + raw + "'");
    kv[detail::trim(std::string_view(raw).substr(0, eq))] = detail::trim(std::string_view(raw).substr(eq + 1));
  }
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw_input("report: missing key " + k);
    return it->second;
  };
  using detail::parse_bool, detail::parse_double, detail::parse_int;
  DiagonalizationReport r;
  r.offdiag_max = parse_double("offdiag_max", get("offdiag_max"));
  r.frobenius_max = parse_double("frobenius_max", get("frobenius_max"));
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string k = "frobenius_" + std::to_string(i + 1);
    r.frobenius[i] = parse_double(k, get(k));
  }
  r.gauge_residual_max = parse_double("gauge_residual_max", get("gauge_residual_max"));
  static const std::array<std::string, 3> gk{"gauge_residual_12", "gauge_residual_23", "gauge_residual_13"};
  for (std::size_t i = 0; i < 3; ++i) r.gauge_residual[i] = parse_double(gk[i], get(gk[i]));
  r.iterations = parse_int("iterations", get("iterations"));
  r.h = parse_double("h", get("h"));
  r.converged = parse_bool("converged", get("converged"));
  r.stop_reason = get("stop_reason");
  r.offdiag_tol = parse_double("offdiag_tol", get("offdiag_tol"));
  r.frobenius_tol = parse_double("frobenius_tol", get("frobenius_tol"));
  r.gauge_tol = parse_double("gauge_tol", get("gauge_tol"));
  r.problem_hash = get("problem_hash");
  r.resolution = parse_int("resolution", get("resolution"));
  r.tol = parse_double("tol", get("tol"));
  r.max_iter = parse_int("max_iter", get("max_iter"));
  const std::string& failed = get("failed");
  if (failed != "none") {
    std::istringstream fs(failed);
    std::string item;
    while (std::getline(fs, item, ',')) r.failed.push_back(item);
  }
  r.pass = parse_bool("pass", get("pass"));
  return r;
}

}  // namespace lordiag
