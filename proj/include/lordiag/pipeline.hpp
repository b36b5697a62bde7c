#pragma once

// End-to-end runs behind the command-line subcommands.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lordiag/frobenius.hpp"
#include "lordiag/gauge.hpp"
#include "lordiag/verification.hpp"

namespace lordiag {

struct RunConfig {
  std::string input;
  std::string coords_csv;  // verify only
  std::optional<std::string> out_dir;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<int> resolution;
  bool dump_fields{false};
  std::optional<std::uint64_t> seed;
};

inline void apply_overrides(ProblemSpec& spec, const RunConfig& cfg) {
  if (cfg.tol) spec.solver.tol = *cfg.tol;
  if (cfg.max_iter) spec.solver.max_iter = *cfg.max_iter;
  if (cfg.resolution) spec.resolution = *cfg.resolution;
  validate(spec);
}

struct DiagonalizeResult {
  ProblemSpec spec;
  MetricField metric;
  CauchyResult solve;
  Coframe coframe;
  CoordinateSystem coords;
  ScalarField offdiag;
  std::array<ScalarField, 3> frobenius;
  DiagonalizationReport report;
};

/// load -> frame -> connection -> solve -> integrate -> verify -> report.
inline DiagonalizeResult diagonalize(const ProblemSpec& spec, std::string_view problem_text) {
  DiagonalizeResult r;
  r.spec = spec;
  const Grid grid = Grid::from_problem(spec);
  r.metric = sample_metric(grid, spec.metric);
  const BaseGeometry base = BaseGeometry::from_metric(r.metric);
  const CauchySurface sigma = CauchySurface::from_problem(spec, grid);
  const TransversalityReport tr = transversality_check(base.frame, sigma, spec.solver.transversality_threshold);
  if (!tr.pass()) throw_solver(tr.message(grid));
  r.solve = solve_cauchy(base, sigma, cauchy_options(spec.solver));
  r.coframe = gauge_apply(r.solve.gauge, base.coframe);
  const OrthonormalFrame frame = dual_frame(r.coframe);
  IntegrationOptions io;
  io.integrability_factor = spec.solver.integrability_factor;
  r.coords = integrate_coordinates(r.coframe, frame, io);
  r.offdiag = pullback_offdiagonal(r.metric, r.coords);
  r.frobenius = frobenius_residual(r.coframe);
  ReportInputs in;
  in.offdiag = &r.offdiag;
  in.frobenius = &r.frobenius;
  in.gauge_residual = r.solve.residual;
  in.iterations = r.solve.iterations;
  in.converged = r.solve.converged;
  in.stop_reason = r.solve.stop_reason;
  r.report = assemble_report(in, spec, problem_text);
  return r;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_input("cannot write " + path.string());
  out << content;
  if (!out) throw_input("cannot write " + path.string());
}

inline std::filesystem::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw_input("output directory " + dir + " is not writable");
  return dir;
}

template <typename Field, std::size_t N>
std::string csv_text(const Field& f, const std::array<std::string, N>& names) {
  std::ostringstream out;
  write_csv(out, f, names);
  return out.str();
}

/// Writes report.txt and convergence.csv, plus field dumps when requested.
inline void write_outputs(const DiagonalizeResult& r, const RunConfig& cfg) {
  if (!cfg.out_dir) return;
  const auto dir = prepare_out_dir(*cfg.out_dir);
  write_file(dir / "report.txt", serialize_report(r.report));
  write_file(dir / "convergence.csv", format_convergence_log(r.solve.log));
  if (!cfg.dump_fields) return;
  {
    std::ostringstream out;
    write_csv(out, r.coords);
    write_file(dir / "coordinates.csv", out.str());
  }
  write_file(dir / "offdiag.csv", csv_text(r.offdiag, std::array<std::string, 1>{"offdiag"}));
  const Grid& g = r.metric.grid();
  ComponentField<3, FormTag<3>> fr(g);
  ComponentField<3, VectorTag> gauge(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    for (std::size_t i = 0; i < 3; ++i) fr(i, n) = r.frobenius[i][n];
    const auto& p = r.solve.gauge.params(n);
    gauge(0, n) = p.theta;
    gauge(1, n) = p.phi1;
    gauge(2, n) = p.phi2;
  }
  write_file(dir / "frobenius.csv", csv_text(fr, std::array<std::string, 3>{"frob1", "frob2", "frob3"}));
  write_file(dir / "gauge.csv", csv_text(gauge, std::array<std::string, 3>{"theta", "phi1", "phi2"}));
  std::array<std::string, 9> names{"w11", "w12", "w13", "w21", "w22", "w23", "w31", "w32", "w33"};
  ComponentField<9, FormTag<1>> co(g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t a = 0; a < 3; ++a) co(3 * i + a, n) = r.coframe.w[i](a, n);
    }
  }
  write_file(dir / "coframe.csv", csv_text(co, names));
}

/// Coordinate CSV as written by write_csv(CoordinateSystem); the node set must match the grid.
inline CoordinateSystem read_coordinates_csv(const Grid& g, std::string_view text) {
  CoordinateSystem cs;
  for (std::size_t i = 0; i < 3; ++i) {
    cs.x[i] = ScalarField(g);
    cs.f[i] = ScalarField(g);
  }
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "i,j,k,x1,x2,x3,f1,f2,f3") throw_input("coordinates CSV: unexpected header");
  std::vector<unsigned char> seen(g.size(), 0);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(detail::trim(cell));
    if (cells.size() != 9) throw_input("coordinates CSV line " + std::to_string(lineno) + ": expected 9 columns");
    std::array<int, 3> c{};
    for (std::size_t a = 0; a < 3; ++a) {
      c[a] = detail::parse_int("node index", cells[a]);
      if (c[a] < 0 || c[a] >= g.n[a]) throw_input("coordinates CSV line " + std::to_string(lineno) + ": node index outside the grid");
    }
    const std::size_t n = g.index(c[0], c[1], c[2]);
    seen[n] = 1;
    for (std::size_t i = 0; i < 3; ++i) {
      cs.x[i][n] = detail::parse_double("x", cells[3 + i]);
      cs.f[i][n] = detail::parse_double("f", cells[6 + i]);
    }
  }
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (seen[n] == 0) throw_input("coordinates CSV: missing node " + format_node(g, n));
  }
  cs.base_node = g.center();
  return cs;
}

struct CheckResult {
  std::array<double, 3> frobenius{};
  double threshold{0.0};
  bool explicit_coframe{false};
  std::optional<std::array<double, 3>> gauge_residual;  // only for the metric's own frame
  std::optional<double> linearization_error;            // only with a seed
  bool pass() const {
    for (double f : frobenius) {
      if (!(f < threshold)) return false;
    }
    return true;
  }
};

/// Relative error between the finite-difference derivative of the residual along a random
/// gauge direction and the linearized operator, at the identity gauge.
inline double linearization_self_test(const BaseGeometry& base, std::uint64_t seed, double step = 1e-6) {
  const Grid& g = base.grid();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  AlgebraField beta = zero_algebra(g);
  for (auto& f : beta) {
    for (std::size_t n = 0; n < g.size(); ++n) f[n] = dist(rng);
  }
  GaugeField b(g);
  GaugeField moved(g);
  for (std::size_t n = 0; n < g.size(); ++n) moved.set_matrix(n, so21_exp(step * algebra_at(beta, n)));
  const auto r0 = nonlinear_residual(b, base);
  const auto r1 = nonlinear_residual(moved, base);
  const auto lin = apply_linearization(b, base, beta);
  double num = 0.0, den = 0.0;
  const std::array<const ScalarField*, 3> a0{&r0.r12, &r0.r23, &r0.r13}, a1{&r1.r12, &r1.r23, &r1.r13},
      al{&lin.r12, &lin.r23, &lin.r13};
  for (std::size_t q = 0; q < 3; ++q) {
    for (std::size_t n = 0; n < g.size(); ++n) {
      const double fd = ((*a1[q])[n] - (*a0[q])[n]) / step;
      num = std::max(num, std::abs(fd - (*al[q])[n]));
      den = std::max(den, std::abs((*al[q])[n]));
    }
  }
  return num / den;
}

/// Frobenius maxima of the explicit coframe if the file has one, else of the metric's
/// Gram-Schmidt coframe (together with the gauge residuals at b = identity).
inline CheckResult check(const ProblemSpec& spec, std::optional<std::uint64_t> seed = std::nullopt) {
  CheckResult out;
  const Grid grid = Grid::from_problem(spec);
  out.threshold = spec.solver.integrability_factor * std::max({grid.spacing(0), grid.spacing(1), grid.spacing(2)});
  Coframe co;
  std::optional<BaseGeometry> base;
  if (spec.coframe) {
    out.explicit_coframe = true;
    co = Coframe{{OneFormField(grid), OneFormField(grid), OneFormField(grid)}};
    for (std::size_t i = 0; i < 3; ++i) {
      sample_into(co.w[i], std::span<const Expr>(spec.coframe->data() + 3 * i, 3));
    }
    for (std::size_t n = 0; n < grid.size(); ++n) {
      if (std::abs(co.matrix(n).determinant()) <= 1e-12) throw_input("malformed coframe: degenerate at node " + format_node(grid, n));
    }
  } else {
    base.emplace(BaseGeometry::from_metric(sample_metric(grid, spec.metric)));
    co = base->coframe;
    out.gauge_residual = nonlinear_residual(GaugeField(grid), *base).maxima();
  }
  const auto fr = frobenius_residual(co);
  for (std::size_t i = 0; i < 3; ++i) out.frobenius[i] = fr[i].max_abs();
  if (seed) {
    if (!base) base.emplace(BaseGeometry::from_metric(sample_metric(grid, spec.metric)));
    out.linearization_error = linearization_self_test(*base, *seed);
  }
  return out;
}

inline std::string format_check(const CheckResult& c) {
  using detail::full_precision;
  std::ostringstream out;
  out << "source = " << (c.explicit_coframe ? "coframe" : "metric") << "\n";
  for (std::size_t i = 0; i < 3; ++i) out << "frobenius_" << i + 1 << " = " << full_precision(c.frobenius[i]) << "\n";
  out << "threshold = " << full_precision(c.threshold) << "\n";
  if (c.gauge_residual) {
    out << "gauge_residual_12 = " << full_precision((*c.gauge_residual)[0]) << "\n";
    out << "gauge_residual_23 = " << full_precision((*c.gauge_residual)[1]) << "\n";
    out << "gauge_residual_13 = " << full_precision((*c.gauge_residual)[2]) << "\n";
  }
  if (c.linearization_error) out << "linearization_error = " << full_precision(*c.linearization_error) << "\n";
  out << "pass = " << (c.pass() ? "true" : "false") << "\n";
  return out.str();
}

struct VerifyResult {
  double offdiag_max{0.0};
  double tol{0.0};
  bool pass() const { return offdiag_max < tol; }
};

/// Off-diagonal content of the problem's metric in previously dumped coordinates.
inline VerifyResult verify(const ProblemSpec& spec, std::string_view coords_csv) {
  const Grid grid = Grid::from_problem(spec);
  const MetricField g = sample_metric(grid, spec.metric);
  const CoordinateSystem cs = read_coordinates_csv(grid, coords_csv);
  return {pullback_offdiagonal(g, cs).max_abs(), spec.solver.offdiag_tol};
}

}  // namespace lordiag
