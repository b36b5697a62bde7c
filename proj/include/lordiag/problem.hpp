#pragma once

// Plain-text problem files:
//
//   [metric]
//   g11 = <expr>   g12 = <expr>   g13 = <expr>
//   g22 = <expr>   g23 = <expr>   g33 = <expr>
//   [domain]
//   x = <lo> <hi>   y = <lo> <hi>   z = <lo> <hi>
//   resolution = <odd int>
//   [sigma]
//   normal = <a> <b> <c>
//   offset = <s0>
//   [solver]
//   tol = <float>      # default 1e-8
//   max_iter = <int>   # default 200
//
// Several `key = value` pairs may share a line. An optional [coframe] section with keys
// w11..w33 (component of w^i on dy^a) supplies an explicit coframe for `check`.

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lordiag/error.hpp"
#include "lordiag/expr.hpp"

namespace lordiag {

struct Interval {
  double lo{0.0};
  double hi{1.0};
  double length() const { return hi - lo; }
};

/// Initial surface {a x + b y + c z = offset}.
struct SigmaSpec {
  std::array<double, 3> normal{1.0, 1.0, 1.0};
  std::optional<double> offset;  // unset: plane through the domain center
};

struct SolverSettings {
  double tol{1e-8};
  int max_iter{200};
  double transversality_threshold{0.1};
  double integrability_factor{10.0};  // integrability threshold = factor * h
  double offdiag_tol{1e-3};
  double gauge_tol{1e-3};
  int inner_iterations{6};
};

/// Metric components in the order g11, g12, g13, g22, g23, g33.
inline constexpr std::array<std::string_view, 6> metric_keys{"g11", "g12", "g13", "g22", "g23", "g33"};

struct ProblemSpec {
  std::array<Expr, 6> metric;
  std::array<Interval, 3> domain{};
  int resolution{33};
  SigmaSpec sigma;
  SolverSettings solver;
  std::optional<std::array<Expr, 9>> coframe;  // row-major: w^i_a

  double spacing(int axis) const { return domain[static_cast<std::size_t>(axis)].length() / (resolution - 1); }
  double sigma_offset() const {
    if (sigma.offset) return *sigma.offset;
    double s = 0.0;
    for (std::size_t a = 0; a < 3; ++a) s += sigma.normal[a] * 0.5 * (domain[a].lo + domain[a].hi);
    return s;
  }
};

namespace detail {

struct Entry {
  std::string key;
  std::string value;
  int line{0};
};

using Sections = std::map<std::string, std::vector<Entry>>;

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Splits "k1 = v1   k2 = v2" at '=' signs; the last word before each '=' is its key.
inline std::vector<Entry> split_assignments(std::string_view line, int lineno) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t p = line.find('='); p != std::string_view::npos; p = line.find('=', start)) {
    parts.push_back(line.substr(start, p - start));
    start = p + 1;
  }
  parts.push_back(line.substr(start));
  if (parts.size() < 2) throw_input("line " + std::to_string(lineno) + ": expected key = value");

  std::vector<Entry> out;
  std::string key = trim(parts.front());
  for (std::size_t i = 1; i < parts.size(); ++i) {
    std::string chunk = trim(parts[i]);
    std::string value = chunk;
    std::string next_key;
    if (i + 1 < parts.size()) {
      const auto ws = chunk.find_last_of(" \t");
      if (ws == std::string::npos) throw_input("line " + std::to_string(lineno) + ": missing value before '='");
      value = trim(std::string_view(chunk).substr(0, ws));
      next_key = trim(std::string_view(chunk).substr(ws + 1));
    }
    if (key.empty() || key.find_first_of(" \t") != std::string::npos) {
      throw_input("line " + std::to_string(lineno) + ": malformed key '" + key + "'");
    }
    out.push_back({key, value, lineno});
    key = next_key;
  }
  return out;
}

inline Sections parse_sections(std::string_view text) {
  Sections sections;
  std::string current;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw_input("line " + std::to_string(lineno) + ": malformed section header");
      current = trim(std::string_view(line).substr(1, line.size() - 2));
      sections[current];
      continue;
    }
    if (current.empty()) throw_input("line " + std::to_string(lineno) + ": assignment outside any section");
    for (auto& e : split_assignments(line, lineno)) sections[current].push_back(std::move(e));
  }
  return sections;
}

inline const Entry* find_entry(const Sections& s, const std::string& section, std::string_view key) {
  auto it = s.find(section);
  if (it == s.end()) return nullptr;
  const Entry* found = nullptr;
  for (const auto& e : it->second) {
    if (e.key == key) {
      if (found != nullptr) throw_input("line " + std::to_string(e.line) + ": duplicate key " + e.key);
      found = &e;
    }
  }
  return found;
}

inline std::vector<double> parse_numbers(const Entry& e, std::size_t count) {
  std::istringstream in(e.value);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      // Numeric fields accept constant expressions such as "pi/2".
      out.push_back(parse_expr(tok).eval(0, 0, 0));
    } catch (const Error&) {
      throw_input("line " + std::to_string(e.line) + ": bad number '" + tok + "' for " + e.key);
    }
  }
  if (out.size() != count) {
    throw_input("line " + std::to_string(e.line) + ": " + e.key + " expects " + std::to_string(count) + " value(s)");
  }
  return out;
}

inline Expr parse_entry_expr(const Entry& e) {
  try {
    return parse_expr(e.value);
  } catch (const ParseError& err) {
    throw_input("line " + std::to_string(e.line) + " (" + e.key + "): " + err.what());
  }
}

inline void check_known_keys(const Sections& s, const std::string& section, const std::vector<std::string_view>& known) {
  auto it = s.find(section);
  if (it == s.end()) return;
  for (const auto& e : it->second) {
    bool ok = false;
    for (auto k : known) ok = ok || e.key == k;
    if (!ok) throw_input("line " + std::to_string(e.line) + ": unknown key '" + e.key + "' in [" + section + "]");
  }
}

// [domain], [sigma] and [solver] are shared with oracle fixture files.
inline void parse_common(const Sections& s, ProblemSpec& spec) {
  check_known_keys(s, "domain", {"x", "y", "z", "resolution"});
  if (!s.contains("domain")) throw_input("missing section [domain]");
  static constexpr std::array<std::string_view, 3> axes{"x", "y", "z"};
  for (std::size_t a = 0; a < 3; ++a) {
    const Entry* e = find_entry(s, "domain", axes[a]);
    if (e == nullptr) throw_input("missing domain interval " + std::string(axes[a]));
    auto v = parse_numbers(*e, 2);
    spec.domain[a] = {v[0], v[1]};
    if (!(spec.domain[a].length() > 0.0)) throw_input("domain interval " + std::string(axes[a]) + " must have positive length");
  }
  const Entry* res = find_entry(s, "domain", "resolution");
  if (res == nullptr) throw_input("missing domain resolution");
  const double r = parse_numbers(*res, 1)[0];
  if (r != std::floor(r)) throw_input("resolution must be an integer");
  spec.resolution = static_cast<int>(r);

  check_known_keys(s, "sigma", {"normal", "offset"});
  if (const Entry* e = find_entry(s, "sigma", "normal")) {
    auto v = parse_numbers(*e, 3);
    spec.sigma.normal = {v[0], v[1], v[2]};
  }
  if (const Entry* e = find_entry(s, "sigma", "offset")) spec.sigma.offset = parse_numbers(*e, 1)[0];

  check_known_keys(s, "solver", {"tol", "max_iter", "transversality", "integrability_factor", "offdiag_tol", "gauge_tol",
                                 "inner_iter"});
  if (const Entry* e = find_entry(s, "solver", "tol")) spec.solver.tol = parse_numbers(*e, 1)[0];
  if (const Entry* e = find_entry(s, "solver", "max_iter")) spec.solver.max_iter = static_cast<int>(parse_numbers(*e, 1)[0]);
  if (const Entry* e = find_entry(s, "solver", "transversality")) spec.solver.transversality_threshold = parse_numbers(*e, 1)[0];
  if (const Entry* e = find_entry(s, "solver", "integrability_factor")) spec.solver.integrability_factor = parse_numbers(*e, 1)[0];
  if (const Entry* e = find_entry(s, "solver", "offdiag_tol")) spec.solver.offdiag_tol = parse_numbers(*e, 1)[0];
  if (const Entry* e = find_entry(s, "solver", "gauge_tol")) spec.solver.gauge_tol = parse_numbers(*e, 1)[0];
  if (const Entry* e = find_entry(s, "solver", "inner_iter")) spec.solver.inner_iterations = static_cast<int>(parse_numbers(*e, 1)[0]);
}

inline std::string number_text(double v) { return format_number(v); }

}  // namespace detail

/// Checks the invariants every consumer relies on. Throws Error(input).
inline void validate(const ProblemSpec& spec) {
  if (spec.resolution < 9) throw_input("resolution must be >= 9");
  if (spec.resolution % 2 == 0) throw_input("resolution must be odd (got " + std::to_string(spec.resolution) + ")");
  for (const auto& iv : spec.domain) {
    if (!(iv.length() > 0.0)) throw_input("domain intervals must have positive length");
  }
  const auto& n = spec.sigma.normal;
  if (n[0] == 0.0 && n[1] == 0.0 && n[2] == 0.0) throw_input("degenerate sigma: normal (0,0,0)");
  if (!(spec.solver.tol > 0.0)) throw_input("tol must be positive");
  if (spec.solver.max_iter < 1 || spec.solver.max_iter > 100000) throw_input("max_iter out of range [1, 100000]");
  if (spec.solver.inner_iterations < 1) throw_input("inner_iter must be >= 1");
}

inline ProblemSpec parse_problem(std::string_view text) {
  const auto sections = detail::parse_sections(text);
  ProblemSpec spec;
  if (!sections.contains("metric")) throw_input("missing section [metric]");
  detail::check_known_keys(sections, "metric", {metric_keys.begin(), metric_keys.end()});
  for (std::size_t c = 0; c < 6; ++c) {
    const detail::Entry* e = detail::find_entry(sections, "metric", metric_keys[c]);
    if (e == nullptr) throw_input("missing component " + std::string(metric_keys[c]));
    spec.metric[c] = detail::parse_entry_expr(*e);
  }
  detail::parse_common(sections, spec);
  if (sections.contains("coframe")) {
    std::array<Expr, 9> w;
    std::vector<std::string_view> keys;
    static const std::array<std::string, 9> names{"w11", "w12", "w13", "w21", "w22", "w23", "w31", "w32", "w33"};
    for (const auto& n : names) keys.push_back(n);
    detail::check_known_keys(sections, "coframe", keys);
    for (std::size_t c = 0; c < 9; ++c) {
      const detail::Entry* e = detail::find_entry(sections, "coframe", names[c]);
      if (e == nullptr) throw_input("malformed coframe: missing " + names[c]);
      w[c] = detail::parse_entry_expr(*e);
    }
    spec.coframe = w;
  }
  for (const auto& [name, entries] : sections) {
    if (name != "metric" && name != "domain" && name != "sigma" && name != "solver" && name != "coframe") {
      throw_input("unknown section [" + name + "]");
    }
  }
  validate(spec);
  return spec;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_input("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ProblemSpec load_problem(const std::string& path) { return parse_problem(read_text_file(path)); }

/// Writes `spec` back in the documented file format.
inline std::string format_problem(const ProblemSpec& spec) {
  std::ostringstream out;
  out << "[metric]\n";
  for (std::size_t c = 0; c < 6; ++c) out << metric_keys[c] << " = " << print_expr(spec.metric[c]) << "\n";
  if (spec.coframe) {
    out << "[coframe]\n";
    for (std::size_t c = 0; c < 9; ++c) out << "w" << (c / 3 + 1) << (c % 3 + 1) << " = " << print_expr((*spec.coframe)[c]) << "\n";
  }
  out << "[domain]\n";
  static constexpr std::array<char, 3> axes{'x', 'y', 'z'};
  for (std::size_t a = 0; a < 3; ++a) {
    out << axes[a] << " = " << detail::number_text(spec.domain[a].lo) << " " << detail::number_text(spec.domain[a].hi) << "\n";
  }
  out << "resolution = " << spec.resolution << "\n";
  out << "[sigma]\n";
  out << "normal = " << detail::number_text(spec.sigma.normal[0]) << " " << detail::number_text(spec.sigma.normal[1]) << " "
      << detail::number_text(spec.sigma.normal[2]) << "\n";
  out << "offset = " << detail::number_text(spec.sigma_offset()) << "\n";
  out << "[solver]\n";
  out << "tol = " << detail::number_text(spec.solver.tol) << "\n";
  out << "max_iter = " << spec.solver.max_iter << "\n";
  const SolverSettings defaults;
  if (spec.solver.transversality_threshold != defaults.transversality_threshold) {
    out << "transversality = " << detail::number_text(spec.solver.transversality_threshold) << "\n";
  }
  if (spec.solver.integrability_factor != defaults.integrability_factor) {
    out << "integrability_factor = " << detail::number_text(spec.solver.integrability_factor) << "\n";
  }
  if (spec.solver.offdiag_tol != defaults.offdiag_tol) out << "offdiag_tol = " << detail::number_text(spec.solver.offdiag_tol) << "\n";
  if (spec.solver.gauge_tol != defaults.gauge_tol) out << "gauge_tol = " << detail::number_text(spec.solver.gauge_tol) << "\n";
  if (spec.solver.inner_iterations != defaults.inner_iterations) out << "inner_iter = " << spec.solver.inner_iterations << "\n";
  return out.str();
}

}  // namespace lordiag
