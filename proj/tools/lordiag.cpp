// lordiag: diagonalize 3D Lorentzian metrics by an orthonormal gauge rotation.
//
// Exit codes: 0 pass, 2 input error, 3 solver failure, 4 verification failure.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lordiag/pipeline.hpp"

namespace {

using namespace lordiag;

constexpr int exit_pass = 0;
constexpr int exit_input = 2;
constexpr int exit_solver = 3;
constexpr int exit_verification = 4;

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::input: return exit_input;
    case ErrorKind::solver: return exit_solver;
    case ErrorKind::verification: return exit_verification;
  }
  return exit_input;
}

ProblemSpec load_with_overrides(const RunConfig& cfg, std::string& text) {
  text = read_text_file(cfg.input);
  ProblemSpec spec = parse_problem(text);
  apply_overrides(spec, cfg);
  return spec;
}

int run_diagonalize(const RunConfig& cfg) {
  std::string text;
  const ProblemSpec spec = load_with_overrides(cfg, text);
  const DiagonalizeResult r = diagonalize(spec, text);
  write_outputs(r, cfg);
  std::cout << serialize_report(r.report);
  if (!r.report.pass) {
    std::string failed;
    for (const auto& f : r.report.failed) failed += " " + f;
    std::cerr << "lordiag: verification failed:" << failed << "\n";
    return exit_verification;
  }
  return exit_pass;
}

int run_check(const RunConfig& cfg) {
  std::string text;
  const ProblemSpec spec = load_with_overrides(cfg, text);
  const CheckResult c = check(spec, cfg.seed);
  const std::string summary = format_check(c);
  std::cout << summary;
  if (cfg.out_dir) write_file(prepare_out_dir(*cfg.out_dir) / "check.txt", summary);
  return c.pass() ? exit_pass : exit_verification;
}

int run_oracle(const RunConfig& cfg) {
  OracleSpec o = load_oracle(cfg.input);
  apply_overrides(o.base, cfg);
  const ProblemSpec spec = make_pullback_metric(o);
  sample_metric(Grid::from_problem(spec), spec.metric);
  const std::string text = format_problem(spec);
  if (cfg.out_dir) {
    const auto path = prepare_out_dir(*cfg.out_dir) / (std::filesystem::path(cfg.input).stem().string() + ".prob");
    write_file(path, text);
    std::cerr << "lordiag: wrote " << path.string() << "\n";
  } else {
    std::cout << text;
  }
  return exit_pass;
}

int run_verify(const RunConfig& cfg) {
  std::string text;
  const ProblemSpec spec = load_with_overrides(cfg, text);
  const VerifyResult v = verify(spec, read_text_file(cfg.coords_csv));
  std::cout << "offdiag_max = " << detail::full_precision(v.offdiag_max) << "\n"
            << "offdiag_tol = " << detail::full_precision(v.tol) << "\n"
            << "pass = " << (v.pass() ? "true" : "false") << "\n";
  return v.pass() ? exit_pass : exit_verification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Orthogonal coordinates for 3D Lorentzian metrics"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--tol", cfg.tol, "Picard residual tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--max-iter", cfg.max_iter, "Picard iteration cap")->check(CLI::Range(1, 100000));
    sub->add_option("--resolution", cfg.resolution, "nodes per axis (odd, >= 9)")->check(CLI::Range(9, 1025));
    sub->add_option("--out", cfg.out_dir, "output directory");
    sub->add_flag("--dump-fields", cfg.dump_fields, "write per-node CSV dumps to the output directory");
    sub->add_option("--seed", cfg.seed, "seed for randomized self-tests");
  };

  auto* diag = app.add_subcommand("diagonalize", "solve for the gauge, integrate coordinates, verify");
  diag->add_option("problem", cfg.input, "problem file")->required();
  add_common(diag);

  auto* chk = app.add_subcommand("check", "Frobenius residuals without solving");
  chk->add_option("problem", cfg.input, "problem file")->required();
  add_common(chk);

  auto* orc = app.add_subcommand("oracle", "write the pullback metric of an oracle fixture as a problem file");
  orc->add_option("fixture", cfg.input, "oracle fixture file")->required();
  add_common(orc);

  auto* ver = app.add_subcommand("verify", "re-run verification on dumped coordinates");
  ver->add_option("problem", cfg.input, "problem file")->required();
  ver->add_option("coordinates", cfg.coords_csv, "coordinates.csv from --dump-fields")->required();
  add_common(ver);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_pass : exit_input;
  }

  try {
    if (diag->parsed()) return run_diagonalize(cfg);
    if (chk->parsed()) return run_check(cfg);
    if (orc->parsed()) return run_oracle(cfg);
    return run_verify(cfg);
  } catch (const Error& e) {
    std::cerr << "lordiag: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "lordiag: " << e.what() << "\n";
    return exit_input;
  }
}
