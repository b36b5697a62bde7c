#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "lordiag/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

const std::string problems = LORDIAG_PROBLEMS;

struct CliRun {
  int code{-1};
  std::string output;
};

CliRun cli(const std::string& args, const std::string& env = "") {
  CliRun r;
  const std::string cmd = env + " \"" + std::string(LORDIAG_CLI) + "\" " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[512];
  while (std::fgets(buf, sizeof buf, p) != nullptr) r.output += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lordiag_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, DiagonalizePassesAndWritesOutputs) {
  const fs::path out = scratch("diag");
  const CliRun r = cli("diagonalize " + problems + "/warped.prob --resolution 17 --out " + out.string() + " --dump-fields");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("pass = true"), std::string::npos);
  for (const char* f : {"report.txt", "convergence.csv", "coordinates.csv", "offdiag.csv", "frobenius.csv", "gauge.csv", "coframe.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const auto report = lordiag::parse_report(slurp(out / "report.txt"));
  EXPECT_EQ(report.resolution, 17);
  EXPECT_TRUE(report.pass);

  const CliRun v = cli("verify " + problems + "/warped.prob " + (out / "coordinates.csv").string() + " --resolution 17");
  EXPECT_EQ(v.code, 0) << v.output;
  EXPECT_NE(v.output.find("pass = true"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("diagonalize /nonexistent/file.prob").code, 2);
  EXPECT_EQ(cli("diagonalize " + problems + "/minkowski.prob --resolution 16").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  const CliRun tangent = cli("diagonalize " + problems + "/minkowski_tangent.prob --resolution 17");
  EXPECT_EQ(tangent.code, 3);
  EXPECT_NE(tangent.output.find("transversality"), std::string::npos);
  EXPECT_EQ(cli("check " + problems + "/contact.prob").code, 4);
}

TEST(Cli, CheckReportsFrobeniusAndSelfTest) {
  const CliRun ok = cli("check " + problems + "/warped_coframe.prob --seed 5");
  EXPECT_EQ(ok.code, 0) << ok.output;
  EXPECT_NE(ok.output.find("source = coframe"), std::string::npos);
  EXPECT_NE(ok.output.find("linearization_error"), std::string::npos);
  const CliRun m = cli("check " + problems + "/warped.prob");
  EXPECT_EQ(m.code, 0);
  EXPECT_NE(m.output.find("gauge_residual_12"), std::string::npos);
}

TEST(Cli, OracleWritesLoadableProblem) {
  const fs::path out = scratch("oracle");
  const CliRun r = cli("oracle " + problems + "/shear.oracle --out " + out.string());
  EXPECT_EQ(r.code, 0) << r.output;
  const auto spec = lordiag::load_problem((out / "shear.prob").string());
  EXPECT_NEAR(spec.metric[1].eval(0, 0, 0), 0.1, 1e-15);
  const CliRun d = cli("diagonalize " + (out / "shear.prob").string());
  EXPECT_EQ(d.code, 0) << d.output;
}

TEST(Cli, ThreadCountDoesNotChangeResults) {
  const std::string args = "diagonalize " + problems + "/warped.prob --resolution 17 --max-iter 3 --tol 1e-12";
  const CliRun one = cli(args, "LORDIAG_THREADS=1");
  const CliRun two = cli(args, "LORDIAG_THREADS=2");
  EXPECT_EQ(one.code, two.code);
  EXPECT_EQ(one.output, two.output);
}
