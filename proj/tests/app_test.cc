#include "momentcert/app.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <sys/wait.h>

namespace momentcert::app {
namespace {

namespace fs = std::filesystem;

std::string spec_path(const std::string& name) { return std::string(MOMENTCERT_SPEC_DIR) + "/" + name; }

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "momentcert_app_test";
  fs::create_directories(dir);
  return dir;
}

std::string write_scratch(const std::string& name, const std::string& text) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p) << text;
  return p.string();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MOMENTCERT_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const json& certificate(const json& report, const std::string& name) {
  for (const auto& c : report.at("certificates")) {
    if (c.at("statement") == name) return c;
  }
  throw std::runtime_error("certificate not in report: " + name);
}

constexpr const char* kParallelPair = R"({
  "basis": {"kind": "power1d", "p": 2},
  "K": {"lower": [-1], "upper": [1]},
  "coefficients": {"c": [2, 1], "Q": [[2, 1]]},
  "horizon": {"x0": [0], "T": 1},
  "run": {"certificates": ["p2"]}
})";

constexpr const char* kBlowUp = R"({
  "basis": {"kind": "power1d", "p": 2},
  "K": {"lower": [-1], "upper": [1]},
  "coefficients": {"c": [1, 1], "Q": [[2, 1]]},
  "dynamics": {"Q0": [{"terms": [{"coef": 1, "powers": [3]}]}]},
  "horizon": {"x0": [2], "T": 1},
  "run": {"solver": {"steps": 10, "starts": 2}}
})";

// ---------------------------------------------------------------------------
// Problem file parsing

TEST(ProblemFile, PolynomialCoefficientsEvaluate) {
  const auto pf = load_problem(spec_path("chord_forcing.json"));
  EXPECT_FALSE(pf.constant_coefficients());
  Vector x(1);
  x << 0.5;
  EXPECT_DOUBLE_EQ(pf.spec.c(x)[1], 10 * 0.25 - 1);
  EXPECT_DOUBLE_EQ(pf.spec.Q(x)(0, 0), 1.0);
}

TEST(ProblemFile, ConstantCoefficientsDetected) {
  EXPECT_TRUE(load_problem(spec_path("example1.json")).constant_coefficients());
}

TEST(ProblemFile, MalformedJsonReportsLineAndColumn) {
  try {
    parse_problem_text("{\n  \"basis\": {\"kind\": \"power1d\",,\n}", "bad.json");
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json:2:"), std::string::npos) << e.what();
  }
}

TEST(ProblemFile, FieldErrorsCarryPointer) {
  auto message = [](const std::string& text) {
    try {
      parse_problem_text(text);
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  json doc = json::parse(kParallelPair);
  doc["coefficients"]["Q"][0][1] = "one";
  EXPECT_NE(message(doc.dump()).find("/coefficients/Q/0/1"), std::string::npos);
  doc = json::parse(kParallelPair);
  doc.erase("K");
  EXPECT_NE(message(doc.dump()).find("/K: missing"), std::string::npos);
  doc = json::parse(kParallelPair);
  doc["coefficients"]["c"] = {1, 2, 3};
  EXPECT_NE(message(doc.dump()).find("/coefficients/c"), std::string::npos);
  doc = json::parse(kParallelPair);
  doc["coefficients"]["c"][0] = {{"terms", {{{"coef", 1}, {"powers", {4}}}}}};
  EXPECT_NE(message(doc.dump()).find("limited to 3"), std::string::npos);
  doc = json::parse(kParallelPair);
  doc["run"]["certificates"] = {"p9"};
  EXPECT_NE(message(doc.dump()).find("unknown certificate"), std::string::npos);
}

TEST(ProblemFile, InapplicableRequestIsInputError) {
  json doc = json::parse(kParallelPair);
  doc["run"]["certificates"] = {"theorem_sec"};
  const auto p = write_scratch("inapplicable.json", doc.dump());
  EXPECT_EQ(run_command("certify", p, {}).exit_code, kExitInput);
}

// ---------------------------------------------------------------------------
// Command results

TEST(Certify, ExampleOnePassesBothRoutes) {
  const auto r = run_command("certify", spec_path("example1.json"), {});
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(certificate(r.report, "p2")["verdict"], "pass");
  EXPECT_EQ(certificate(r.report, "ex1")["verdict"], "pass");
}

TEST(Certify, BadExampleReportsWitness) {
  const auto r = run_command("certify", spec_path("example1_bad.json"), {});
  EXPECT_EQ(r.exit_code, kExitFail);
  const auto& ex1 = certificate(r.report, "ex1");
  EXPECT_EQ(ex1["verdict"], "fail");
  EXPECT_DOUBLE_EQ(ex1["witness"]["values"]["q(q-c)"][0].get<double>(), -2.0);
}

TEST(Certify, CorollaryThreePasses) {
  const auto r = run_command("certify", spec_path("corollary3.json"), {});
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(certificate(r.report, "theorem_sec")["verdict"], "pass");
  EXPECT_EQ(certificate(r.report, "ncq_subset")["verdict"], "pass");
}

TEST(Certify, MonotoneLemmaIsInformationalWithVacuityNote) {
  const auto r = run_command("certify", spec_path("example2.json"), {});
  EXPECT_EQ(r.exit_code, kExitOk);
  const auto& mono = certificate(r.report, "p3_monotone");
  EXPECT_FALSE(mono["requested"].get<bool>());
  EXPECT_EQ(mono["notes"].size(), 1u);
}

TEST(Certify, EveryVerdictStringIsKnown) {
  for (const char* f : {"example1.json", "example1_bad.json", "example2.json", "example3.json", "chord_forcing.json"}) {
    const auto r = run_command("certify", spec_path(f), {});
    for (const auto& c : r.report["certificates"]) {
      const auto v = c["verdict"].get<std::string>();
      EXPECT_TRUE(v == "pass" || v == "fail" || v == "boundary" || v == "error") << f << " " << v;
    }
  }
}

TEST(Certify, ReportEchoesOverrides) {
  CommandOptions opt;
  opt.grid = 51;
  opt.seed = 7;
  const auto r = run_command("certify", spec_path("example1.json"), opt);
  EXPECT_EQ(r.report["reproducibility"]["cert_u_grid"], 51);
  EXPECT_EQ(r.report["reproducibility"]["seed"], 7);
}

TEST(Solve, ExampleOneControlsNearMinusHalf) {
  CommandOptions opt;
  opt.csv_path = (scratch_dir() / "example1.csv").string();
  const auto r = run_command("solve", spec_path("example1.json"), opt);
  EXPECT_EQ(r.exit_code, kExitOk);
  for (const auto& u : r.report["extraction"]["controls"]) EXPECT_NEAR(u[0].get<double>(), -0.5, 1e-3);
  std::ifstream csv(*opt.csv_path);
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "t,x1,m1,m2,dist_to_L,u");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  EXPECT_EQ(rows, 21);
}

TEST(Solve, ChordForcingExtractionFails) {
  const auto r = run_command("solve", spec_path("chord_forcing.json"), {});
  EXPECT_EQ(r.exit_code, kExitExtraction);
  EXPECT_FALSE(r.report["extraction"]["success"].get<bool>());
  EXPECT_EQ(r.report["extraction"]["distances"].size(), 10u);
  EXPECT_GT(r.report["extraction"]["offending_steps"].size(), 0u);
}

TEST(Solve, DivergenceMapsToExitFive) {
  EXPECT_EQ(run_command("solve", write_scratch("blowup.json", kBlowUp), {}).exit_code, kExitDivergence);
}

TEST(Compare, ExampleOneGapAndProbe) {
  const auto r = run_command("compare", spec_path("example1.json"), {});
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_LE(std::abs(r.report["dp"]["gap"].get<double>()), 1e-2);
  EXPECT_EQ(r.report["probe"]["verdict"], "convex");
}

TEST(Compare, ExampleTwoGap) {
  const auto r = run_command("compare", spec_path("example2.json"), {});
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_LE(std::abs(r.report["dp"]["gap"].get<double>()), 1e-2);
  EXPECT_TRUE(r.report["probe"].contains("verdict"));
}

TEST(Compare, CorollaryThreeSkipsDp) {
  const auto r = run_command("compare", spec_path("corollary3.json"), {});
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(r.report["dp"]["status"], "skipped");
  EXPECT_EQ(r.report["relaxation_inequality"]["violations"], 0);
  EXPECT_EQ(r.report["relaxation_inequality"]["trials"], 100);
}

TEST(Determinism, ReportsMatchApartFromTiming) {
  for (const char* cmd : {"certify", "solve", "compare"}) {
    CommandOptions one, two;
    two.threads = 2;
    const auto a = run_command(cmd, spec_path("example1.json"), one);
    const auto b = run_command(cmd, spec_path("example1.json"), one);
    const auto c = run_command(cmd, spec_path("example1.json"), two);
    EXPECT_EQ(stable_dump(a.report), stable_dump(b.report)) << cmd;
    EXPECT_EQ(stable_dump(a.report), stable_dump(c.report)) << cmd;
  }
}

// ---------------------------------------------------------------------------
// Exit-code contract through the executable

TEST(ExitCodes, Certify) {
  EXPECT_EQ(run_cli("certify " + spec_path("example1.json")), 0);
  EXPECT_EQ(run_cli("certify " + spec_path("example1_bad.json")), 1);
  EXPECT_EQ(run_cli("certify " + write_scratch("parallel.json", kParallelPair)), 2);
  EXPECT_EQ(run_cli("certify " + spec_path("zero_horizon.json")), 3);
  EXPECT_EQ(run_cli("certify " + write_scratch("garbage.json", "{ not json")), 3);
  EXPECT_EQ(run_cli("certify /nonexistent/problem.json"), 3);
}

TEST(ExitCodes, Solve) {
  const auto report = (scratch_dir() / "solve_report.json").string();
  EXPECT_EQ(run_cli("solve " + spec_path("example1.json") + " --report " + report), 0);
  EXPECT_TRUE(json::parse(std::ifstream(report)).contains("trajectory"));
  EXPECT_EQ(run_cli("solve " + spec_path("chord_forcing.json")), 4);
  EXPECT_EQ(run_cli("solve " + write_scratch("blowup_cli.json", kBlowUp)), 5);
  EXPECT_EQ(run_cli("solve " + spec_path("zero_horizon.json")), 3);
}

TEST(ExitCodes, ThreadVariableIsValidated) {
  EXPECT_EQ(run_cli("certify " + spec_path("example1.json") + " --steps 5"), 0);
  const std::string bad = "MOMENTCERT_THREADS=zero " + std::string(MOMENTCERT_CLI) + " certify " +
                          spec_path("example1.json") + " > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 3);
}

}  // namespace
}  // namespace momentcert::app
