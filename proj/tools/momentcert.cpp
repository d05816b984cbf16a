#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "momentcert/app.hpp"

namespace {

int dispatch(const std::string& command, const std::string& file, momentcert::app::CommandOptions opt,
             const std::string& report_path) {
  using namespace momentcert::app;
  try {
    opt.threads = threads_from_environment();
  } catch (const momentcert::InputError& e) {
    std::cerr << e.what() << "\n";
    return kExitInput;
  }
  const CommandResult r = run_command(command, file, opt);
  if (report_path.empty()) {
    std::cout << r.report.dump(2) << "\n";
  } else {
    std::ofstream out(report_path);
    if (!out) {
      std::cerr << report_path << ": cannot open report output\n";
      return kExitInput;
    }
    out << r.report.dump(2) << "\n";
  }
  std::cerr << r.summary << "\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Existence certificates and relaxed solves for polynomial-in-control problems"};
  cli.require_subcommand(1);

  momentcert::app::CommandOptions opt;
  std::string file, report_path, csv_path;
  std::uint64_t seed = 0;
  int steps = 0, grid = 0;
  double tol = 0.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("file", file, "Problem file (JSON)")->required();
    sub->add_option("--report", report_path, "Write the JSON report here instead of stdout");
    sub->add_option("--seed", seed, "Random seed for solver starts and sampled directions");
    sub->add_option("--steps", steps, "Number of time steps");
    sub->add_option("--grid", grid, "Points per axis of every control-space scan");
    sub->add_option("--tol", tol, "Extraction tolerance on the distance to the moment curve");
  };
  CLI::App* certify = cli.add_subcommand("certify", "Run the existence certificates");
  CLI::App* solve = cli.add_subcommand("solve", "Solve the relaxed problem and extract a classical control");
  CLI::App* compare = cli.add_subcommand("compare", "Compare the relaxed optimum with the oracles");
  for (auto* sub : {certify, solve, compare}) add_common(sub);
  solve->add_option("--csv", csv_path, "Write the trajectory CSV here");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : momentcert::app::kExitInput;
  }

  CLI::App* chosen = cli.get_subcommands().front();
  if (chosen->count("--seed")) opt.seed = seed;
  if (chosen->count("--steps")) opt.steps = steps;
  if (chosen->count("--grid")) opt.grid = grid;
  if (chosen->count("--tol")) opt.tol = tol;
  if (!csv_path.empty()) opt.csv_path = csv_path;
  return dispatch(chosen->get_name(), file, opt, report_path);
}
