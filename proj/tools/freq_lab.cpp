#include "freqlab/run.hpp"

#include <CLI11.hpp>

#include <iostream>

using freqlab::cli::RunConfig;

int main(int argc, char** argv) {
  CLI::App app{"freq-lab: frequency-function laboratory for sublinear elliptic equations"};
  app.set_version_flag("--version", std::string(freqlab::kToolVersion));

  std::string command, config_file;
  app.add_option("command", command, "ode | solve | frequency | audit | check")
      ->required()
      ->check(CLI::IsMember({"ode", "solve", "frequency", "audit", "check"}));
  app.add_option("-c,--config", config_file, "INI run configuration");

  RunConfig cfg;
  auto& p = cfg.problem;
  auto& o = cfg.options;
  auto& g = cfg.grid;

  std::vector<CLI::Option*> set;
  auto opt = [&](const char* name, auto& target, const char* help) { set.push_back(app.add_option(name, target, help)); };

  // Values given on the command line override the config file.
  RunConfig flags;
  opt("--out", flags.output, "output directory (FREQ_LAB_OUT wins)");
  opt("--seed", flags.seed, "seed for sampled assumption checks");
  opt("--field", flags.field, "input field file");
  opt("--problem", flags.problem_file, "problem INI file");
  opt("-j,--jobs", flags.jobs, "worker bound for sweeps");
  opt("--N", flags.problem.dimension, "dimension");
  opt("--radius", flags.problem.radius, "ball radius");
  opt("--q", flags.problem.q, "sublinear exponent");
  opt("--nonlinearity", flags.problem.nonlinearity_kind, "none | homogeneous | sum_of_powers | tabulated");
  opt("--mode", flags.options.mode, "command mode");
  opt("--u0", flags.options.a, "initial value u(0)");
  opt("--t0", flags.options.t0, "glue point / PME time shift");
  opt("--t-end", flags.options.t_end, "integration length");
  opt("--points", flags.options.points, "samples per branch");
  opt("--boundary", flags.options.boundary, "grid boundary data in s = theta");
  opt("--exact", flags.options.exact, "manufactured or sampled field in x1, x2");
  opt("--glue-radius", flags.options.glue_radius, "glue radius of the glued field");
  opt("--levels", flags.options.levels, "grid sizes of the convergence table");
  opt("--step", flags.grid.h, "radial step h");
  opt("--M", flags.grid.M, "radial cells");
  opt("--K", flags.grid.K, "angular points");
  opt("--stride", flags.grid.stride, "radius-grid stride");

  std::string mode_flag;
  for (const char* m : {"counterexample", "energy", "shooting", "pme", "radial", "grid", "glued", "sample"}) {
    app.add_flag_callback(std::string("--") + m, [&mode_flag, m] { mode_flag = m; }, std::string("mode ") + m);
  }
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the effective configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : freqlab::cli::kUsage;
  }

  try {
    if (!config_file.empty()) cfg = RunConfig::load(config_file);
  } catch (const std::exception& e) {
    std::cerr << "freq-lab: " << e.what() << '\n';
    return freqlab::cli::kUsage;
  }
  cfg.command = command;
  auto given = [&](const char* name) { return app.count(name) > 0; };
  if (given("--out")) cfg.output = flags.output;
  if (given("--seed")) cfg.seed = flags.seed;
  if (given("--field")) cfg.field = flags.field;
  if (given("--jobs")) cfg.jobs = flags.jobs;
  if (given("--problem")) {
    try {
      std::string ini = "[run]\nproblem = " + flags.problem_file + "\n";
      cfg.problem_file = flags.problem_file;
      p = RunConfig::parse(ini).problem;
    } catch (const std::exception& e) {
      std::cerr << "freq-lab: " << e.what() << '\n';
      return freqlab::cli::kUsage;
    }
  }
  if (given("--N")) p.dimension = flags.problem.dimension;
  if (given("--radius")) p.radius = flags.problem.radius;
  if (given("--q")) p.q = flags.problem.q;
  if (given("--nonlinearity")) p.nonlinearity_kind = flags.problem.nonlinearity_kind;
  if (given("--mode")) o.mode = flags.options.mode;
  if (!mode_flag.empty()) o.mode = mode_flag;
  if (given("--u0")) o.a = flags.options.a;
  if (given("--t0")) o.t0 = flags.options.t0;
  if (given("--t-end")) o.t_end = flags.options.t_end;
  if (given("--points")) o.points = flags.options.points;
  if (given("--boundary")) o.boundary = flags.options.boundary;
  if (given("--exact")) o.exact = flags.options.exact;
  if (given("--glue-radius")) o.glue_radius = flags.options.glue_radius;
  if (given("--levels")) o.levels = flags.options.levels;
  if (given("--step")) g.h = flags.grid.h;
  if (given("--M")) g.M = flags.grid.M;
  if (given("--K")) g.K = flags.grid.K;
  if (given("--stride")) g.stride = flags.grid.stride;
  if (o.mode.empty()) o.mode = command == "ode" ? "counterexample" : command == "solve" ? "radial" : "";

  if (print_config) {
    std::cout << cfg.serialize();
    return 0;
  }
  return freqlab::cli::execute(cfg, std::cout, std::cerr);
}
