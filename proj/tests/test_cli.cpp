#include "freqlab/run.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace freqlab;
using cli::RunConfig;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("freqlab_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string log, err;
  nlohmann::json record;
};

Run run(RunConfig cfg, const fs::path& dir) {
  cfg.output = dir.string();
  std::ostringstream log, err;
  Run r{cli::execute(cfg, log, err), log.str(), err.str(), {}};
  if (fs::exists(dir / "run.json")) r.record = nlohmann::json::parse(slurp(dir / "run.json"));
  return r;
}

RunConfig make(const std::string& command, const std::string& mode = "") {
  RunConfig c;
  c.command = command;
  c.options.mode = mode;
  return c;
}

bool keys_sorted(const nlohmann::ordered_json& j) {
  if (j.is_object()) {
    std::string prev;
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first && it.key() < prev) return false;
      prev = it.key();
      first = false;
      if (!keys_sorted(it.value())) return false;
    }
  } else if (j.is_array()) {
    for (const auto& e : j)
      if (!keys_sorted(e)) return false;
  }
  return true;
}

} // namespace

TEST_CASE("shipped configs round-trip through serialize and parse") {
  const fs::path dir = fs::path(FREQLAB_SOURCE_DIR) / "configs";
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".ini" || e.path().filename() == "problem_variable.ini") continue;
    CAPTURE(e.path().string());
    const auto c = RunConfig::load(e.path());
    CHECK_NOTHROW(c.validate());
    const auto text = c.serialize();
    const auto back = RunConfig::parse(text, dir);
    CHECK(back == c);
    CHECK(back.serialize() == text);
    ++n;
  }
  CHECK(n >= 6);
}

TEST_CASE("problem file is resolved relative to the config") {
  const auto c = RunConfig::load(fs::path(FREQLAB_SOURCE_DIR) / "configs" / "solve_manufactured.ini");
  CHECK(c.problem.coefficient_kind == "expression");
  CHECK(c.problem.nonlinearity_kind == "none");
  CHECK(c.jobs == 2);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(RunConfig::parse("[run]\ncommand = ode\nfoo = 1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[nope]\na = 1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[grid]\nh = 1e-3x\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[grid]\nM = 3.5\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[run]\nproblem = does_not_exist.ini\n"), ConfigError);
  auto c = make("ode", "energy");
  c.grid.h = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = make("frequency");
  CHECK_THROWS_AS(c.validate(), ConfigError);  // no field
  c = make("plot");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = make("check");
  c.tolerances.cs_gap = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("ode command exit codes") {
  auto c = make("ode", "counterexample");
  c.options.t_end = 1;
  const auto ok_dir = scratch("ode_ok");
  auto r = run(c, ok_dir);
  CHECK(r.code == cli::kOk);
  CHECK(r.record["summary"]["residual_max"].get<double>() <= 1e-12);
  const auto csv = slurp(ok_dir / "counterexample.csv");
  CHECK(csv.rfind("t,", 0) == 0);
  CHECK(csv.find('\r') == std::string::npos);

  c.problem.q = 2.5;
  r = run(c, scratch("ode_bad"));
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("q must lie in [1,2)") != std::string::npos);

  c = make("ode", "pme");
  c.problem.dimension = 3;
  c.grid.h = 5e-4;
  c.options.t_end = 8;
  const auto dir = scratch("ode_pme");
  r = run(c, dir);
  CHECK(r.code == cli::kOk);
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "pme.csv"));

  c = make("ode", "bogus");
  CHECK(run(c, scratch("ode_mode")).code == cli::kUsage);
}

TEST_CASE("solve, frequency and audit chain") {
  const auto sdir = scratch("solve_radial");
  auto c = make("solve", "radial");
  auto r = run(c, sdir);
  REQUIRE(r.code == cli::kOk);
  CHECK(r.record["summary"]["residual_sup"].get<double>() <= r.record["summary"]["residual_threshold"].get<double>());

  auto f = make("frequency");
  f.field = (sdir / "field.txt").string();
  r = run(f, scratch("freq_radial"));
  CHECK(r.code == cli::kOk);
  for (const auto& [name, v] : r.record["summary"]["verdicts"].items()) {
    CAPTURE(name);
    CHECK(v != "fail");
  }

  auto a = make("audit");
  a.field = f.field;
  const auto adir = scratch("audit_radial");
  r = run(a, adir);
  CHECK(r.code == cli::kOk);
  const auto cert = nlohmann::json::parse(slurp(adir / "certificate.json"));
  CHECK(cert["classification"] == "genuine_nonvanishing");
  CHECK(cert["schema_version"] == cli::kSchemaVersion);

  f.field = (sdir / "missing.txt").string();
  CHECK(run(f, scratch("freq_missing")).code == cli::kUsage);
}

TEST_CASE("audit exit codes for glued and zero fields") {
  const auto gdir = scratch("glued");
  REQUIRE(run(make("solve", "glued"), gdir).code == cli::kOk);
  auto a = make("audit");
  a.field = (gdir / "field.txt").string();
  const int code = run(a, scratch("audit_glued")).code;
  CHECK((code == cli::kContradiction || code == cli::kResidualVeto));

  auto z = make("solve", "sample");
  z.options.exact = "0";
  const auto zdir = scratch("zero");
  REQUIRE(run(z, zdir).code == cli::kOk);
  a.field = (zdir / "field.txt").string();
  const auto r = run(a, scratch("audit_zero"));
  CHECK(r.code == cli::kOk);
  CHECK(r.record["summary"]["whole_grid_zero"] == true);
  CHECK(r.record["summary"].contains("note"));
}

TEST_CASE("frequency of sampled harmonic polynomials") {
  for (auto [expr, N] : {std::pair{"x1", 1.0}, {"x1*x2", 2.0}}) {
    CAPTURE(expr);
    auto s = make("solve", "sample");
    s.problem.nonlinearity_kind = "none";
    s.options.exact = expr;
    s.grid.M = 128;
    s.grid.K = 512;
    const auto dir = scratch(std::string("sample_") + (N == 1 ? "1" : "2"));
    REQUIRE(run(s, dir).code == cli::kOk);
    auto f = s;
    f.command = "frequency";
    f.field = (dir / "field.txt").string();
    const auto r = run(f, scratch("freq_sample"));
    CHECK(r.code == cli::kOk);
    CHECK(r.record["summary"]["N_min"].get<double>() == doctest::Approx(N).epsilon(1e-6));
    CHECK(r.record["summary"]["N_max"].get<double>() == doctest::Approx(N).epsilon(1e-6));
  }
}

TEST_CASE("grid solve: convergence table and non-convergence") {
  auto c = make("solve", "grid");
  c.problem.nonlinearity_kind = "none";
  c.options.exact = "x1^2 - x2^2";
  const auto dir = scratch("grid_harm");
  auto r = run(c, dir);
  CHECK(r.code == cli::kOk);
  CHECK(r.record["summary"]["observed_order"].get<double>() == doctest::Approx(2.0).epsilon(0.1));
  CHECK(slurp(dir / "errors.csv").rfind("M,K,h,max_error\n", 0) == 0);

  c.jobs = 3;
  const auto par = run(c, scratch("grid_harm_par"));
  CHECK(par.record["content_hash"] == r.record["content_hash"]);

  c = make("solve", "grid");
  c.grid.max_iters = 3;
  const auto ndir = scratch("grid_nc");
  r = run(c, ndir);
  CHECK(r.code == cli::kNoConvergence);
  CHECK(fs::exists(ndir / "last_iterate.txt"));
  CHECK(r.record["summary"]["iterations"] == 3);
}

TEST_CASE("check command") {
  auto c = make("check");
  CHECK(run(c, scratch("check_ok")).code == cli::kOk);
  c.problem.nonlinearity_kind = "sum_of_powers";
  c.problem.terms = "1.5:-1";
  c.problem.kappa2 = 0.1;
  const auto dir = scratch("check_bad");
  const auto r = run(c, dir);
  CHECK(r.code == cli::kCheckFailed);
  const auto a = nlohmann::json::parse(slurp(dir / "assumptions.json"));
  bool witnessed = false;
  for (const auto& cl : a["clauses"])
    if (cl["clause"] == "A3.i.positive") witnessed = !cl["pass"].get<bool>() && cl["witness"].is_object();
  CHECK(witnessed);
}

TEST_CASE("records: determinism, sorted keys, manifest, history, env override") {
  auto c = make("solve", "radial");
  c.problem.dimension = 3;
  const auto d1 = scratch("det1"), d2 = scratch("det2");
  const auto r1 = run(c, d1), r2 = run(c, d2);
  CHECK(r1.record["content_hash"] == r2.record["content_hash"]);
  for (const auto& m : r1.record["manifest"]) {
    const std::string name = m["file"];
    CAPTURE(name);
    CHECK(slurp(d1 / name) == slurp(d2 / name));
    CHECK(fs::file_size(d1 / name) == m["bytes"].get<std::uintmax_t>());
    if (name.size() > 5 && name.substr(name.size() - 5) == ".json")
      CHECK(keys_sorted(nlohmann::ordered_json::parse(slurp(d1 / name))));
  }
  CHECK(keys_sorted(nlohmann::ordered_json::parse(slurp(d1 / "run.json"))));
  CHECK(r1.record["config"].get<std::string>() == c.serialize().replace(c.serialize().find("freq-lab-out"), 12, d1.string()));
  CHECK(!r1.record["started"].get<std::string>().empty());

  run(c, d1);
  std::ifstream h(d1 / "history.jsonl");
  int lines = 0;
  for (std::string l; std::getline(h, l);) ++lines;
  CHECK(lines == 2);

  const auto env = scratch("env");
  setenv("FREQ_LAB_OUT", env.c_str(), 1);
  const auto r = run(make("check"), scratch("ignored"));
  unsetenv("FREQ_LAB_OUT");
  CHECK(r.code == cli::kOk);
  CHECK(fs::exists(env / "assumptions.json"));
  CHECK(!fs::exists(scratch("ignored") / "assumptions.json"));
}
