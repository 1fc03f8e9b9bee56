// Acceptance criteria 1-11: one line per criterion, exit status 0 iff all pass.
#include "freqlab/assumptions.hpp"
#include "freqlab/audit.hpp"
#include "freqlab/identities.hpp"
#include "freqlab/numerics.hpp"
#include "freqlab/ode_lab.hpp"
#include "freqlab/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace freqlab;
namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAILED]");
  }
};

struct Criterion {
  int id;
  const char* title;
  double time_limit;  // seconds, 0 = none
  std::function<Outcome()> body;
};

double max_drift(const ode::OdeTrajectory& tr) {
  const auto e = ode::conserved_energy(tr);
  double d = 0.0;
  for (double v : e) d = std::max(d, std::abs(v - e.front()));
  return d;
}

core::ProblemSpec plane(core::CoefficientField a, core::NonlinearitySpec nl) {
  core::ProblemSpec p;
  p.dim = 2;
  p.outer_radius = 1.0;
  p.coefficients = std::move(a);
  p.nonlinearity = std::move(nl);
  p.validate();
  return p;
}

core::CoefficientField sheared() {
  return core::CoefficientField::from_expressions(
      2, {Expression::parse("1 + x1^2/4"), Expression::parse("x1*x2/8"), Expression::parse("1")});
}

struct RadialCase {
  int n;
  double q, a, R;
};
const std::vector<RadialCase> kRadial = {{2, 1.5, 0.5, 4}, {3, 1.5, 0.5, 4}, {2, 1.2, 0.3, 3}, {3, 1.8, 0.8, 5}, {2, 1.0, 0.2, 2}};

// ---------------------------------------------------------------------------

Outcome c1() {
  Outcome o;
  for (double q : {1.2, 1.5, 1.8}) {
    double worst = 0.0;
    for (int side : {-1, 1})
      for (int i = 0; i < 1000; ++i) {
        const double t = side * (i + 0.5) / 1000;
        const auto v = ode::counterexample_profile(q, 0.0, t);
        worst = std::max(worst, std::abs(v.u2 - ode::f_q(v.u, q)) / std::max(1.0, std::abs(v.u2)));
      }
    o.require(worst <= 1e-12, fmt("q=%.1f max rel residual %.2e", q, worst));
  }
  return o;
}

Outcome c2() {
  Outcome o;
  const double drift = max_drift(ode::integrate_plane(1.5, 1.0, 0.0, 10.0, 1e-3));
  o.require(drift <= 1e-8, fmt("drift %.2e at h=1e-3", drift));
  std::vector<double> hs{1e-2, 5e-3, 2.5e-3}, d;
  for (double h : hs) d.push_back(max_drift(ode::integrate_plane(1.5, 1.0, 0.0, 10.0, h)));
  const double p = num::observed_order(hs, d);
  o.require(std::abs(p - 4.0) <= 0.2, fmt("order %.3f", p));
  return o;
}

Outcome c3() {
  Outcome o;
  const auto spec = plane(core::CoefficientField::identity(2), core::NonlinearitySpec::none());
  const std::vector<std::pair<int, std::function<double(const Vec&)>>> cases = {
      {1, [](const Vec& x) { return x(0); }}, {2, [](const Vec& x) { return x(0) * x(1); }}};
  for (const auto& [deg, fn] : cases) {
    const auto P = freq::frequency_profile(spec, field::sample_grid(grid::PolarGrid{64, 512, 1.0}, fn));
    double err = 0.0;
    std::size_t defined = 0;
    for (const auto& n : P.N)
      if (n) {
        err = std::max(err, std::abs(*n - deg));
        ++defined;
      }
    o.require(err <= 1e-6 && defined == P.r.size(), fmt("deg %d max |N-%d| %.2e over %zu radii", deg, deg, err, defined));
  }
  return o;
}

Outcome c4() {
  Outcome o;
  double worst = 0.0;
  for (int n : {2, 3})
    for (double q : {1.0, 1.5}) {
      const auto spec = core::make_model_problem(n, 4.0, q);
      const auto r = freq::verify_H_prime(freq::compute_integrals(spec, solve::solve_radial(spec, 0.5, 1e-3)));
      worst = std::max(worst, r.pass ? r.max_relative : INFINITY);
    }
  o.require(worst <= 1e-6, fmt("radial max rel %.2e", worst));
  const auto spec = plane(sheared(), core::NonlinearitySpec::homogeneous(1.5));
  solve::GridControls c;
  c.M = c.K = 256;
  const auto rep = solve::solve_grid_2d(spec, [](double t) { return 0.3 + 0.2 * std::cos(t) + 0.1 * std::sin(2 * t); }, c);
  const auto h = freq::verify_H_prime(freq::compute_integrals(spec, rep.field));
  const double dform = h.scalars.at("max_relative_D_form");
  o.require(h.pass && dform <= 5e-5, fmt("256x256 variable A: D-form rel %.2e, kinematic rel %.2e", dform, h.max_relative));
  return o;
}

Outcome c5() {
  Outcome o;
  double worst = 0.0;
  for (int n : {2, 3})
    for (double q : {1.0, 1.5}) {
      const auto spec = core::make_model_problem(n, 4.0, q);
      const auto r = freq::verify_pohozaev_model(spec, freq::compute_integrals(spec, solve::solve_radial(spec, 0.5, 1e-3)));
      worst = std::max(worst, r.pass ? r.max_relative : INFINITY);
    }
  o.require(worst <= 1e-6, fmt("radial max rel %.2e", worst));
  const auto spec = core::make_model_problem(2, 1.5, 1.5);
  const auto r = freq::verify_pohozaev_model(spec, freq::compute_integrals(spec, solve::glued_field(2, 1.5, 0.5, 1.5, 1e-3)));
  const double dm = r.scalars.at("defect_match");
  o.require(dm <= 1e-4 && r.scalars.at("correction_sup") > 0, fmt("glued defect match %.2e", dm));
  return o;
}

Outcome c6() {
  Outcome o;
  const auto spec = plane(sheared(), core::NonlinearitySpec::homogeneous(1.5));
  const solve::ManufacturedProblem mp(spec, Expression::parse("0.1*(1 - x1^2 - x2^2)^2 + 0.05*x1"));
  std::vector<double> hs, e9, e10;
  for (int m : {128, 256}) {
    const auto both = freq::verify_rellich_general(freq::compute_integrals(spec, mp.sample(grid::PolarGrid{m, m, 1.0})));
    hs.push_back(1.0 / m);
    e9.push_back(both.at(0).max_relative);
    e10.push_back(both.at(1).max_relative);
    if (m == 256)
      o.require(both[0].pass && both[1].pass && e9.back() <= 5e-6 && e10.back() <= 5e-6,
                fmt("256x256 rel %.2e / %.2e", e9.back(), e10.back()));
  }
  const double p9 = num::observed_order(hs, e9), p10 = num::observed_order(hs, e10);
  // gradients and quadrature are fourth order
  o.require(p9 >= 3.5 && p10 >= 3.5, fmt("halving order %.2f / %.2f", p9, p10));
  return o;
}

Outcome c7() {
  Outcome o;
  int fields = 0, radii = 0;
  double min_gap = INFINITY;
  bool ok = true;
  auto one = [&](const core::ProblemSpec& spec, const field::SolutionField& f) {
    const auto r = freq::verify_N_prime_bound(spec, freq::compute_integrals(spec, f));
    ok = ok && r.pass;
    min_gap = std::min(min_gap, r.scalars.at("min_cs_gap"));
    radii += static_cast<int>(r.r.size());
    ++fields;
  };
  for (const auto& c : kRadial) {
    const auto spec = core::make_model_problem(c.n, c.R, c.q);
    one(spec, solve::solve_radial(spec, c.a, 1e-3));
  }
  for (int n : {2, 3})
    for (double q : {1.0, 1.5}) {
      const auto spec = core::make_model_problem(n, 4.0, q);
      one(spec, solve::solve_radial(spec, 0.5, 1e-3));
    }
  const auto spec = core::make_model_problem(2, 1.0, 1.5);
  solve::GridControls gc;
  gc.M = gc.K = 64;
  one(spec, solve::solve_grid_2d(spec, [](double t) { return 0.3 + 0.1 * std::cos(t); }, gc).field);
  o.require(ok, fmt("bound holds on %d fields, %d radii", fields, radii));
  o.require(min_gap >= -1e-10, fmt("min cs_gap %.2e", min_gap));
  return o;
}

Outcome c8() {
  Outcome o;
  int genuine = 0, genuine_bad = 0;
  for (const auto& c : kRadial) {
    const auto spec = core::make_model_problem(c.n, c.R, c.q);
    const auto chain = audit::audit(spec, solve::solve_radial(spec, c.a, 1e-3));
    if (chain.classification == audit::Classification::genuine_nonvanishing) (chain.r0 == 0.0 ? genuine : genuine_bad)++;
  }
  o.require(genuine == 5 && genuine_bad == 0, fmt("%d/5 radial genuine with r0 = 0", genuine));
  int rejected = 0;
  for (auto [n, q, r0] : {std::tuple{2, 1.5, 0.5}, std::tuple{3, 1.5, 0.3}, std::tuple{2, 1.2, 0.4}}) {
    const auto spec = core::make_model_problem(n, 1.5, q);
    const auto chain = audit::audit(spec, solve::glued_field(n, q, r0, 1.5, 1e-3));
    const auto k = chain.classification;
    if (k == audit::Classification::residual_veto || k == audit::Classification::contradiction_certified) ++rejected;
    if (k == audit::Classification::genuine_nonvanishing && chain.r0 > 0) ++genuine_bad;
  }
  o.require(rejected == 3, fmt("%d/3 glued rejected", rejected));
  o.require(genuine_bad == 0, fmt("%d genuine with r0 > 0", genuine_bad));
  return o;
}

Outcome c9() {
  using core::NonlinearitySpec;
  Outcome o;
  const auto hom = core::check_A3(NonlinearitySpec::homogeneous(1.5), 2, 1.0);
  const double m = hom.find("A3.i.upper")->margin;
  o.require(hom.pass() && std::abs(m) <= 1e-15, fmt("homogeneous passes, clause i margin %.1e", m));

  core::ProblemConfig remark;
  remark.nonlinearity_kind = "sum_of_powers";
  remark.terms = "1.5:2, 1.2:1 + x1^2";
  remark.superlinear = "s^3";
  remark.kappa2 = 0.1;
  o.require(core::check_assumptions(remark.build()).pass(), "remark class passes");

  auto fails = [&](const core::AssumptionReport& rep, const char* clause, const char* label) {
    const auto* c = rep.find(clause);
    o.require(c && !c->pass && c->witness, fmt("%s fails %s with witness", label, clause));
  };
  fails(core::check_A3(NonlinearitySpec::tabulated(Expression::parse("-abs(s)^(-0.5)*s"), 1.5, 1.0, 1.0, 0.5), 2, 1.0),
        "A3.i.positive", "sign flip");
  fails(core::check_A3(NonlinearitySpec::sum_of_powers({{1.5, Expression::parse("x1^2 + 1e-6")}}, 1.0, 1.0, 1e-7), 2, 1.0),
        "A3.remark.grad_c_over_c", "unbounded grad c/c");
  fails(core::check_A3(NonlinearitySpec::homogeneous(1.5, 1.0, 1.0, 0.0), 2, 1.0), "A3.iv", "kappa2 = 0");
  return o;
}

Outcome c10() {
  Outcome o;
  for (int n : {2, 3}) {
    const auto base = ode::integrate_radial(n, 1.5, 1.0, 8.0, 5e-4);
    for (std::size_t k : {64u, 128u}) {
      const auto r = ode::pme_separated_residual(ode::make_pme_field(base, 0.0), k, k, 0.5, 2.0);
      o.require(r.max_residual <= 1e-6 * r.w_inf,
                fmt("N=%d %zux%zu residual/|w| %.2e", n, k, k, r.max_residual / r.w_inf));
    }
  }
  return o;
}

// The regression suite: every command through the CLI layer.
std::vector<std::pair<std::string, std::string>> suite(const fs::path& root) {
  std::vector<cli::RunConfig> runs;
  auto add = [&](const std::string& name, const std::string& command, const std::string& mode) -> cli::RunConfig& {
    cli::RunConfig c;
    c.command = command;
    c.options.mode = mode;
    c.output = (root / name).string();
    runs.push_back(c);
    return runs.back();
  };
  add("ode_counterexample", "ode", "counterexample").options.t_end = 1;
  add("ode_energy", "ode", "energy").options.a = 1;
  add("ode_shooting", "ode", "shooting").problem.dimension = 3;
  {
    auto& c = add("ode_pme", "ode", "pme");
    c.problem.dimension = 3;
    c.grid.h = 5e-4;
    c.options.t_end = 8;
  }
  add("solve_radial", "solve", "radial");
  add("solve_glued", "solve", "glued");
  {
    auto& c = add("solve_grid", "solve", "grid");
    c.problem.nonlinearity_kind = "none";
    c.options.exact = "x1^2 - x2^2";
  }
  add("solve_grid_nonlinear", "solve", "grid");
  for (const char* f : {"solve_radial", "solve_glued", "solve_grid_nonlinear"}) {
    add(std::string("frequency_") + f, "frequency", "").field = (root / f / "field.txt").string();
    add(std::string("audit_") + f, "audit", "").field = (root / f / "field.txt").string();
  }
  add("check", "check", "");
  std::vector<std::pair<std::string, std::string>> hashes;
  std::ostringstream sink;
  for (const auto& c : runs) {
    cli::execute(c, sink, sink);
    std::ifstream in(fs::path(c.output) / "run.json");
    const auto j = nlohmann::json::parse(in);
    hashes.emplace_back(fs::path(c.output).filename().string(), j["content_hash"].get<std::string>());
  }
  return hashes;
}

Outcome c11() {
  Outcome o;
  const auto base = fs::temp_directory_path() / "freqlab_acceptance";
  fs::remove_all(base);
  const auto a = suite(base / "a"), b = suite(base / "b");
  int same = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] == b[i]) ++same;
  o.require(same == static_cast<int>(a.size()) && !a.empty(), fmt("%d/%zu runs with identical content hash", same, a.size()));
  fs::remove_all(base);
  return o;
}

} // namespace

int main() {
  const std::vector<Criterion> all = {
      {1, "counterexample exactness", 1, c1},
      {2, "energy conservation", 5, c2},
      {3, "classical frequency oracle", 10, c3},
      {4, "H' identity", 30, c4},
      {5, "Pohozaev identity", 0, c5},
      {6, "Rellich-type identities", 0, c6},
      {7, "N' lower bound and CS gap", 0, c7},
      {8, "UCP audit soundness", 60, c8},
      {9, "assumption checker", 0, c9},
      {10, "PME separated solution", 0, c10},
      {11, "determinism", 0, c11},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit > 0) o.require(secs < c.time_limit, fmt("%.2f s (limit %.0f s)", secs, c.time_limit));
    else o.detail += fmt("; %.2f s", secs);
    if (!o.pass) ++failed;
    std::cout << fmt("criterion %2d %s  %-28s ", c.id, o.pass ? "PASS" : "FAIL", c.title) << o.detail << std::endl;
  }
  std::cout << (failed ? fmt("%d criteria failed", failed) : std::string("all 11 criteria passed")) << std::endl;
  return failed ? 1 : 0;
}
