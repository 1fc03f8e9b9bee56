#include "freqlab/run.hpp"

#include "freqlab/assumptions.hpp"
#include "freqlab/hash.hpp"
#include "freqlab/numerics.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <future>
#include <sstream>

namespace freqlab::cli {

namespace {

using nlohmann::json;

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

template <class Fn>
std::string to_text(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

std::string fmt(double v) { return core::format_number(v); }

field::SolutionField load_field(const RunConfig& cfg) {
  std::ifstream in(cfg.field);
  if (!in) throw ConfigError("cannot read field file " + cfg.field);
  return field::read_field(in);
}

std::vector<int> parse_levels(const std::string& s) {
  std::vector<int> out;
  for (double v : core::parse_number_list(s)) {
    if (v < 4 || v != std::floor(v)) throw ConfigError("grid levels must be integers >= 4");
    out.push_back(static_cast<int>(v));
  }
  if (out.size() < 2) throw ConfigError("a convergence table needs at least two levels");
  return out;
}

double residual_threshold(const RunConfig& cfg, const field::SolutionField& f) {
  const auto& t = cfg.tolerances;
  return f.truncation_estimate ? t.residual_factor * *f.truncation_estimate + t.residual_floor : t.residual_abs;
}

// ---------------------------------------------------------------- ode

int ode_counterexample(const RunConfig& cfg, RunRecord& rec, OutputDir& out) {
  const double q = cfg.problem.q, t0 = cfg.options.t0, L = cfg.options.t_end;
  const int n = cfg.options.points;
  json branches = json::object();
  double worst = 0.0;
  for (const char* branch : {"zero", "positive", "negative"}) {
    double w = 0.0;
    for (int i = 0; i < n; ++i) {
      const double off = L * (i + 0.5) / n;
      const double t = std::string(branch) == "zero" ? t0 - off : t0 + off;
      auto v = ode::counterexample_profile(q, t0, t);
      if (std::string(branch) == "negative") v = {-v.u, -v.u2};
      w = std::max(w, std::abs(v.u2 - ode::f_q(v.u, q)) / std::max(1.0, std::abs(v.u2)));
    }
    branches[branch] = w;
    worst = std::max(worst, w);
  }
  const auto tr = ode::counterexample_trajectory(q, t0, t0 - L, t0 + L, 2 * static_cast<std::size_t>(n));
  out.write("counterexample.csv", to_text([&](std::ostream& os) { ode::write_trajectory_csv(os, tr); }));
  const bool ok = worst <= 1e-12;
  rec.summary = {{"mode", "counterexample"}, {"q", q}, {"t0", t0}, {"points_per_branch", n},
                 {"residual_max", worst}, {"residual_by_branch", branches}, {"tolerance", 1e-12}, {"pass", ok}};
  out.write_json("summary.json", rec.summary);
  return ok ? kOk : kCheckFailed;
}

double max_drift(const ode::OdeTrajectory& tr) {
  const auto e = ode::conserved_energy(tr);
  double d = 0.0;
  for (double v : e) d = std::max(d, std::abs(v - e.front()));
  return d;
}

int ode_energy(const RunConfig& cfg, RunRecord& rec, OutputDir& out) {
  const double q = cfg.problem.q, a = cfg.options.a, T = cfg.options.t_end, h = cfg.grid.h;
  const auto tr = ode::integrate_plane(q, a, 0.0, T, h);
  const double drift = max_drift(tr);
  // Order from coarser steps, where the drift is well above roundoff.
  std::vector<double> hs{10 * h, 5 * h, 2.5 * h}, drifts;
  for (double s : hs) drifts.push_back(max_drift(ode::integrate_plane(q, a, 0.0, T, s)));
  const double order = num::observed_order(hs, drifts);
  const auto e = ode::conserved_energy(tr);
  out.write("energy.csv", to_text([&](std::ostream& os) {
              os << "t,u,du,E\n";
              for (std::size_t i = 0; i < tr.size(); ++i)
                os << fmt(tr.t[i]) << ',' << fmt(tr.u[i]) << ',' << fmt(tr.du[i]) << ',' << fmt(e[i]) << '\n';
            }));
  const bool ok = drift <= 1e-8 && std::abs(order - 4.0) <= 0.2;
  json table = json::array();
  for (std::size_t i = 0; i < hs.size(); ++i) table.push_back({{"h", hs[i]}, {"drift", drifts[i]}});
  rec.summary = {{"mode", "energy"}, {"q", q}, {"u0", a}, {"t_end", T}, {"h", h}, {"drift", drift},
                 {"drift_tolerance", 1e-8}, {"order", order}, {"order_table", table}, {"pass", ok}};
  out.write_json("summary.json", rec.summary);
  return ok ? kOk : kCheckFailed;
}

int ode_shooting(const RunConfig& cfg, RunRecord& rec, OutputDir& out) {
  const int dim = cfg.problem.dimension;
  const double q = cfg.problem.q;
  ode::IntegrateOptions opt;
  opt.estimate_error = true;
  const auto tr = ode::integrate_radial(dim, q, cfg.options.a, cfg.options.t_end, cfg.grid.h, opt);
  const auto z = ode::zero_audit(tr);
  out.write("shooting.csv", to_text([&](std::ostream& os) { ode::write_trajectory_csv(os, tr); }));
  json zeros = json::array();
  for (const auto& r : z.zeros) zeros.push_back({{"r", r.r}, {"slope", r.slope}, {"degenerate", r.degenerate}});
  const bool ok = z.degenerate_count() == 0;
  rec.summary = {{"mode", "shooting"}, {"N", dim}, {"q", q}, {"a", cfg.options.a}, {"r_max", cfg.options.t_end},
                 {"h", cfg.grid.h}, {"error_estimate", tr.error_estimate}, {"zero_threshold", z.threshold},
                 {"zeros", zeros}, {"degenerate_zeros", z.degenerate_count()}, {"pass", ok}};
  out.write_json("summary.json", rec.summary);
  return ok ? kOk : kCheckFailed;
}

int ode_pme(const RunConfig& cfg, RunRecord& rec, OutputDir& out) {
  const int dim = cfg.problem.dimension;
  const double q = cfg.problem.q;
  const auto& o = cfg.options;
  const auto base = ode::integrate_radial(dim, q, o.a, o.t_end, cfg.grid.h);
  const auto res = ode::pme_separated_residual(ode::make_pme_field(base, o.t0), o.nx, o.nt, o.t_lo, o.t_hi);
  out.write("pme.csv", to_text([&](std::ostream& os) { ode::write_pme_csv(os, res); }));
  const double bound = 1e-6 * res.w_inf;
  const bool ok = res.max_residual <= bound;
  rec.summary = {{"mode", "pme"}, {"N", dim}, {"q", q}, {"m", 1.0 / (q - 1.0)}, {"a", o.a}, {"t0", o.t0},
                 {"max_residual", res.max_residual}, {"w_inf", res.w_inf}, {"bound", bound},
                 {"samples", res.samples.size()}, {"excluded_radii", res.excluded.size()}, {"pass", ok}};
  out.write_json("summary.json", rec.summary);
  return ok ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------- solve

json field_summary(const field::SolutionField& f, const solve::Residual& res) {
  json j = {{"representation", field::to_string(f.representation())}, {"N", f.dim()}, {"residual_sup", res.sup()},
            {"description", f.description}};
  j["truncation_estimate"] = f.truncation_estimate ? json(*f.truncation_estimate) : json(nullptr);
  return j;
}

void write_field_file(OutputDir& out, const field::SolutionField& f, const std::string& name = "field.txt") {
  out.write(name, to_text([&](std::ostream& os) { field::write_field(os, f); }));
}

solve::GridControls grid_controls(const RunConfig& cfg) {
  solve::GridControls c;
  c.M = cfg.grid.M;
  c.K = cfg.grid.K;
  c.damping = cfg.grid.damping;
  c.tol = cfg.grid.tol;
  c.max_iters = cfg.grid.max_iters;
  return c;
}

int solve_grid(const RunConfig& cfg, const core::ProblemSpec& spec, RunRecord& rec, OutputDir& out) {
  auto controls = grid_controls(cfg);
  json s = {{"mode", "grid"}};
  bool ok = true;
  solve::GridSolveReport rep;
  if (!cfg.options.exact.empty()) {
    const solve::ManufacturedProblem mp(spec, Expression::parse(cfg.options.exact));
    const auto levels = parse_levels(cfg.options.levels);
    auto level_error = [&](int m) {
      auto c = controls;
      c.M = c.K = m;
      c.estimate_truncation = false;
      const auto r = solve::solve_grid_2d(spec, mp.boundary(), c, mp.source_fn());
      const auto& g = r.field.polar();
      double e = 0.0;
      for (int i = 0; i <= g.M; ++i)
        for (int j = 0; j < g.K; ++j) e = std::max(e, std::abs(r.field.values()(i, j) - mp.exact(g.point(i, j))));
      return e;
    };
    // levels are independent; at most `jobs` in flight
    std::vector<double> hs, errs(levels.size());
    for (std::size_t b = 0; b < levels.size(); b += cfg.jobs) {
      std::vector<std::future<double>> batch;
      for (std::size_t k = b; k < std::min(levels.size(), b + cfg.jobs); ++k)
        batch.push_back(std::async(cfg.jobs > 1 ? std::launch::async : std::launch::deferred, level_error, levels[k]));
      for (std::size_t k = 0; k < batch.size(); ++k) errs[b + k] = batch[k].get();
    }
    std::string csv = "M,K,h,max_error\n";
    for (std::size_t k = 0; k < levels.size(); ++k) {
      hs.push_back(spec.outer_radius / levels[k]);
      const auto m = std::to_string(levels[k]);
      csv += m + ',' + m + ',' + fmt(hs[k]) + ',' + fmt(errs[k]) + '\n';
    }
    out.write("errors.csv", csv);
    const double order = num::observed_order(hs, errs);
    s["exact"] = cfg.options.exact;
    s["observed_order"] = order;
    s["order_window"] = {1.8, 2.2};
    ok = order >= 1.8 && order <= 2.2;
    rep = solve::solve_grid_2d(spec, mp.boundary(), controls, mp.source_fn());
  } else {
    const auto g = Expression::parse(cfg.options.boundary);
    const Vec origin = make_vec(2);
    rep = solve::solve_grid_2d(spec, [&](double theta) { return g.eval(origin, theta); }, controls);
    const double thr = residual_threshold(cfg, rep.field);
    s["boundary"] = cfg.options.boundary;
    s["residual_threshold"] = thr;
    ok = rep.residual_sup <= thr;
  }
  write_field_file(out, rep.field);
  s["iterations"] = rep.iterations;
  s["distances"] = rep.distances;
  s["monotone_after_5"] = rep.monotone_after_5;
  s["residual_sup"] = rep.residual_sup;
  s["truncation_estimate"] = rep.field.truncation_estimate ? json(*rep.field.truncation_estimate) : json(nullptr);
  s["M"] = controls.M;
  s["K"] = controls.K;
  s["pass"] = ok;
  rec.summary = s;
  out.write_json("summary.json", s);
  return ok ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------- dispatch helpers

std::string exit_label(int code) {
  switch (code) {
    case kOk: return "ok";
    case kCheckFailed: return "check failed";
    case kUsage: return "usage or input error";
    case kNoConvergence: return "no convergence";
    case kContradiction: return "contradiction certified";
    case kResidualVeto: return "residual veto";
    case kInconclusive: return "inconclusive";
  }
  return "error";
}

} // namespace

int cmd_ode(const RunConfig& cfg, RunRecord& rec, OutputDir& out) {
  (void)cfg.problem.build();  // rejects q, N out of range before any mode-specific check
  const auto& mode = cfg.options.mode;
  if (mode == "counterexample") return ode_counterexample(cfg, rec, out);
  if (mode == "energy") return ode_energy(cfg, rec, out);
  if (mode == "shooting") return ode_shooting(cfg, rec, out);
  if (mode == "pme") return ode_pme(cfg, rec, out);
  throw ConfigError("ode mode must be counterexample, energy, shooting or pme");
}

int cmd_solve(const RunConfig& cfg, RunRecord& rec, OutputDir& out) {
  const auto spec = cfg.problem.build();
  const auto& mode = cfg.options.mode;
  try {
    if (mode == "radial") {
      const auto f = solve::solve_radial(spec, cfg.options.a, cfg.grid.h);
      const auto res = solve::residual_field(spec, f);
      write_field_file(out, f);
      const double thr = residual_threshold(cfg, f);
      const bool ok = res.sup() <= thr;
      rec.summary = field_summary(f, res);
      rec.summary["mode"] = "radial";
      rec.summary["residual_threshold"] = thr;
      rec.summary["zeros"] = f.radial_zeros();
      rec.summary["pass"] = ok;
      out.write_json("summary.json", rec.summary);
      return ok ? kOk : kCheckFailed;
    }
    if (mode == "glued") {
      const auto f = solve::glued_field(spec.dim, spec.nonlinearity.q(), cfg.options.glue_radius, spec.outer_radius,
                                        cfg.grid.h);
      const auto res = solve::residual_field(spec, f);
      write_field_file(out, f);
      rec.summary = field_summary(f, res);
      rec.summary["mode"] = "glued";
      rec.summary["glue_radius"] = cfg.options.glue_radius;
      rec.summary["note"] = "non-solution by construction";
      out.write_json("summary.json", rec.summary);
      return kOk;
    }
    if (mode == "sample") {
      if (cfg.options.exact.empty()) throw ConfigError("sample mode needs options.exact");
      if (spec.dim != 2) throw DomainError("sampled fields are 2-D");
      const auto e = Expression::parse(cfg.options.exact);
      auto f = field::sample_grid(grid::PolarGrid{cfg.grid.M, cfg.grid.K, spec.outer_radius},
                                  [&](const Vec& x) { return e.eval(x); });
      f.description = "sampled " + cfg.options.exact;
      f.q = spec.nonlinearity.q();
      f.nonlinearity = core::to_string(spec.nonlinearity.kind());
      write_field_file(out, f);
      const auto res = solve::residual_field(spec, f);
      rec.summary = field_summary(f, res);
      rec.summary["mode"] = "sample";
      out.write_json("summary.json", rec.summary);
      return kOk;
    }
    if (mode == "grid") return solve_grid(cfg, spec, rec, out);
  } catch (const solve::GridConvergenceError& e) {
    const auto& c = cfg;
    const auto last = field::SolutionField::grid2d(grid::PolarGrid{c.grid.M, c.grid.K, spec.outer_radius}, e.last_iterate);
    write_field_file(out, last, "last_iterate.txt");
    rec.summary = {{"mode", mode}, {"error", e.what()}, {"iterations", e.iterations}, {"last_distance", e.last_distance}};
    out.write_json("summary.json", rec.summary);
    return kNoConvergence;
  }
  throw ConfigError("solve mode must be radial, grid, glued or sample");
}

int cmd_frequency(const RunConfig& cfg, RunRecord& rec, OutputDir& out) {
  const auto spec = cfg.problem.build();
  const auto f = load_field(cfg);
  freq::FrequencyOptions fo;
  fo.stride = cfg.grid.stride;
  const auto I = freq::compute_integrals(spec, f, fo);
  out.write("profile.csv", to_text([&](std::ostream& os) { I.profile.write_csv(os); }));
  const auto reports = freq::verify_all(spec, I, cfg.tolerances.identities());
  json arr = json::array(), verdicts = json::object();
  bool ok = true;
  for (const auto& r : reports) {
    arr.push_back(sorted(r.to_json()));
    verdicts[r.name] = r.asserted ? (r.pass ? "pass" : "fail") : "reported";
    if (r.asserted && !r.pass) ok = false;
  }
  out.write_json("identities.json", {{"schema", freq::kIdentitySchema}, {"schema_version", kSchemaVersion}, {"reports", arr}});
  double nmin = INFINITY, nmax = -INFINITY;
  for (const auto& n : I.profile.N)
    if (n) {
      nmin = std::min(nmin, *n);
      nmax = std::max(nmax, *n);
    }
  rec.summary = {{"radii", I.size()}, {"verdicts", verdicts}, {"pass", ok}, {"residual_sup", I.residual_sup}};
  rec.summary["N_min"] = std::isfinite(nmin) ? json(nmin) : json(nullptr);
  rec.summary["N_max"] = std::isfinite(nmax) ? json(nmax) : json(nullptr);
  out.write_json("summary.json", rec.summary);
  return ok ? kOk : kCheckFailed;
}

int cmd_audit(const RunConfig& cfg, RunRecord& rec, OutputDir& out) {
  const auto spec = cfg.problem.build();
  const auto f = load_field(cfg);
  auto ctl = cfg.tolerances.audit();
  ctl.frequency.stride = cfg.grid.stride;
  const auto chain = audit::audit(spec, f, ctl);
  auto j = sorted(chain.to_json());
  j["schema_version"] = kSchemaVersion;
  out.write_json("certificate.json", j);
  rec.summary = {{"classification", audit::to_string(chain.classification)}, {"r0", chain.r0},
                 {"failing_step", chain.failing_step}, {"whole_grid_zero", chain.whole_grid_zero},
                 {"input_hash", chain.input_hash}};
  if (chain.whole_grid_zero) rec.summary["note"] = "field identically negligible";
  out.write_json("summary.json", rec.summary);
  switch (chain.classification) {
    case audit::Classification::genuine_nonvanishing: return kOk;
    case audit::Classification::contradiction_certified: return kContradiction;
    case audit::Classification::residual_veto: return kResidualVeto;
    case audit::Classification::inconclusive: return kInconclusive;
  }
  return kInconclusive;
}

int cmd_check(const RunConfig& cfg, RunRecord& rec, OutputDir& out) {
  const auto spec = cfg.problem.build();
  core::SampleControls sc;
  sc.seed = cfg.seed;
  const auto rep = core::check_assumptions(spec, sc);
  json clauses = json::array();
  for (const auto& c : rep.clauses) {
    json e = {{"clause", c.clause}, {"pass", c.pass}, {"margin", c.margin}, {"samples", c.samples}, {"note", c.note}};
    if (c.witness) {
      std::vector<double> x(c.witness->x.data(), c.witness->x.data() + c.witness->x.size());
      e["witness"] = {{"x", x}, {"s", c.witness->s}, {"value", c.witness->value}};
    } else {
      e["witness"] = nullptr;
    }
    clauses.push_back(e);
  }
  const auto* first = rep.first_failure();
  out.write_json("assumptions.json", {{"schema", "freq-lab/assumptions/1"}, {"schema_version", kSchemaVersion},
                                      {"seed", cfg.seed}, {"clauses", clauses}, {"pass", rep.pass()}});
  rec.summary = {{"pass", rep.pass()}, {"clauses", rep.clauses.size()}};
  rec.summary["first_failure"] = first ? json(first->clause) : json(nullptr);
  out.write_json("summary.json", rec.summary);
  return rep.pass() ? kOk : kCheckFailed;
}

int execute(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  std::optional<OutputDir> out;
  RunRecord rec;
  int code = kOk;
  try {
    cfg.validate();
    out.emplace(output_dir(cfg));
    rec.command = cfg.command;
    rec.config_snapshot = cfg.serialize();
    rec.started = now_utc();
    if (cfg.command == "ode") code = cmd_ode(cfg, rec, *out);
    else if (cfg.command == "solve") code = cmd_solve(cfg, rec, *out);
    else if (cfg.command == "frequency") code = cmd_frequency(cfg, rec, *out);
    else if (cfg.command == "audit") code = cmd_audit(cfg, rec, *out);
    else code = cmd_check(cfg, rec, *out);
  } catch (const ConfigError& e) {
    err << "freq-lab: " << e.what() << '\n';
    code = kUsage;
  } catch (const DomainError& e) {
    err << "freq-lab: " << e.what() << '\n';
    code = kUsage;
  } catch (const ConvergenceError& e) {
    err << "freq-lab: " << e.what() << " (iterations " << e.iterations << ", last distance " << e.last_distance << ")\n";
    code = kNoConvergence;
  } catch (const IntegrationError& e) {
    err << "freq-lab: " << e.what() << " (last good radius " << e.last_good_radius << ")\n";
    code = kNoConvergence;
  } catch (const QuadratureError& e) {
    err << "freq-lab: " << e.what() << '\n';
    code = kNoConvergence;
  } catch (const std::exception& e) {
    err << "freq-lab: internal error: " << e.what() << '\n';
    code = kCheckFailed;
  }
  if (!out) return code;
  rec.exit_code = code;
  rec.finished = now_utc();
  rec.manifest = out->manifest();
  std::uint64_t h = fnv1a64("");
  for (const auto& m : rec.manifest) h = fnv1a64(m.file + ':' + m.fnv1a + '\n', h);
  rec.content_hash = hex64(h);
  const auto j = rec.to_json();
  {
    std::ofstream os(out->path() / "run.json");
    os << j.dump(2) << '\n';
  }
  {
    std::ofstream os(out->path() / "history.jsonl", std::ios::app);
    os << j.dump() << '\n';
  }
  log << cfg.command << ": exit " << code << " (" << exit_label(code) << "), " << rec.manifest.size() << " files in "
      << out->path().string() << ", content hash " << rec.content_hash << '\n';
  return code;
}

} // namespace freqlab::cli
