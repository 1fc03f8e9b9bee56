#include "freqlab/assumptions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace freqlab::core {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ClauseVerdict make_clause(std::string name) {
  ClauseVerdict v;
  v.clause = std::move(name);
  v.margin = kInf;
  return v;
}

/// Records a sample: keeps the smallest margin and the first violating point.
void record(ClauseVerdict& v, double margin, bool ok, const Vec& x, double s, double value) {
  ++v.samples;
  if (margin < v.margin) v.margin = margin;
  if (!ok && v.pass) {
    v.pass = false;
    v.witness = Witness{x, s, value};
  }
}

std::vector<Vec> directions(int dim, int count) {
  std::vector<Vec> out;
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      const double t = std::numbers::pi * k / count;
      Vec d(2);
      d << std::cos(t), std::sin(t);
      out.push_back(d);
    }
    return out;
  }
  // Fibonacci points on the sphere.
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    const double z = 1.0 - 2.0 * (k + 0.5) / count;
    const double rho = std::sqrt(1.0 - z * z);
    Vec d(3);
    d << rho * std::cos(golden * k), rho * std::sin(golden * k), z;
    out.push_back(d);
  }
  return out;
}

} // namespace

bool AssumptionReport::pass() const {
  for (const auto& c : clauses)
    if (!c.pass) return false;
  return true;
}

const ClauseVerdict* AssumptionReport::find(const std::string& clause) const {
  for (const auto& c : clauses)
    if (c.clause == clause) return &c;
  return nullptr;
}

const ClauseVerdict* AssumptionReport::first_failure() const {
  for (const auto& c : clauses)
    if (!c.pass) return &c;
  return nullptr;
}

std::vector<Vec> sample_ball(int dim, double radius, const SampleControls& c) {
  std::vector<Vec> pts;
  pts.push_back(Vec::Zero(dim));
  for (int i = 0; i < dim && static_cast<int>(pts.size()) < c.x_samples; ++i) {
    Vec e = Vec::Zero(dim);
    e[i] = 0.5 * radius;
    pts.push_back(e);
    if (static_cast<int>(pts.size()) < c.x_samples) pts.push_back(-e);
  }
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  // Points strictly inside the closed ball; rejection from the cube.
  while (static_cast<int>(pts.size()) < c.x_samples) {
    Vec p(dim);
    for (int i = 0; i < dim; ++i) p[i] = uni(rng);
    if (p.norm() <= 1.0) pts.push_back(radius * p);
  }
  return pts;
}

std::vector<double> sample_s(double eps0, const SampleControls& c) {
  // Quadratic spacing clusters samples near s = 0 where sublinearity bites.
  const int half = std::max(1, c.s_samples / 2);
  std::vector<double> s;
  for (int k = 1; k <= half; ++k) {
    const double t = static_cast<double>(k) / (half + 1);
    s.push_back(-eps0 * t * t);
    s.push_back(eps0 * t * t);
  }
  return s;
}

AssumptionReport check_A1(const ProblemSpec& spec, const SampleControls& c) {
  const int dim = spec.dim;
  const auto xs = sample_ball(dim, spec.outer_radius, c);
  const auto dirs = directions(dim, c.directions);
  const double h = 1e-5 * spec.outer_radius;

  ClauseVerdict sym = make_clause("A1.symmetry");
  ClauseVerdict ell = make_clause("A1.ellipticity");
  ClauseVerdict grad = make_clause("A1.gradient");
  for (const Vec& x : xs) {
    const Mat a = spec.coefficients.matrix(x);
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    record(sym, -asym, asym <= 1e-14 * scale, x, 0.0, asym);

    const double lam = spec.coefficients.ellipticity(x);
    for (const Vec& xi : dirs) {
      const double quad = xi.dot(a * xi);
      const double lo = quad - lam;
      const double hi = 1.0 / std::max(lam, 1e-300) - quad;
      const bool ok = lam > 0.0 && lam < 1.0 && lo >= -1e-13 && hi >= -1e-13;
      record(ell, std::min(lo, hi), ok, x, 0.0, quad);
    }

    const auto g = spec.coefficients.gradient(x);
    for (int k = 0; k < dim; ++k) {
      Vec xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      const Mat fd = (spec.coefficients.matrix(xp) - spec.coefficients.matrix(xm)) / (2.0 * h);
      const double err = (fd - g[k]).cwiseAbs().maxCoeff();
      const double tol = 1e-6 * std::max(1.0, g[k].cwiseAbs().maxCoeff());
      record(grad, tol - err, err <= tol, x, 0.0, err);
    }
  }
  return {{sym, ell, grad}};
}

AssumptionReport check_A2(const ProblemSpec& spec, const SampleControls& c) {
  ClauseVerdict v = make_clause("A2.bounded");
  double vmax = 0.0;
  for (const Vec& x : sample_ball(spec.dim, spec.outer_radius, c)) {
    const double val = spec.potential(x);
    vmax = std::max(vmax, std::abs(val));
    record(v, -std::abs(val), std::isfinite(val), x, 0.0, val);
  }
  v.margin = -vmax;
  v.note = "sup |V| over samples = " + std::to_string(vmax);
  return {{v}};
}

AssumptionReport check_A3(const NonlinearitySpec& nl, int dim, double radius, const SampleControls& c) {
  AssumptionReport rep;
  ClauseVerdict params = make_clause("A3.parameters");
  ClauseVerdict pos = make_clause("A3.i.positive");
  ClauseVerdict upper = make_clause("A3.i.upper");
  ClauseVerdict c1 = make_clause("A3.ii");
  ClauseVerdict grad = make_clause("A3.iii");
  ClauseVerdict floor = make_clause("A3.iv");

  const Vec origin = Vec::Zero(dim);
  const bool params_ok = nl.eps0() > 0.0 && nl.kappa1() >= 0.0 && nl.kappa2() > 0.0 && nl.q() < 2.0;
  record(params, std::min({nl.eps0(), nl.kappa2(), 2.0 - nl.q()}), params_ok, origin, 0.0, nl.kappa2());
  if (!(nl.kappa2() > 0.0)) {
    params.note = "kappa2 must be positive";
    // iv) with kappa2 <= 0 is not the assumption; flag it on the clause itself.
    record(floor, nl.kappa2(), false, origin, nl.eps0(), nl.kappa2());
    floor.note = "kappa2 must be positive";
  }
  if (nl.kind() == NonlinearityKind::none) {
    pos.note = "f vanishes identically";
    record(pos, 0.0, false, origin, nl.eps0(), 0.0);
  }

  const auto xs = sample_ball(dim, radius, c);
  const auto ss = sample_s(nl.eps0(), c);
  const double q = nl.q();
  const double hstep = 1e-5 * radius;
  for (const Vec& x : xs) {
    for (double s : ss) {
      const double f = nl.f(x, s);
      const double F = nl.F(x, s);
      const double fs = f * s;
      record(pos, fs, fs > 0.0, x, s, fs);
      const double gap = q * F - fs;
      const double scale = std::abs(q * F) + std::abs(fs);
      record(upper, scale > 0.0 ? gap / scale : gap, gap >= -c.slack * scale, x, s, gap);

      const Vec g = nl.grad_x_F(x, s);
      const double gn = g.norm();
      record(grad, nl.kappa1() * F - gn, gn <= nl.kappa1() * F * (1.0 + c.slack) + 1e-300, x, s, gn);
    }
    // ii) C^1 in x: the gradient must be finite and match central differences.
    for (double s : {nl.eps0() * 0.5, -nl.eps0() * 0.5}) {
      const Vec g = nl.grad_x_F(x, s);
      double err = 0.0;
      for (int k = 0; k < dim; ++k) {
        Vec xp = x, xm = x;
        xp[k] += hstep;
        xm[k] -= hstep;
        err = std::max(err, std::abs((nl.F(xp, s) - nl.F(xm, s)) / (2.0 * hstep) - g[k]));
      }
      const double tol = 1e-4 * std::max(1.0, g.norm());
      record(c1, tol - err, std::isfinite(err) && err <= tol, x, s, err);
    }
    for (double s : {nl.eps0(), -nl.eps0()}) {
      const double F = nl.F(x, s);
      record(floor, F - nl.kappa2(), F >= nl.kappa2(), x, s, F);
    }
  }
  rep.clauses = {params, pos, upper, c1, grad, floor};

  if (nl.kind() == NonlinearityKind::sum_of_powers) {
    ClauseVerdict rc = make_clause("A3.remark.grad_c_over_c");
    double worst = 0.0;
    for (const Vec& x : xs) {
      for (const auto& t : nl.terms()) {
        const double cv = t.coefficient.eval(x);
        double gnorm = 0.0;
        for (int h = 0; h < dim; ++h) gnorm += std::pow(t.coefficient.derivative(h).eval(x), 2);
        gnorm = std::sqrt(gnorm);
        const double ratio = cv > 0.0 ? gnorm / cv : kInf;
        worst = std::max(worst, ratio);
        record(rc, nl.kappa1() - ratio, cv > 0.0 && ratio <= nl.kappa1() * (1.0 + c.slack), x, 0.0, ratio);
      }
    }
    rc.note = "sup |grad c_k| / c_k = " + std::to_string(worst);
    rep.clauses.push_back(rc);
  }
  return rep;
}

AssumptionReport check_assumptions(const ProblemSpec& spec, const SampleControls& c) {
  AssumptionReport rep = check_A1(spec, c);
  for (auto& v : check_A2(spec, c).clauses) rep.clauses.push_back(v);
  for (auto& v : check_A3(spec.nonlinearity, spec.dim, spec.outer_radius, c).clauses) rep.clauses.push_back(v);
  if (spec.nonlinearity.superlinear()) {
    ClauseVerdict ht = make_clause("remark.h_tilde_bounded");
    double sup = 0.0;
    const auto ss = sample_s(spec.nonlinearity.eps0(), c);
    for (const Vec& x : sample_ball(spec.dim, spec.outer_radius, c)) {
      for (double s : ss) {
        const double v = spec.nonlinearity.h(x, s) / s;
        sup = std::max(sup, std::abs(v));
        record(ht, -std::abs(v), std::isfinite(v), x, s, v);
      }
    }
    ht.margin = -sup;
    ht.note = "superlinear part routed into V; sup |h(x,s)/s| = " + std::to_string(sup);
    rep.clauses.push_back(ht);
  }
  return rep;
}

} // namespace freqlab::core
