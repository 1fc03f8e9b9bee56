#include "freqlab/elliptic_solver.hpp"

#include "freqlab/assumptions.hpp"
#include "freqlab/numerics.hpp"
#include "freqlab/problem_config.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace freqlab::solve {

namespace {

constexpr double kNodeTol = 1e-9;

Vec on_axis(int dim, double r) {
  Vec x = make_vec(dim, 0.0);
  x(0) = r;
  return x;
}

Residual radial_residual(const core::ProblemSpec& spec, const field::SolutionField& u, const ResidualOptions& opt) {
  if (!spec.coefficients.is_identity()) throw DomainError("radial residual needs A = id");
  if (u.dim() != spec.dim) throw DomainError("field dimension does not match the problem");
  const auto& p = u.profile();
  const std::size_t n = p.size();
  const double h = p.h;
  const int dim = u.dim();
  const auto zeros = u.radial_zeros();

  // Stencils must not straddle a zero: f_q(u) is not smooth there.
  std::vector<bool> smooth(n - 1, true);
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (!p.crossings_in(i).empty()) smooth[i] = false;
  for (double z : zeros) {
    const double x = z / h;
    const long k = std::lround(x);
    if (std::abs(x - k) < kNodeTol) {
      if (k >= 1 && static_cast<std::size_t>(k) < n) smooth[k - 1] = false;
    } else {
      const auto i = static_cast<std::size_t>(std::floor(x));
      if (i + 1 < n) smooth[i] = false;
    }
  }
  const auto u2 = num::derivative(p.du, h, smooth);

  const double band = opt.exclusion.value_or(p.q > 1.0 ? 8.0 * h : kNodeTol * h);
  Residual res;
  res.representation = field::Representation::radial;
  res.r = p.t;
  res.rho.resize(n);
  res.valid.assign(n, true);
  std::size_t zi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = p.t[i];
    const Vec x = on_axis(spec.dim, r);
    const double lap = i == 0 ? dim * u2[0] : u2[i] + (dim - 1) / r * p.du[i];
    double rho = lap + spec.potential(x) * p.u[i] + spec.nonlinearity.f(x, p.u[i]);
    if (opt.source) rho += opt.source(x);
    res.rho[i] = rho;
    while (zi < zeros.size() && zeros[zi] < r - band) ++zi;
    if (zi < zeros.size() && std::abs(zeros[zi] - r) < band) {
      res.valid[i] = false;
      res.excluded.push_back(r);
    }
  }
  return res;
}

Residual grid_residual(const core::ProblemSpec& spec, const field::SolutionField& u, const ResidualOptions& opt) {
  if (spec.dim != 2) throw DomainError("grid residual needs N = 2");
  const auto& g = u.polar();
  const grid::PolarOps ops(g);
  const auto& U = u.values();
  const auto grad = ops.gradient(U);
  grid::GridFn f1(g.M + 1, g.K), f2(g.M + 1, g.K), rest(g.M + 1, g.K);
  for (int i = 0; i <= g.M; ++i)
    for (int j = 0; j < g.K; ++j) {
      const Vec x = g.point(i, j);
      const Mat a = spec.coefficients.matrix(x);
      f1(i, j) = a(0, 0) * grad[0](i, j) + a(0, 1) * grad[1](i, j);
      f2(i, j) = a(1, 0) * grad[0](i, j) + a(1, 1) * grad[1](i, j);
      rest(i, j) = spec.potential(x) * U(i, j) + spec.nonlinearity.f(x, U(i, j)) + (opt.source ? opt.source(x) : 0.0);
    }
  Residual res;
  res.representation = field::Representation::grid2d;
  res.rho_grid = ops.divergence(f1, f2) + rest;
  res.r.resize(g.M + 1);
  for (int i = 0; i <= g.M; ++i) res.r[i] = g.r(i);
  return res;
}

// sup over shared nodes of |rho_coarse - rho_fine|; the fine field has step h/2.
double radial_difference(const Residual& coarse, const Residual& fine) {
  double d = 0.0;
  for (std::size_t i = 0; i < coarse.rho.size() && 2 * i < fine.rho.size(); ++i)
    if (coarse.valid[i] && fine.valid[2 * i]) d = std::max(d, std::abs(coarse.rho[i] - fine.rho[2 * i]));
  return d;
}

} // namespace

double Residual::sup() const {
  if (representation == field::Representation::grid2d) return rho_grid.size() ? rho_grid.cwiseAbs().maxCoeff() : 0.0;
  double m = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i)
    if (valid[i]) m = std::max(m, std::abs(rho[i]));
  return m;
}

double Residual::sup_ball(double radius) const {
  double m = 0.0;
  for (std::size_t i = 0; i < r.size() && r[i] <= radius * (1 + 1e-12); ++i) {
    if (representation == field::Representation::grid2d)
      m = std::max(m, rho_grid.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff());
    else if (valid[i])
      m = std::max(m, std::abs(rho[i]));
  }
  return m;
}

Residual residual_field(const core::ProblemSpec& spec, const field::SolutionField& u, const ResidualOptions& opt) {
  return u.representation() == field::Representation::radial ? radial_residual(spec, u, opt) : grid_residual(spec, u, opt);
}

field::SolutionField solve_radial(const core::ProblemSpec& spec, double a, double h) {
  if (!spec.is_model_case() || spec.nonlinearity.kind() != core::NonlinearityKind::homogeneous)
    throw DomainError("solve_radial needs A = id, V = 0 and homogeneous f_q");
  const double eps0 = spec.nonlinearity.eps0();
  if (!(std::abs(a) > 0.0 && std::abs(a) < eps0)) throw DomainError("|a| must lie in (0, eps0)");
  const int dim = spec.dim;
  const double q = spec.nonlinearity.q();
  const double R = spec.outer_radius;

  ode::IntegrateOptions io;
  io.estimate_error = true;
  auto coarse = field::SolutionField::radial(ode::integrate_radial(dim, q, a, R, h, io), dim);
  const auto fine = field::SolutionField::radial(ode::integrate_radial(dim, q, a, R, 0.5 * h), dim);
  const double diff = radial_difference(residual_field(spec, coarse), residual_field(spec, fine));
  coarse.truncation_estimate = diff * 16.0 / 15.0;
  coarse.q = q;
  coarse.nonlinearity = "homogeneous";
  coarse.description = "radial solution N=" + std::to_string(dim) + " a=" + core::format_number(a);
  return coarse;
}

field::SolutionField glued_field(int dim, double q, double r0, double R, double h) {
  if (!(r0 >= 0.0 && r0 < R)) throw DomainError("glued field needs 0 <= r0 < R");
  const auto n = static_cast<std::size_t>(std::llround(R / h));
  if (n < 8 || std::abs(n * h - R) > 1e-9 * R) throw DomainError("R must be a multiple of h");
  const auto spec = core::make_model_problem(dim, R, q);
  auto make = [&](std::size_t m) {
    auto tr = ode::counterexample_trajectory(q, r0, 0.0, R, m);
    tr.dim = dim;
    return field::SolutionField::radial(std::move(tr), dim);
  };
  auto f = make(n);
  const auto fine = make(2 * n);
  f.truncation_estimate = radial_difference(residual_field(spec, f), residual_field(spec, fine)) * 16.0 / 15.0;
  f.q = q;
  f.nonlinearity = "homogeneous";
  f.description = "glued N=" + std::to_string(dim) + " r0=" + core::format_number(r0);
  return f;
}

ManufacturedProblem::ManufacturedProblem(core::ProblemSpec spec, Expression u_exact)
    : spec_(std::move(spec)), u_(std::move(u_exact)) {
  if (u_.max_x_index() > spec_.dim) throw ConfigError("u_exact uses coordinates beyond N");
  if (u_.uses_s()) throw ConfigError("u_exact may not depend on s");
  for (int k = 0; k < spec_.dim; ++k) {
    du_.push_back(u_.derivative(k));
    std::vector<Expression> row;
    for (int l = 0; l < spec_.dim; ++l) row.push_back(du_[k].derivative(l));
    d2u_.push_back(std::move(row));
  }
}

Vec ManufacturedProblem::gradient(const Vec& x) const {
  Vec g(spec_.dim);
  for (int k = 0; k < spec_.dim; ++k) g(k) = du_[k].eval(x);
  return g;
}

double ManufacturedProblem::source(const Vec& x) const {
  const int n = spec_.dim;
  const Mat a = spec_.coefficients.matrix(x);
  const auto da = spec_.coefficients.gradient(x);
  const Vec g = gradient(x);
  double div = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) div += da[i](i, j) * g(j) + a(i, j) * d2u_[i][j].eval(x);
  const double u = u_.eval(x);
  return -div - spec_.potential(x) * u - spec_.nonlinearity.f(x, u);
}

SourceFn ManufacturedProblem::source_fn() const {
  return [self = *this](const Vec& x) { return self.source(x); };
}

BoundaryFn ManufacturedProblem::boundary() const {
  const double R = spec_.outer_radius;
  return [u = u_, R](double t) { return u.eval(make_vec({R * std::cos(t), R * std::sin(t)})); };
}

field::SolutionField ManufacturedProblem::sample(const grid::PolarGrid& g) const {
  auto f = field::sample_grid(g, [this](const Vec& x) { return u_.eval(x); });
  f.description = "manufactured " + u_.source();
  f.q = spec_.nonlinearity.q();
  f.nonlinearity = core::to_string(spec_.nonlinearity.kind());
  return f;
}

double hessian_asymmetry(const field::SolutionField& u) {
  if (u.representation() != field::Representation::grid2d) return 0.0;
  const grid::PolarOps ops(u.polar());
  const auto g = ops.gradient(u.values());
  const auto h1 = ops.gradient(g[0]);
  const auto h2 = ops.gradient(g[1]);
  const double R = u.polar().R;
  const double scale = std::max({h1[0].cwiseAbs().maxCoeff(), h1[1].cwiseAbs().maxCoeff(), h2[1].cwiseAbs().maxCoeff(),
                                 g[0].cwiseAbs().maxCoeff() / R, g[1].cwiseAbs().maxCoeff() / R,
                                 u.values().cwiseAbs().maxCoeff() / (R * R)});
  if (scale == 0.0) return 0.0;
  return (h1[1] - h2[0]).cwiseAbs().maxCoeff() / scale;
}


namespace {

struct PolarCoef {
  double rr, rt, tt;
};

PolarCoef polar_coef(const core::CoefficientField& a, double r, double t) {
  const double c = std::cos(t), s = std::sin(t);
  const Mat m = a.matrix(make_vec({r * c, r * s}));
  const Eigen::Vector2d nu(c, s), tau(-s, c);
  const Eigen::Matrix2d m2 = m.topLeftCorner(2, 2);
  return {nu.dot(m2 * nu), nu.dot(m2 * tau), tau.dot(m2 * tau)};
}

// -div(A grad u) by fluxes through the faces of polar cells; the pole cell is
// the disk of radius dr/2. Outer ring rows are identities (Dirichlet).
Eigen::SparseMatrix<double> assemble(const core::CoefficientField& a, const grid::PolarGrid& g) {
  const int M = g.M, K = g.K;
  const double dr = g.dr(), dt = g.dtheta();
  auto idx = [&](int i, int j) { return i == 0 ? 0 : 1 + (i - 1) * K + ((j % K) + K) % K; };
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(M) * K * 14);
  auto add = [&](int row, int i, int j, double w) { trip.emplace_back(row, idx(i, j), w); };

  const double rh = 0.5 * dr;
  const double pole_scale = -rh * dt / (std::numbers::pi * rh * rh);
  for (int j = 0; j < K; ++j) {
    const auto c = polar_coef(a, rh, g.theta(j));
    add(0, 1, j, pole_scale * c.rr / dr);
    add(0, 0, 0, -pole_scale * c.rr / dr);
    add(0, 1, j + 1, pole_scale * c.rt / rh / (4 * dt));
    add(0, 1, j - 1, -pole_scale * c.rt / rh / (4 * dt));
  }
  for (int i = 1; i < M; ++i) {
    const double r = g.r(i), rp = r + rh, rm = r - rh;
    for (int j = 0; j < K; ++j) {
      const int row = idx(i, j);
      const double th = g.theta(j);
      const double sr = -1.0 / (r * dr), st = -1.0 / (r * dt);
      // outer radial face
      auto cp = polar_coef(a, rp, th);
      add(row, i + 1, j, sr * rp * cp.rr / dr);
      add(row, i, j, -sr * rp * cp.rr / dr);
      for (auto [ii, jj, sg] : {std::tuple{i + 1, j + 1, 1}, {i, j + 1, 1}, {i + 1, j - 1, -1}, {i, j - 1, -1}})
        add(row, ii, jj, sg * sr * rp * cp.rt / rp / (4 * dt));
      // inner radial face
      auto cm = polar_coef(a, rm, th);
      add(row, i, j, -sr * rm * cm.rr / dr);
      add(row, i - 1, j, sr * rm * cm.rr / dr);
      for (auto [ii, jj, sg] : {std::tuple{i, j + 1, 1}, {i - 1, j + 1, 1}, {i, j - 1, -1}, {i - 1, j - 1, -1}})
        add(row, ii, jj, -sg * sr * rm * cm.rt / rm / (4 * dt));
      // angular faces
      auto ca = polar_coef(a, r, th + 0.5 * dt);
      for (auto [ii, jj, sg] : {std::tuple{i + 1, j, 1}, {i + 1, j + 1, 1}, {i - 1, j, -1}, {i - 1, j + 1, -1}})
        add(row, ii, jj, sg * st * ca.rt / (4 * dr));
      add(row, i, j + 1, st * ca.tt / r / dt);
      add(row, i, j, -st * ca.tt / r / dt);
      auto cb = polar_coef(a, r, th - 0.5 * dt);
      for (auto [ii, jj, sg] : {std::tuple{i + 1, j - 1, 1}, {i + 1, j, 1}, {i - 1, j - 1, -1}, {i - 1, j, -1}})
        add(row, ii, jj, -sg * st * cb.rt / (4 * dr));
      add(row, i, j, -st * cb.tt / r / dt);
      add(row, i, j - 1, st * cb.tt / r / dt);
    }
  }
  for (int j = 0; j < K; ++j) add(idx(M, j), M, j, 1.0);
  Eigen::SparseMatrix<double> L(1 + M * K, 1 + M * K);
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

grid::GridFn unpack(const grid::PolarGrid& g, const Eigen::VectorXd& v) {
  grid::GridFn out(g.M + 1, g.K);
  out.row(0).setConstant(v(0));
  for (int i = 1; i <= g.M; ++i)
    for (int j = 0; j < g.K; ++j) out(i, j) = v(1 + (i - 1) * g.K + j);
  return out;
}

void check_preconditions(const core::ProblemSpec& spec, const BoundaryFn& boundary, const GridControls& c) {
  if (spec.dim != 2) throw DomainError("solve_grid_2d needs N = 2");
  if (!(c.damping >= 0.0 && c.damping < 1.0)) throw DomainError("damping must lie in [0,1)");
  if (!(c.tol > 0.0) || c.max_iters < 1) throw DomainError("bad iteration controls");
  grid::PolarGrid{c.M, c.K, spec.outer_radius}.validate();
  const auto a1 = core::check_A1(spec);
  if (!a1.pass()) throw DomainError("coefficients fail (A1): " + a1.first_failure()->clause);
  const auto& nl = spec.nonlinearity;
  if (nl.kind() == core::NonlinearityKind::none) return;
  const auto a3 = core::check_A3(nl, 2, spec.outer_radius);
  if (!a3.pass()) throw DomainError("nonlinearity fails (A3): " + a3.first_failure()->clause);
  for (int j = 0; j < c.K; ++j)
    if (std::abs(boundary(2 * std::numbers::pi * j / c.K)) >= nl.eps0())
      throw DomainError("boundary data must stay below eps0");
}

GridSolveReport iterate(const core::ProblemSpec& spec, const BoundaryFn& boundary, const GridControls& c,
                        const SourceFn& source) {
  const grid::PolarGrid g{c.M, c.K, spec.outer_radius};
  const int n = 1 + g.M * g.K;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(assemble(spec.coefficients, g));
  if (lu.info() != Eigen::Success) throw ConvergenceError("sparse factorization failed: " + lu.lastErrorMessage(), 0, NAN);

  std::vector<Vec> pts(n);
  std::vector<double> pot(n), src(n, 0.0);
  pts[0] = make_vec({0.0, 0.0});
  for (int i = 1; i <= g.M; ++i)
    for (int j = 0; j < g.K; ++j) pts[1 + (i - 1) * g.K + j] = g.point(i, j);
  for (int k = 0; k < n; ++k) {
    pot[k] = spec.potential(pts[k]);
    if (source) src[k] = source(pts[k]);
  }
  const int first_bnd = 1 + (g.M - 1) * g.K;
  auto rhs = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd b(n);
    for (int k = 0; k < first_bnd; ++k) b(k) = pot[k] * u(k) + spec.nonlinearity.f(pts[k], u(k)) + src[k];
    for (int j = 0; j < g.K; ++j) b(first_bnd + j) = boundary(g.theta(j));
    return b;
  };
  auto solve = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd x = lu.solve(b);
    if (lu.info() != Eigen::Success || !x.allFinite()) throw ConvergenceError("linear solve failed", 0, NAN);
    return x;
  };

  Eigen::VectorXd u = solve(rhs(Eigen::VectorXd::Zero(n)));
  GridSolveReport rep;
  double dist = INFINITY;
  while (rep.iterations < c.max_iters) {
    const Eigen::VectorXd next = c.damping * u + (1.0 - c.damping) * solve(rhs(u));
    dist = (next - u).cwiseAbs().maxCoeff();
    u = next;
    ++rep.iterations;
    rep.distances.push_back(dist);
    if (!std::isfinite(dist)) break;
    if (dist < c.tol) break;
  }
  if (!(dist < c.tol)) throw GridConvergenceError("fixed point did not converge", rep.iterations, dist, unpack(g, u));
  for (std::size_t k = 6; k < rep.distances.size(); ++k)
    if (rep.distances[k] > rep.distances[k - 1]) rep.monotone_after_5 = false;
  rep.field = field::SolutionField::grid2d(g, unpack(g, u));
  return rep;
}

} // namespace

GridSolveReport solve_grid_2d(const core::ProblemSpec& spec, const BoundaryFn& boundary, const GridControls& c,
                              const SourceFn& source) {
  check_preconditions(spec, boundary, c);
  GridSolveReport rep = iterate(spec, boundary, c, source);
  ResidualOptions ro;
  ro.source = source;
  const auto fine = residual_field(spec, rep.field, ro);
  rep.residual_sup = fine.sup();
  const bool halvable = c.M % 2 == 0 && c.K % 8 == 0 && c.M >= 8;
  if (c.estimate_truncation && halvable) {
    GridControls cc = c;
    cc.M /= 2;
    cc.K /= 2;
    const auto coarse = residual_field(spec, iterate(spec, boundary, cc, source).field, ro);
    double d = 0.0;
    for (int i = 0; i <= cc.M; ++i)
      for (int j = 0; j < cc.K; ++j) d = std::max(d, std::abs(coarse.rho_grid(i, j) - fine.rho_grid(2 * i, 2 * j)));
    rep.field.truncation_estimate = d / 3.0;
  }
  rep.field.q = spec.nonlinearity.q();
  rep.field.nonlinearity = core::to_string(spec.nonlinearity.kind());
  rep.field.description = "grid2d " + std::to_string(c.M) + "x" + std::to_string(c.K);
  return rep;
}

} // namespace freqlab::solve
