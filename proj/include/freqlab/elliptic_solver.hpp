#pragma once

#include "freqlab/field.hpp"
#include "freqlab/problem.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace freqlab::solve {

using SourceFn = std::function<double(const Vec&)>;

/// Radial solution of -Lap u = f_q(u) on B_R with u(0) = a, u'(0) = 0.
/// The profile is integrated at h and h/2; the returned field carries the
/// Richardson estimate sup |rho_h - rho_{h/2}| * 16/15 of its residual.
field::SolutionField solve_radial(const core::ProblemSpec& spec, double a, double h = 1e-3);

/// u(x) = P(|x| - r0) with P the one-dimensional dead-core profile
/// (P'' = |P|^{q-2} P, P = 0 on [0, r0]); not a solution in R^N: its residual
/// is 2 f_q(P) + (N-1)/r P'.
field::SolutionField glued_field(int dim, double q, double r0, double R, double h);

struct ResidualOptions {
  /// Radial fields: nodes closer than this to a zero of u are left out
  /// (default 8h when q > 1; only nodes at zeros when q = 1).
  std::optional<double> exclusion;
  /// Extra source g; the residual then refers to -div(A grad u) = Vu + f + g.
  SourceFn source;
};

/// rho = div(A grad u) + V u + f(x,u) sampled on the field's own nodes.
struct Residual {
  field::Representation representation = field::Representation::radial;
  std::vector<double> r;
  std::vector<double> rho;
  std::vector<bool> valid;
  std::vector<double> excluded;  ///< radii left out of sup norms
  grid::GridFn rho_grid;

  double sup() const;
  /// sup |rho| over the closed ball B_r.
  double sup_ball(double radius) const;
};

/// Radial fields need A = id; grid fields use the fourth-order polar
/// operators.
Residual residual_field(const core::ProblemSpec& spec, const field::SolutionField& u, const ResidualOptions& opt = {});

struct GridControls {
  int M = 64;
  int K = 64;
  double damping = 0.5;
  double tol = 1e-10;
  int max_iters = 500;
  /// Solve once more on (M/2, K/2) and store sup |rho_h - rho_2h| / 3.
  bool estimate_truncation = true;
};

struct GridSolveReport {
  field::SolutionField field;
  int iterations = 0;
  std::vector<double> distances;
  double residual_sup = 0.0;
  bool monotone_after_5 = true;
};

using BoundaryFn = std::function<double(double theta)>;

class GridConvergenceError : public ConvergenceError {
public:
  GridConvergenceError(const std::string& what, int iters, double dist, grid::GridFn last)
      : ConvergenceError(what, iters, dist), last_iterate(std::move(last)) {}
  grid::GridFn last_iterate;
};

/// Damped fixed point u <- d u + (1-d) L^{-1}(V u + f(x,u) + g) on the disk of
/// radius spec.outer_radius, L = -div(A grad .) discretized by a conservative
/// finite-volume stencil (second order) with Dirichlet data on the outer ring.
GridSolveReport solve_grid_2d(const core::ProblemSpec& spec, const BoundaryFn& boundary, const GridControls& c = {},
                              const SourceFn& source = {});

/// u_exact chosen by expression; g = -div(A grad u_exact) - V u_exact - f(x, u_exact).
class ManufacturedProblem {
public:
  ManufacturedProblem(core::ProblemSpec spec, Expression u_exact);

  const core::ProblemSpec& spec() const { return spec_; }
  double exact(const Vec& x) const { return u_.eval(x); }
  Vec gradient(const Vec& x) const;
  double source(const Vec& x) const;
  SourceFn source_fn() const;
  BoundaryFn boundary() const;
  field::SolutionField sample(const grid::PolarGrid& g) const;

private:
  core::ProblemSpec spec_;
  Expression u_;
  std::vector<Expression> du_;
  std::vector<std::vector<Expression>> d2u_;
};

/// max |d2 d1 u - d1 d2 u| relative to max(|D^2 u|, |grad u|/R, |u|/R^2) for
/// grid fields (0 for radial ones).
double hessian_asymmetry(const field::SolutionField& u);

} // namespace freqlab::solve
