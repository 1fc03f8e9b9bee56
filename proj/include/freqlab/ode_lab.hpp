#pragma once

#include "freqlab/types.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace freqlab::ode {

/// Which sign the nonlinearity enters with: -u'' = f_q(u) (energy conserving)
/// or u'' = f_q(u) (the branch carrying the non-unique profiles).
enum class OdeSign { good, wrong };

/// f_q(s) = |s|^{q-2} s, with f_1 = sgn and sgn(0) = 0.
double f_q(double s, double q);

struct Crossing {
  double t = 0.0;   ///< located zero of u inside a step
  double du = 0.0;  ///< u'(t)
};

/// Solution samples on a uniform grid t_i = t_begin + i h, plus the zero
/// crossings found by event detection. Dense output is piecewise cubic
/// Hermite in (u, u'); intervals containing a crossing are split there.
struct OdeTrajectory {
  std::vector<double> t, u, du;
  double h = 0.0;
  double q = 1.5;
  int dim = 1;
  double a = 0.0;  ///< u(t_begin)
  double b = 0.0;  ///< u'(t_begin)
  OdeSign sign = OdeSign::good;
  std::vector<Crossing> crossings;
  /// |u_h - u_{h/2}|_inf / 15 when requested, otherwise NaN.
  double error_estimate = NAN;

  std::size_t size() const { return t.size(); }
  double t_begin() const { return t.front(); }
  double t_end() const { return t.back(); }

  double u_at(double s) const;
  double du_at(double s) const;
  /// Crossings strictly inside (t_i, t_{i+1}) for interval i.
  std::vector<Crossing> crossings_in(std::size_t i) const;
};

struct ProfileValue {
  double u = 0.0;
  double u2 = 0.0;  ///< u''
};

/// u(t) = K (t - t0)^{2/(2-q)} for t > t0, 0 otherwise, with
/// K = (2q/(2-q)^2)^{1/(q-2)}; it solves u'' = |u|^{q-2} u. q must lie in (1,2).
ProfileValue counterexample_profile(double q, double t0, double t);
double counterexample_slope(double q, double t0, double t);

/// The glued profile sampled exactly on n+1 uniform points of [t_begin, t_end].
OdeTrajectory counterexample_trajectory(double q, double t0, double t_begin, double t_end, std::size_t n);

struct IntegrateOptions {
  OdeSign sign = OdeSign::good;
  bool estimate_error = false;
};

/// RK4 for -u'' = f_q(u) (or u'' = f_q(u)) on [0, t_end] from (u0, du0).
OdeTrajectory integrate_plane(double q, double u0, double du0, double t_end, double h, const IntegrateOptions& opt = {});

/// Radial reduction u'' + (N-1)/r u' = -f_q(u), u(0) = a, u'(0) = 0, on
/// [0, r_max]. The first step starts at r = 0 with the limiting right-hand
/// side u''(0) = -f_q(a)/N. N = 1 is the plane problem.
OdeTrajectory integrate_radial(int dim, double q, double a, double r_max, double h, const IntegrateOptions& opt = {});

/// Coefficient of the two-term start u(r) = a + c r^2 / 2, i.e. u''(0) = -f_q(a)/N.
double series_start(int dim, double q, double a);

/// E_i = u'_i^2/2 + |u_i|^q/q.
std::vector<double> conserved_energy(const OdeTrajectory& traj);

struct ZeroRecord {
  double r = 0.0;
  double slope = 0.0;  ///< |u'(r)|
  bool degenerate = false;
};

struct ZeroAudit {
  double threshold = 0.0;
  std::vector<ZeroRecord> zeros;
  std::size_t degenerate_count() const;
};

/// Sign changes located by bisection on the dense output, plus contact zeros
/// where the samples vanish (a run of vanishing samples counts once, at the
/// point where u leaves zero). Default threshold: 1e-6 sqrt(2 max E).
ZeroAudit zero_audit(const OdeTrajectory& traj, std::optional<double> threshold = std::nullopt);

/// w(x,t) = (k (t - t0))^{-(q-1)/(2-q)} f_q(u(x)), k = (2-q)/(q-1), with u a
/// radial solution of -Delta u = f_q(u) in R^N; solves w_t = Delta(|w|^{m-1} w)
/// for m = 1/(q-1).
struct PmeField {
  OdeTrajectory base;
  double q = 1.5;
  double t0 = 0.0;
  int dim = 3;
  bool zero = false;  ///< u identically zero

  double m() const { return 1.0 / (q - 1.0); }
  double time_factor(double t) const;
  double w(double r, double t) const;
};

PmeField make_pme_field(const OdeTrajectory& base, double t0);

struct PmeSample {
  double x = 0.0, t = 0.0, w = 0.0, residual = 0.0;
};

struct PmeResidual {
  double max_residual = 0.0;
  double w_inf = 0.0;
  std::vector<PmeSample> samples;
  /// Radii skipped because they lie within the exclusion band of a zero of u.
  std::vector<double> excluded;
};

/// Samples |w_t - Delta(|w|^{m-1} w)| on nx radii (spread over the base
/// trajectory's nodes) times nt times in [t_lo, t_hi]. w_t is a fourth-order
/// central difference in t; the radial Laplacian P'' + (N-1)/r P' of
/// P = |w|^{m-1} w uses fourth-order differences of the sampled P that never
/// straddle a zero of u. Near a zero P has a |r - r*|^{q+1}-type singular part
/// that no polynomial stencil resolves, so radii closer than `exclusion`
/// (default 8 steps) to a zero are skipped and listed.
PmeResidual pme_separated_residual(const PmeField& field, std::size_t nx, std::size_t nt, double t_lo, double t_hi,
                                   std::optional<double> exclusion = std::nullopt);

void write_trajectory_csv(std::ostream& os, const OdeTrajectory& traj);
void write_pme_csv(std::ostream& os, const PmeResidual& res);

} // namespace freqlab::ode
