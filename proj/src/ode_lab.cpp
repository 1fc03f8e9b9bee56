#include "freqlab/ode_lab.hpp"

#include "freqlab/numerics.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta4.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <string>

namespace freqlab::ode {

namespace {

using State = std::array<double, 2>;
using Stepper = boost::numeric::odeint::runge_kutta4<State>;

/// Right-hand side of u' = v, v' = -(N-1)/r v -/+ f(u). `frozen` fixes the
/// sign of f while a zero is approached or left, so each substep sees the
/// smooth branch sigma |u|^{q-1}.
struct System {
  int dim;
  double q;
  OdeSign sign;
  double frozen = 0.0;

  double f(double u) const {
    if (frozen == 0.0) return f_q(u, q);
    return q == 1.0 ? frozen : frozen * std::pow(std::abs(u), q - 1.0);
  }

  void operator()(const State& y, State& dy, double r) const {
    const double fu = sign == OdeSign::good ? -f(y[0]) : f(y[0]);
    dy[0] = y[1];
    if (dim == 1) {
      dy[1] = fu;
    } else if (r == 0.0) {
      dy[1] = fu / dim;
    } else {
      dy[1] = -(dim - 1) / r * y[1] + fu;
    }
  }
};

double hermite(double t0, double t1, double u0, double d0, double u1, double d1, double s, bool derivative, double scale) {
  const double h = t1 - t0;
  if (h <= 0.0) return derivative ? d0 : u0;
  const double x = std::clamp((s - t0) / h, 0.0, 1.0);
  // Slivers between a node and a crossing: divided differences are noise.
  if (h < 1e-6 * scale) return derivative ? d0 + x * (d1 - d0) : u0 + x * (u1 - u0);
  if (!derivative) {
    const double h00 = (1 + 2 * x) * (1 - x) * (1 - x);
    const double h10 = x * (1 - x) * (1 - x);
    const double h01 = x * x * (3 - 2 * x);
    const double h11 = x * x * (x - 1);
    return h00 * u0 + h10 * h * d0 + h01 * u1 + h11 * h * d1;
  }
  const double g00 = 6 * x * x - 6 * x;
  const double g10 = 3 * x * x - 4 * x + 1;
  const double g01 = -6 * x * x + 6 * x;
  const double g11 = 3 * x * x - 2 * x;
  return (g00 * u0 + g01 * u1) / h + g10 * d0 + g11 * d1;
}

double dense(const OdeTrajectory& tr, double s, bool derivative) {
  if (tr.t.empty()) throw DomainError("empty trajectory");
  if (s < tr.t.front() - 1e-12 * tr.h || s > tr.t.back() + 1e-12 * tr.h)
    throw DomainError("dense output requested outside the trajectory");
  std::size_t i = static_cast<std::size_t>(std::floor((s - tr.t.front()) / tr.h));
  i = std::min(i, tr.size() - 2);
  double t0 = tr.t[i], u0 = tr.u[i], d0 = tr.du[i];
  for (const Crossing& c : tr.crossings_in(i)) {
    if (s <= c.t) return hermite(t0, c.t, u0, d0, 0.0, c.du, s, derivative, tr.h);
    t0 = c.t;
    u0 = 0.0;
    d0 = c.du;
  }
  return hermite(t0, tr.t[i + 1], u0, d0, tr.u[i + 1], tr.du[i + 1], s, derivative, tr.h);
}

/// Fixed-step RK4 between output nodes, refined near zeros of u.
///
/// Near a simple zero t* the right-hand side carries the singular part
/// |t - t*|^{q-1}, so the fifth derivative of u grows like d^{q-4} with
/// d = |t - t*|. Substeps of size h d^{1-q/4} (never more than d) keep the local
/// error density at the smooth-step level h^4. Once d drops below h^{5/q} a
/// single frozen-sign step lands on the zero (t* refined by Newton) and the
/// integration restarts from u = 0 on the other branch. For q = 1 the
/// right-hand side is piecewise constant and only the landing step is needed.
OdeTrajectory integrate(System sys, double u0, double du0, double t_end, double h) {
  if (!(h > 0.0)) throw DomainError("step must be positive");
  if (!(t_end > 0.0)) throw DomainError("integration length must be positive");
  const std::size_t n = static_cast<std::size_t>(std::llround(t_end / h));
  if (n < 1 || std::abs(n * h - t_end) > 1e-9 * t_end)
    throw DomainError("integration length must be a multiple of the step");

  OdeTrajectory tr;
  tr.h = h;
  tr.q = sys.q;
  tr.dim = sys.dim;
  tr.a = u0;
  tr.b = du0;
  tr.sign = sys.sign;
  tr.t.reserve(n + 1);
  tr.u.reserve(n + 1);
  tr.du.reserve(n + 1);
  tr.t.push_back(0.0);
  tr.u.push_back(u0);
  tr.du.push_back(du0);

  const double q = sys.q;
  const bool graded = q > 1.0;
  const double alpha = 1.0 - q / 4.0;
  const double land = graded ? std::pow(h, 5.0 / q) : 0.0;
  Stepper st;
  State y{u0, du0};
  double t = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double node = i * h;
    int guard = 0;
    while (t < node) {
      if (++guard > 100000000) throw IntegrationError("substep budget exhausted", t);
      double sigma = sgn(y[0]);
      if (sigma == 0.0) sigma = sgn(y[1]);
      sys.frozen = sigma;
      const double remaining = node - t;
      double step = remaining;
      const bool approaching = y[0] * y[1] < 0.0;
      const double d = y[1] != 0.0 ? std::abs(y[0] / y[1]) : INFINITY;

      if (approaching && d <= remaining && (d < land || !graded)) {
        // Trial over the whole remaining interval tells whether the zero is
        // really inside it (q = 1 has no grading to lead us here).
        State probe = y;
        st.do_step(sys, probe, t, std::min(remaining, graded ? 2.0 * d : remaining));
        if (sgn(probe[0]) != sgn(y[0]) || probe[0] == 0.0) {
          double tau = d;
          State at{};
          for (int it = 0; it < 60; ++it) {
            at = y;
            st.do_step(sys, at, t, tau);
            const double next = std::clamp(tau - (at[1] != 0.0 ? at[0] / at[1] : 0.0), 0.0, remaining);
            const bool done = std::abs(next - tau) <= 1e-16 * std::max(tau, h);
            tau = next;
            if (done) break;
          }
          at = y;
          st.do_step(sys, at, t, tau);
          t += tau;
          y = {0.0, at[1]};
          if (node - t > 1e-13 * h) tr.crossings.push_back({t, y[1]});
          else t = node;
          continue;
        }
      }

      if (graded) {
        if (approaching) step = std::min({step, h * std::pow(d, alpha), 0.5 * d});
        else step = std::min(step, std::max(land, std::min(h * std::pow(d, alpha), d)));
      }
      State next = y;
      st.do_step(sys, next, t, step);
      if (sgn(next[0]) == -sgn(y[0]) && y[0] != 0.0) {
        // Crossed without the estimate seeing it coming: retry smaller.
        if (step > land) {
          const double shrink = 0.25 * step;
          next = y;
          st.do_step(sys, next, t, shrink);
          if (sgn(next[0]) == -sgn(y[0])) {
            y[0] = 0.0;  // within land of the zero; accept the landing
            y[1] = next[1];
            t += shrink;
            tr.crossings.push_back({t, y[1]});
            continue;
          }
          step = shrink;
        }
      }
      if (!std::isfinite(next[0]) || !std::isfinite(next[1]))
        throw IntegrationError("non-finite state during integration", t);
      y = next;
      t = (step == remaining) ? node : t + step;
    }
    tr.t.push_back(node);
    tr.u.push_back(y[0]);
    tr.du.push_back(y[1]);
  }
  return tr;
}

OdeTrajectory with_estimate(OdeTrajectory coarse, const OdeTrajectory& fine) {
  double err = 0.0;
  for (std::size_t i = 0; i < coarse.size(); ++i) err = std::max(err, std::abs(coarse.u[i] - fine.u[2 * i]));
  coarse.error_estimate = err / 15.0;
  return coarse;
}

} // namespace

double f_q(double s, double q) {
  if (s == 0.0) return 0.0;
  if (q == 1.0) return sgn(s);
  return sgn(s) * std::pow(std::abs(s), q - 1.0);
}

double OdeTrajectory::u_at(double s) const { return dense(*this, s, false); }
double OdeTrajectory::du_at(double s) const { return dense(*this, s, true); }

std::vector<Crossing> OdeTrajectory::crossings_in(std::size_t i) const {
  std::vector<Crossing> out;
  if (i + 1 >= t.size()) return out;
  const double lo = t[i], hi = t[i + 1];
  auto it = std::upper_bound(crossings.begin(), crossings.end(), lo,
                             [](double v, const Crossing& c) { return v < c.t; });
  for (; it != crossings.end() && it->t < hi; ++it) out.push_back(*it);
  return out;
}

ProfileValue counterexample_profile(double q, double t0, double t) {
  if (!(q > 1.0 && q < 2.0)) throw DomainError("counterexample profile needs q in (1,2)");
  if (t <= t0) return {0.0, 0.0};
  const double k = std::pow(2.0 * q / ((2.0 - q) * (2.0 - q)), 1.0 / (q - 2.0));
  const double p = 2.0 / (2.0 - q);
  const double s = t - t0;
  return {k * std::pow(s, p), k * p * (p - 1.0) * std::pow(s, p - 2.0)};
}

double counterexample_slope(double q, double t0, double t) {
  if (!(q > 1.0 && q < 2.0)) throw DomainError("counterexample profile needs q in (1,2)");
  if (t <= t0) return 0.0;
  const double k = std::pow(2.0 * q / ((2.0 - q) * (2.0 - q)), 1.0 / (q - 2.0));
  const double p = 2.0 / (2.0 - q);
  return k * p * std::pow(t - t0, p - 1.0);
}

OdeTrajectory counterexample_trajectory(double q, double t0, double t_begin, double t_end, std::size_t n) {
  if (n < 1 || !(t_end > t_begin)) throw DomainError("bad sampling interval");
  OdeTrajectory tr;
  tr.h = (t_end - t_begin) / n;
  tr.q = q;
  tr.dim = 1;
  tr.sign = OdeSign::wrong;
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = i == n ? t_end : t_begin + i * tr.h;
    tr.t.push_back(t);
    tr.u.push_back(counterexample_profile(q, t0, t).u);
    tr.du.push_back(counterexample_slope(q, t0, t));
  }
  tr.a = tr.u.front();
  tr.b = tr.du.front();
  return tr;
}

OdeTrajectory integrate_plane(double q, double u0, double du0, double t_end, double h, const IntegrateOptions& opt) {
  if (!(q >= 1.0 && q < 2.0)) throw DomainError("q must lie in [1,2)");
  const System sys{1, q, opt.sign};
  OdeTrajectory tr = integrate(sys, u0, du0, t_end, h);
  if (opt.estimate_error) tr = with_estimate(std::move(tr), integrate(sys, u0, du0, t_end, 0.5 * h));
  return tr;
}

OdeTrajectory integrate_radial(int dim, double q, double a, double r_max, double h, const IntegrateOptions& opt) {
  if (dim < 1) throw DomainError("dimension must be positive");
  if (a == 0.0) throw DomainError("radial shooting needs a != 0");
  if (!(q >= 1.0 && q < 2.0)) throw DomainError("q must lie in [1,2)");
  const System sys{dim, q, opt.sign};
  OdeTrajectory tr = integrate(sys, a, 0.0, r_max, h);
  if (opt.estimate_error) tr = with_estimate(std::move(tr), integrate(sys, a, 0.0, r_max, 0.5 * h));
  return tr;
}

double series_start(int dim, double q, double a) { return -f_q(a, q) / dim; }

std::vector<double> conserved_energy(const OdeTrajectory& traj) {
  std::vector<double> e(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i)
    e[i] = 0.5 * traj.du[i] * traj.du[i] + std::pow(std::abs(traj.u[i]), traj.q) / traj.q;
  return e;
}

std::size_t ZeroAudit::degenerate_count() const {
  return static_cast<std::size_t>(std::count_if(zeros.begin(), zeros.end(), [](const ZeroRecord& z) { return z.degenerate; }));
}

ZeroAudit zero_audit(const OdeTrajectory& traj, std::optional<double> threshold) {
  ZeroAudit out;
  const auto e = conserved_energy(traj);
  const double emax = e.empty() ? 0.0 : *std::max_element(e.begin(), e.end());
  out.threshold = threshold.value_or(1e-6 * std::sqrt(2.0 * emax));
  auto push = [&](double r, double slope) {
    out.zeros.push_back({r, slope, slope == 0.0 || slope < out.threshold});
  };

  const std::size_t n = traj.size();
  std::size_t i = 0;
  while (i < n) {
    if (traj.u[i] == 0.0) {
      std::size_t j = i;
      while (j + 1 < n && traj.u[j + 1] == 0.0) ++j;
      const std::size_t at = (j + 1 < n || i == 0) ? j : i;
      push(traj.t[at], std::abs(traj.du[at]));
      i = j + 1;
      continue;
    }
    if (i + 1 < n && traj.u[i + 1] != 0.0 && traj.u[i] * traj.u[i + 1] < 0.0) {
      auto g = [&](double s) { return traj.u_at(s); };
      const auto br = boost::math::tools::bisect(g, traj.t[i], traj.t[i + 1], boost::math::tools::eps_tolerance<double>(52));
      const double r = 0.5 * (br.first + br.second);
      push(r, std::abs(traj.du_at(r)));
    }
    ++i;
  }
  return out;
}

double PmeField::time_factor(double t) const {
  if (!(t > t0)) throw DomainError("PME field needs t > t0");
  const double k = (2.0 - q) / (q - 1.0);
  return std::pow(k * (t - t0), -(q - 1.0) / (2.0 - q));
}

double PmeField::w(double r, double t) const {
  if (zero) return 0.0;
  return time_factor(t) * f_q(base.u_at(r), q);
}

PmeField make_pme_field(const OdeTrajectory& base, double t0) {
  if (!(base.q > 1.0 && base.q < 2.0)) throw DomainError("PME ansatz needs q in (1,2)");
  PmeField f;
  f.base = base;
  f.q = base.q;
  f.t0 = t0;
  f.dim = base.dim;
  f.zero = std::all_of(base.u.begin(), base.u.end(), [](double v) { return v == 0.0; });
  return f;
}

PmeResidual pme_separated_residual(const PmeField& field, std::size_t nx, std::size_t nt, double t_lo, double t_hi,
                                   std::optional<double> exclusion) {
  if (!(t_lo > field.t0)) throw DomainError("PME residual grid must satisfy t > t0");
  if (nx < 2 || nt < 1) throw DomainError("PME residual grid too small");
  const OdeTrajectory& b = field.base;
  const std::size_t n = b.size();
  const double h = b.h;
  const int dim = field.dim;
  const double band = exclusion.value_or(8.0 * h);

  // Zeros of u: recorded crossings plus sign changes and vanishing samples.
  std::vector<double> zeros;
  for (const Crossing& c : b.crossings) zeros.push_back(c.t);
  for (std::size_t i = 0; i < n; ++i) {
    if (b.u[i] == 0.0) zeros.push_back(b.t[i]);
    if (i + 1 < n && b.u[i] * b.u[i + 1] < 0.0) zeros.push_back(0.5 * (b.t[i] + b.t[i + 1]));
  }
  auto near_zero = [&](double r) {
    return std::any_of(zeros.begin(), zeros.end(), [&](double z) { return std::abs(r - z) < band; });
  };

  // Samples of P = |w|^{m-1} w are mirrored through the pole (P is even in r)
  // so that central stencils reach r = 0.
  const bool pole = dim > 1 && b.t.front() == 0.0 && n >= 3;
  const std::size_t off = pole ? 2 : 0;
  std::vector<bool> smooth(n + off - 1, true);
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (!b.crossings_in(i).empty() || b.u[i] * b.u[i + 1] <= 0.0) smooth[i + off] = false;

  std::vector<std::size_t> rows;
  for (std::size_t jx = 0; jx < nx; ++jx) rows.push_back(jx * (n - 1) / (nx - 1));

  const double m = field.m();
  PmeResidual out;
  std::vector<double> pm(n + off);
  for (std::size_t jt = 0; jt < nt; ++jt) {
    const double t = nt == 1 ? t_lo : t_lo + (t_hi - t_lo) * jt / (nt - 1);
    const double c = field.zero ? 0.0 : field.time_factor(t);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = c * f_q(b.u[i], field.q);
      pm[i + off] = std::pow(std::abs(w), m - 1.0) * w;
    }
    if (pole) {
      pm[0] = pm[4];
      pm[1] = pm[3];
    }
    const auto p1 = num::derivative(pm, h, smooth);
    const auto p2 = num::second_derivative(pm, h, smooth);

    for (std::size_t i : rows) {
      const double r = b.t[i];
      PmeSample s{r, t, 0.0, 0.0};
      if (!field.zero && near_zero(r)) {
        if (jt == 0) out.excluded.push_back(r);
        continue;
      }
      if (!field.zero) {
        const double fu = f_q(b.u[i], field.q);
        auto w_of = [&](double tt) { return field.time_factor(tt) * fu; };
        const double d = 2e-3 * (t - field.t0);
        const double wt = (w_of(t - 2 * d) - 8 * w_of(t - d) + 8 * w_of(t + d) - w_of(t + 2 * d)) / (12 * d);
        double lap = p2[i + off];
        if (dim > 1) lap = r == 0.0 ? dim * p2[i + off] : lap + (dim - 1) / r * p1[i + off];
        s.w = c * fu;
        s.residual = wt - lap;
      }
      out.max_residual = std::max(out.max_residual, std::abs(s.residual));
      out.w_inf = std::max(out.w_inf, std::abs(s.w));
      out.samples.push_back(s);
    }
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const OdeTrajectory& traj) {
  os << "t,u,du\n";
  char buf[96];
  for (std::size_t i = 0; i < traj.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", traj.t[i], traj.u[i], traj.du[i]);
    os << buf;
  }
}

void write_pme_csv(std::ostream& os, const PmeResidual& res) {
  os << "x,t,w,residual\n";
  char buf[128];
  for (const auto& s : res.samples) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", s.x, s.t, s.w, s.residual);
    os << buf;
  }
}

} // namespace freqlab::ode
