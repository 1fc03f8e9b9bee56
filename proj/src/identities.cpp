#include "freqlab/identities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace freqlab::freq {

namespace {

using field::Representation;

bool is_radial(const FieldIntegrals& I) { return I.representation == Representation::radial; }

double pick(double given, const FieldIntegrals& I) {
  if (given > 0.0) return given;
  return is_radial(I) ? 1e-6 : 5e-5;
}

bool contains(const std::vector<double>& v, double x) {
  return std::any_of(v.begin(), v.end(), [&](double y) { return std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(x)); });
}

struct Derivative {
  double value = 0.0;  ///< five-point central difference
  double spread = 0.0; ///< |five-point - three-point|
};

Derivative central(const std::vector<double>& f, double h, std::size_t k) {
  const double d5 = (f[k - 2] - 8 * f[k - 1] + 8 * f[k + 1] - f[k + 2]) / (12 * h);
  const double d3 = (f[k + 1] - f[k - 1]) / (2 * h);
  return {d5, std::abs(d5 - d3)};
}

// Audited indices for r-derivatives: full five-point stencils, away from
// radii flagged as non-smooth.
std::vector<std::size_t> stencil_indices(const FieldIntegrals& I, IdentityReport& rep,
                                         const std::vector<double>* need_positive = nullptr, double floor = 0.0) {
  std::vector<std::size_t> out;
  const std::size_t n = I.size();
  for (std::size_t k = 2; k + 2 < n; ++k) {
    bool ok = true;
    for (std::size_t m = k - 2; m <= k + 2 && ok; ++m) {
      if (contains(I.nonsmooth, I.profile.r[m])) ok = false;
      if (need_positive && !((*need_positive)[m] > floor)) ok = false;
    }
    if (ok)
      out.push_back(k);
    else
      rep.excluded.push_back(I.profile.r[k]);
  }
  return out;
}

void push(IdentityReport& rep, double r, double lhs, double rhs, double scale, std::vector<double>& scales) {
  rep.r.push_back(r);
  rep.lhs.push_back(lhs);
  rep.rhs.push_back(rhs);
  rep.abs_residual.push_back(std::abs(lhs - rhs));
  scales.push_back(scale);
}

// Relative residuals against the largest scale; applies the tolerance.
void finish(IdentityReport& rep, const std::vector<double>& scales, double diff_spread = 0.0) {
  const double smax = scales.empty() ? 0.0 : *std::max_element(scales.begin(), scales.end());
  rep.rel_residual.clear();
  for (double a : rep.abs_residual) rep.rel_residual.push_back(smax > 0.0 ? a / smax : a);
  rep.max_relative = rep.rel_residual.empty() ? 0.0 : *std::max_element(rep.rel_residual.begin(), rep.rel_residual.end());
  rep.effective_tolerance = rep.tolerance;
  if (rep.r.size() < 3) {
    rep.flagged = true;
    rep.note += (rep.note.empty() ? "" : "; ") + std::string("fewer than three audited radii");
  }
  // The three-point/five-point spread bounds the three-point error; when it
  // exceeds the budget by 1000x the radius grid does not resolve the profile.
  const double spread_rel = smax > 0.0 ? diff_spread / smax : 0.0;
  rep.scalars["differentiation_spread"] = spread_rel;
  if (spread_rel > 1e3 * rep.tolerance) {
    rep.flagged = true;
    rep.effective_tolerance = std::max(rep.tolerance, spread_rel / 1e3);
    rep.note += (rep.note.empty() ? "" : "; ") + std::string("radius grid too coarse; tolerance inflated");
  }
  rep.pass = !rep.r.empty() && rep.max_relative <= rep.effective_tolerance;
}

double abs_sum(std::initializer_list<double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

bool homogeneous(const core::ProblemSpec& spec) { return spec.nonlinearity.kind() == core::NonlinearityKind::homogeneous; }

void require_model(const core::ProblemSpec& spec, const FieldIntegrals& I, const char* what) {
  if (!I.identity_a || !spec.potential.is_zero() || spec.nonlinearity.superlinear() ||
      !(homogeneous(spec) || spec.nonlinearity.kind() == core::NonlinearityKind::none))
    throw DomainError(std::string(what) + " needs A = id, V = 0 and f = f_q (or f = 0)");
}

} // namespace

nlohmann::ordered_json IdentityReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = kIdentitySchema;
  j["identity"] = name;
  j["kind"] = inequality ? "inequality" : "identity";
  j["asserted"] = asserted;
  j["tolerance"] = tolerance;
  j["effective_tolerance"] = effective_tolerance;
  j["max_relative_residual"] = max_relative;
  j["flagged"] = flagged;
  j["note"] = note;
  j["verdict"] = pass ? "pass" : "fail";
  j["r"] = r;
  j["lhs"] = lhs;
  j["rhs"] = rhs;
  j["abs_residual"] = abs_residual;
  j["rel_residual"] = rel_residual;
  for (const auto& [k, v] : columns) j["columns"][k] = v;
  for (const auto& [k, v] : scalars) j["scalars"][k] = v;
  j["excluded_radii"] = excluded;
  return j;
}

IdentityReport verify_H_prime(const FieldIntegrals& I, const Tolerances& t) {
  IdentityReport rep;
  rep.name = "H_prime";
  rep.tolerance = pick(t.h_prime, I);
  const auto& P = I.profile;
  const int n = I.dim;
  std::vector<double> scales, model, general, dform;
  double spread = 0.0, dmax = 0.0;
  for (std::size_t k : stencil_indices(I, rep)) {
    const auto d = central(P.H, I.spacing, k);
    const double r = P.r[k];
    const double rhs = 2 * P.surfaceD[k] + I.S_u2_divAr[k];
    push(rep, r, d.value, rhs, abs_sum({d.value, 2 * P.surfaceD[k], I.S_u2_divAr[k]}), scales);
    general.push_back(d.value - rhs);
    // For an exact solution surfaceD = D; the gap is int_B u rho.
    dform.push_back(d.value - 2 * P.D[k] - I.S_u2_divAr[k]);
    dmax = std::max(dmax, std::abs(dform.back()));
    if (I.identity_a) model.push_back(d.value - (n - 1) / r * P.H[k] - 2 * P.surfaceD[k]);
    spread = std::max(spread, d.spread);
  }
  rep.columns["residual_general"] = general;
  rep.columns["residual_D_form"] = dform;
  if (I.identity_a) rep.columns["residual_model"] = model;
  rep.note = I.identity_a ? "model and general forms" : "general form";
  finish(rep, scales, spread);
  const double smax = scales.empty() ? 0.0 : *std::max_element(scales.begin(), scales.end());
  rep.scalars["max_relative_D_form"] = smax > 0.0 ? dmax / smax : dmax;
  return rep;
}

IdentityReport verify_pohozaev_model(const core::ProblemSpec& spec, const FieldIntegrals& I, const Tolerances& t) {
  require_model(spec, I, "the model Pohozaev identity");
  IdentityReport rep;
  rep.name = "pohozaev_model";
  rep.tolerance = pick(t.pohozaev, I);
  const auto& P = I.profile;
  const int n = I.dim;
  const bool hom = homogeneous(spec);
  const double q = spec.nonlinearity.q();
  const double C = core::c_constant(n, q);
  std::vector<double> scales, defect, correction;
  double spread = 0.0;
  for (std::size_t k : stencil_indices(I, rep)) {
    const auto d = central(P.D, I.spacing, k);
    const double r = P.r[k];
    // With f = f_q, f u = |u|^q.
    const double t1 = (n - 2) / r * P.D[k];
    const double t2 = hom ? -C / (q * r) * I.B_Vu2_fu[k] : 0.0;
    const double t3 = 2 * I.S_unu2[k];
    const double t4 = hom ? (2 - q) / q * I.S_Vu2_fu[k] : 0.0;
    const double corr = -2 / r * I.B_Zgu_rho[k];
    const double plain = t1 + t2 + t3 + t4;
    push(rep, r, d.value, plain + corr, abs_sum({d.value, t1, t2, t3, t4, corr}), scales);
    defect.push_back(d.value - plain);
    correction.push_back(corr);
    spread = std::max(spread, d.spread);
  }
  rep.columns["defect"] = defect;
  rep.columns["correction"] = correction;
  double cmax = 0.0, mismatch = 0.0;
  for (std::size_t i = 0; i < defect.size(); ++i) {
    cmax = std::max(cmax, std::abs(correction[i]));
    mismatch = std::max(mismatch, std::abs(defect[i] - correction[i]));
  }
  rep.scalars["correction_sup"] = cmax;
  rep.scalars["defect_match"] = cmax > 0.0 ? mismatch / cmax : 0.0;
  rep.scalars["C_Nq"] = C;
  finish(rep, scales, spread);
  return rep;
}

std::vector<IdentityReport> verify_rellich_general(const FieldIntegrals& I, const Tolerances& t) {
  if (I.B_Z_gradE.empty()) throw DomainError("the general Rellich identities need a grid field");
  IdentityReport a9, a10;
  a9.name = "rellich_A9";
  a10.name = "rellich_A10";
  a9.tolerance = a10.tolerance = t.rellich;
  const auto& P = I.profile;
  std::vector<double> s9, s10;
  std::vector<double> corr;
  for (std::size_t k = 0; k < I.size(); ++k) {
    const double r = P.r[k];
    const double t1 = I.B_Z_gradA[k], bd = 2 * I.S_Zgu_unu[k], eq = 2 * I.B_Zgu_lin[k], t4 = -2 * I.B_A_dZ[k];
    const double c = -2 * I.B_Zgu_rho[k];
    push(a9, r, I.B_Z_gradE[k], t1 + bd + eq + t4 + c, abs_sum({I.B_Z_gradE[k], t1, bd, eq, t4, c}), s9);
    const double dz = I.B_divZ_E[k];
    push(a10, r, r * I.S_E[k], dz + t1 + bd + t4 + eq + c, abs_sum({r * I.S_E[k], dz, t1, bd, t4, eq, c}), s10);
    corr.push_back(c);
  }
  a9.columns["correction"] = corr;
  a10.columns["correction"] = corr;
  finish(a9, s9);
  finish(a10, s10);
  return {a9, a10};
}

IdentityReport verify_N_prime_bound(const core::ProblemSpec& spec, const FieldIntegrals& I, const Tolerances& t) {
  require_model(spec, I, "the N' bound");
  IdentityReport rep;
  rep.name = "N_prime_bound";
  rep.inequality = true;
  rep.tolerance = t.cs_gap;
  const auto& P = I.profile;
  const int n = I.dim;
  const bool hom = homogeneous(spec);
  const double q = spec.nonlinearity.q();
  const double C = core::c_constant(n, q);
  std::vector<double> Nv(I.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < I.size(); ++k)
    if (P.N[k]) Nv[k] = *P.N[k];
  std::vector<double> cs, margin, slack, exact;
  bool ok = true;
  for (std::size_t k : stencil_indices(I, rep, &P.H, P.h_floor)) {
    const double r = P.r[k], H = P.H[k], sD = P.surfaceD[k], D = P.D[k];
    const auto d = central(Nv, I.spacing, k);
    double bracket = -2 * I.B_Zgu_rho[k] + 2 * r * sD * (sD - D) / H;
    if (hom) bracket += r * (2 - q) / q * I.S_Vu2_fu[k] - C / q * I.B_Vu2_fu[k];
    const double rhs = bracket / H;
    const double gap = I.S_unu2[k] - sD * sD / H;
    const double m = d.value - rhs;
    const double sl = d.spread + 1e-10 * (std::abs(d.value) + std::abs(rhs) + std::abs(Nv[k]) / r);
    rep.r.push_back(r);
    rep.lhs.push_back(d.value);
    rep.rhs.push_back(rhs);
    rep.abs_residual.push_back(std::max(0.0, -m));
    rep.rel_residual.push_back(sl > 0 ? std::max(0.0, -m) / sl : 0.0);
    cs.push_back(gap);
    margin.push_back(m);
    slack.push_back(sl);
    exact.push_back(m - 2 * r * gap / H);
    if (m < -sl || gap < -t.cs_gap) ok = false;
  }
  rep.columns["cs_gap"] = cs;
  rep.columns["margin"] = margin;
  rep.columns["slack"] = slack;
  rep.columns["identity_residual"] = exact;
  rep.scalars["min_cs_gap"] = cs.empty() ? 0.0 : *std::min_element(cs.begin(), cs.end());
  rep.max_relative = rep.rel_residual.empty() ? 0.0 : *std::max_element(rep.rel_residual.begin(), rep.rel_residual.end());
  rep.effective_tolerance = rep.tolerance;
  rep.note = "pass iff margin >= -slack at every radius and cs_gap >= -tolerance";
  rep.pass = ok && !rep.r.empty();
  return rep;
}

IdentityReport verify_u2_bounds(const core::ProblemSpec& spec, const FieldIntegrals& I) {
  IdentityReport rep;
  rep.name = "u2_bound";
  rep.inequality = true;
  rep.tolerance = 1e-12;
  const auto& nl = spec.nonlinearity;
  if (nl.kind() == core::NonlinearityKind::none) throw DomainError("the u^2 bound needs a sublinear nonlinearity");
  const double q = nl.q();
  const double K = std::pow(nl.eps0(), q) / nl.kappa2();
  std::vector<double> eff;
  bool ok = true;
  double worst = 0.0;
  for (std::size_t k = 0; k < I.size(); ++k) {
    const double lhs = I.S_u2[k];
    const double base = std::pow(I.S_linf[k], 2 - q) * I.profile.dprime[k];
    const double rhs = K * base;
    rep.r.push_back(I.profile.r[k]);
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(rhs);
    rep.abs_residual.push_back(std::max(0.0, lhs - rhs));
    rep.rel_residual.push_back(rhs > 0 ? std::max(0.0, lhs - rhs) / rhs : (lhs > 0 ? 1.0 : 0.0));
    eff.push_back(base > 0 ? lhs / base : 0.0);
    if (lhs > rhs * (1 + rep.tolerance)) ok = false;
    worst = std::max(worst, rep.rel_residual.back());
  }
  rep.columns["effective_constant"] = eff;
  rep.scalars["bound_constant"] = K;
  rep.scalars["max_effective_constant"] = eff.empty() ? 0.0 : *std::max_element(eff.begin(), eff.end());
  rep.max_relative = worst;
  rep.effective_tolerance = rep.tolerance;
  rep.pass = ok && !rep.r.empty();
  return rep;
}

IdentityReport verify_log_derivative(const FieldIntegrals& I, const Tolerances& t) {
  if (!I.identity_a) throw DomainError("the log-derivative identity is checked for A = id");
  IdentityReport rep;
  rep.name = "log_derivative";
  rep.tolerance = pick(t.log_derivative, I);
  rep.note = "chain-rule form H'/H - (N-1)/r; residuals weighted by H";
  const auto& P = I.profile;
  const int n = I.dim;
  // log H is singular at zeros of a radial profile; differencing H and
  // weighting by H keeps the comparison well conditioned there.
  std::vector<double> scales;
  double spread = 0.0;
  for (std::size_t k : stencil_indices(I, rep, &P.H, P.h_floor)) {
    const auto d = central(P.H, I.spacing, k);
    const double r = P.r[k], H = P.H[k];
    const double lhs = d.value / H - (n - 1) / r;
    const double rhs = 2 * *P.N[k] / r + 2 * (P.surfaceD[k] - P.D[k]) / H;
    rep.r.push_back(r);
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(rhs);
    rep.abs_residual.push_back(std::abs(lhs - rhs) * H);
    scales.push_back(abs_sum({d.value, (n - 1) / r * H, 2 * P.D[k], 2 * (P.surfaceD[k] - P.D[k])}));
    spread = std::max(spread, d.spread);
  }
  finish(rep, scales, spread);
  return rep;
}

IdentityReport verify_f_Z_identity(const FieldIntegrals& I, const Tolerances& t) {
  IdentityReport rep;
  rep.name = "f_Z_identity";
  rep.tolerance = pick(t.kinematic, I);
  std::vector<double> scales;
  for (std::size_t k = 0; k < I.size(); ++k) {
    const double r = I.profile.r[k];
    const double a = r * I.profile.dprime[k], b = -I.B_F_divZ[k], c = -I.B_gradF_Z[k];
    push(rep, r, I.B_f_Zgu[k], a + b + c, abs_sum({I.B_f_Zgu[k], a, b, c}), scales);
  }
  finish(rep, scales);
  return rep;
}

IdentityReport verify_surface_F_bound(const core::ProblemSpec& spec, const FieldIntegrals& I) {
  IdentityReport rep;
  rep.name = "surface_F_bound";
  rep.inequality = true;
  rep.tolerance = 1e-12;
  const double q = spec.nonlinearity.q();
  bool ok = true;
  double worst = 0.0;
  for (std::size_t k = 0; k < I.size(); ++k) {
    const double lhs = I.S_2F_fu[k], rhs = (2 - q) * I.profile.dprime[k];
    const double scale = std::abs(lhs) + std::abs(rhs);
    rep.r.push_back(I.profile.r[k]);
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(rhs);
    rep.abs_residual.push_back(std::max(0.0, rhs - lhs));
    rep.rel_residual.push_back(scale > 0 ? std::max(0.0, rhs - lhs) / scale : 0.0);
    worst = std::max(worst, rep.rel_residual.back());
    if (rhs - lhs > rep.tolerance * scale) ok = false;
  }
  rep.max_relative = worst;
  rep.effective_tolerance = rep.tolerance;
  rep.pass = ok && !rep.r.empty();
  return rep;
}

IdentityReport verify_D_forms(const FieldIntegrals& I, const Tolerances& t) {
  IdentityReport rep;
  rep.name = "D_forms";
  rep.tolerance = pick(t.kinematic, I);
  std::vector<double> scales;
  for (std::size_t k = 0; k < I.size(); ++k) {
    const auto& P = I.profile;
    push(rep, P.r[k], P.surfaceD[k], P.D[k] + I.B_u_rho[k],
         abs_sum({P.surfaceD[k], P.D1[k], I.B_Vu2_fu[k], I.B_u_rho[k]}), scales);
  }
  finish(rep, scales);
  return rep;
}

IdentityReport verify_d_monotone(const FieldIntegrals& I) {
  IdentityReport rep;
  rep.name = "d_monotone";
  rep.inequality = true;
  const auto& P = I.profile;
  const double dmax = P.d.empty() ? 0.0 : *std::max_element(P.d.begin(), P.d.end());
  rep.tolerance = 1e-13;
  const double slack = rep.tolerance * std::max(dmax, 1e-300);
  bool ok = true;
  for (std::size_t k = 0; k < I.size(); ++k) {
    const double step = k == 0 ? P.d[0] : P.d[k] - P.d[k - 1];
    const double worst = std::min({step, P.d[k], P.dprime[k]});
    rep.r.push_back(P.r[k]);
    rep.lhs.push_back(step);
    rep.rhs.push_back(0.0);
    rep.abs_residual.push_back(std::max(0.0, -worst));
    rep.rel_residual.push_back(dmax > 0 ? std::max(0.0, -worst) / dmax : 0.0);
    if (worst < -slack) ok = false;
  }
  rep.columns["d"] = P.d;
  rep.columns["dprime"] = P.dprime;
  rep.max_relative = rep.rel_residual.empty() ? 0.0 : *std::max_element(rep.rel_residual.begin(), rep.rel_residual.end());
  rep.effective_tolerance = rep.tolerance;
  rep.pass = ok;
  return rep;
}

IdentityReport verify_z_field(const FieldIntegrals& I, const Tolerances& t) {
  IdentityReport rep;
  rep.name = "z_field";
  rep.tolerance = t.z_nu;
  rep.effective_tolerance = t.z_nu;
  const double R = I.profile.r.empty() ? 1.0 : I.profile.r.back();
  rep.scalars["max_Z_nu_defect"] = I.max_Z_nu_defect;
  double worst = I.max_Z_nu_defect / R;
  if (I.identity_a) {
    rep.scalars["max_mu_defect"] = I.max_mu_defect;
    rep.scalars["max_Z_defect"] = I.max_Z_defect / R;
    rep.scalars["max_divZ_defect"] = I.max_divZ_defect / I.dim;
    worst = std::max({worst, I.max_mu_defect, I.max_Z_defect / R, I.max_divZ_defect / I.dim});
  }
  rep.max_relative = worst;
  rep.note = is_radial(I) ? "radial reduction: Z = x by construction" : "closed-form entry gradients";
  rep.pass = worst <= rep.tolerance;
  return rep;
}

IdentityReport fitted_constants(const FieldIntegrals& I) {
  IdentityReport rep;
  rep.name = "fitted_constants";
  rep.asserted = false;
  rep.pass = true;
  rep.note = "empirical sizes of O(1)/O(r) terms; reported, not asserted";
  const auto& P = I.profile;
  const int n = I.dim;
  double derH = 0.0, d1 = 0.0;
  std::vector<double> cH, cD1;
  for (std::size_t k : stencil_indices(I, rep, &P.H, P.h_floor)) {
    const double r = P.r[k];
    const double hp = central(P.H, I.spacing, k).value;
    const double c = (hp - 2 * P.D[k] - (n - 1) / r * P.H[k]) / P.H[k];
    const double d1p = central(P.D1, I.spacing, k).value;
    const double e = P.D1[k] != 0.0
                         ? (d1p - (n - 2) / r * P.D1[k] - 2 * I.S_unu2[k] - 2 / r * I.B_Zgu_lin[k]) / P.D1[k]
                         : 0.0;
    rep.r.push_back(r);
    cH.push_back(c);
    cD1.push_back(e);
    derH = std::max(derH, std::abs(c));
    d1 = std::max(d1, std::abs(e));
  }
  rep.columns["H_prime_O1"] = cH;
  rep.columns["D1_prime_O1"] = cD1;
  rep.scalars["H_prime_O1"] = derH;
  rep.scalars["D1_prime_O1"] = d1;
  rep.scalars["divZ_minus_N_over_r"] = I.max_divZ_over_r;
  rep.scalars["divAr_minus_(N-1)/r"] = I.max_divAr_defect;
  rep.excluded.clear();
  return rep;
}

std::vector<IdentityReport> verify_all(const core::ProblemSpec& spec, const FieldIntegrals& I, const Tolerances& t) {
  std::vector<IdentityReport> out;
  const bool model = I.identity_a && spec.potential.is_zero() && !spec.nonlinearity.superlinear() &&
                     (homogeneous(spec) || spec.nonlinearity.kind() == core::NonlinearityKind::none);
  const bool sublinear = spec.nonlinearity.kind() != core::NonlinearityKind::none;
  out.push_back(verify_z_field(I, t));
  out.push_back(verify_H_prime(I, t));
  out.push_back(verify_D_forms(I, t));
  if (model) {
    out.push_back(verify_pohozaev_model(spec, I, t));
    out.push_back(verify_N_prime_bound(spec, I, t));
    out.push_back(verify_log_derivative(I, t));
  }
  if (!I.B_Z_gradE.empty())
    for (auto& r : verify_rellich_general(I, t)) out.push_back(std::move(r));
  out.push_back(verify_f_Z_identity(I, t));
  if (sublinear) {
    out.push_back(verify_surface_F_bound(spec, I));
    out.push_back(verify_u2_bounds(spec, I));
    out.push_back(verify_d_monotone(I));
  }
  out.push_back(fitted_constants(I));
  return out;
}

} // namespace freqlab::freq
