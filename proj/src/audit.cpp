#include "freqlab/audit.hpp"

#include "freqlab/hash.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace freqlab::audit {

namespace {

constexpr const char* kGate = "residual_veto";
constexpr const char* kVanish = "vanishing_detected";
constexpr const char* kLower = "lower_bound_D";
constexpr const char* kFreq = "frequency_bounded";
constexpr const char* kLogH = "logH_contradiction";

bool same(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

std::optional<std::size_t> index_of(const freq::FrequencyProfile& p, double r) {
  for (std::size_t k = 0; k < p.r.size(); ++k)
    if (same(p.r[k], r)) return k;
  return std::nullopt;
}

double spacing(const freq::FrequencyProfile& p) { return p.r.size() > 1 ? p.r[1] - p.r[0] : (p.r.empty() ? 0.0 : p.r[0]); }

StepVerdict make_step(const char* name, StepStatus s, std::string note = {}) {
  StepVerdict v;
  v.name = name;
  v.status = s;
  v.note = std::move(note);
  return v;
}

// D >= factor * d at every audited radius in (r0, r1).
StepVerdict check_lower(const freq::FrequencyProfile& p, double r0, double r1, double factor, double slack) {
  StepVerdict v = make_step(kLower, StepStatus::pass);
  std::size_t n = 0;
  v.margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < p.r.size(); ++k) {
    if (!(p.r[k] > r0 && p.r[k] < r1) || same(p.r[k], r0) || same(p.r[k], r1)) continue;
    ++n;
    const double lhs = p.D[k], rhs = factor * p.d[k];
    const double scale = std::abs(lhs) + std::abs(rhs);
    const double m = scale > 0.0 ? (lhs - rhs) / scale : 0.0;
    if (m < v.margin) v.margin = m;
    if (m < -slack && !v.fail_radius) v.fail_radius = p.r[k];
  }
  if (n == 0) {
    v.status = StepStatus::inconclusive;
    v.margin = 0.0;
    v.note = "no audited radii in (r0, r1)";
    return v;
  }
  if (v.fail_radius) {
    v.status = StepStatus::fail;
    v.note = "D < C2 d";
  }
  return v;
}

struct Bracket {
  std::size_t i3 = 0, i2 = 0;
  double r2 = 0.0, r3 = 0.0;
  bool clamped = false;
};

std::optional<Bracket> bracket(const freq::FrequencyProfile& p, double r0, double r1) {
  std::optional<std::size_t> i2;
  for (std::size_t k = 0; k < p.r.size(); ++k)
    if (p.r[k] > r0 && p.r[k] < r1 && !same(p.r[k], r0) && !same(p.r[k], r1) && p.H[k] > p.h_floor) i2 = k;
  if (!i2) return std::nullopt;
  Bracket b;
  b.i2 = *i2;
  b.r2 = p.r[*i2];
  std::size_t k = *i2;
  while (k > 0 && p.H[k - 1] > p.h_floor && p.r[k - 1] > r0 && !same(p.r[k - 1], r0)) --k;
  // k is the lowest radius of the positive run; r3 is the radius below it,
  // or r0 when the run reaches r0 (H can exceed the floor inside B_{r0}
  // when r0 was found by thresholding d).
  if (k == 0) {
    b.r3 = r0;
    b.i3 = 0;
    b.clamped = true;
    return b;
  }
  b.i3 = k - 1;
  b.r3 = std::max(p.r[k - 1], r0);
  b.clamped = p.H[k - 1] > p.h_floor;
  return b;
}

// N e^{rate r} non-decreasing on (r3, r2] and N <= C4 := N(r2) e^{rate r2} there.
StepVerdict check_monotone(const freq::FrequencyProfile& p, const Bracket& b, double rate, double& C4, double slack) {
  StepVerdict v = make_step(kFreq, StepStatus::pass);
  if (!p.N[b.i2]) {
    v.status = StepStatus::inconclusive;
    v.note = "N undefined at r2";
    return v;
  }
  C4 = *p.N[b.i2] * std::exp(rate * b.r2);
  v.margin = std::numeric_limits<double>::infinity();
  std::optional<double> prev;
  for (std::size_t k = b.i3 + 1; k <= b.i2; ++k) {
    if (p.r[k] <= b.r3 || !p.N[k]) continue;
    const double g = *p.N[k] * std::exp(rate * p.r[k]);
    const double tol = slack * std::max(std::abs(g), std::abs(C4));
    if (prev) {
      const double m = (g - *prev) / std::max({std::abs(g), std::abs(*prev), 1e-300});
      v.margin = std::min(v.margin, m);
      if (g < *prev - tol && !v.fail_radius) v.fail_radius = p.r[k];
    }
    const double mb = (C4 * std::exp(rate * (p.r[k] - b.r2)) - *p.N[k]) / std::max(std::abs(C4), 1e-300);
    v.margin = std::min(v.margin, mb);
    if (*p.N[k] > C4 + tol && !v.fail_radius) v.fail_radius = p.r[k];
    prev = g;
  }
  if (!std::isfinite(v.margin)) v.margin = 0.0;
  if (v.fail_radius) {
    v.status = StepStatus::fail;
    v.note = "N e^{C3 r} decreases or N exceeds C4";
  }
  return v;
}

StepVerdict check_logH(const freq::FrequencyProfile& p, int dim, double r3, double r2, double slope, double slack) {
  StepVerdict v = make_step(kLogH, StepStatus::pass);
  if (!(r3 > 0.0)) {
    v.status = StepStatus::inconclusive;
    v.note = "r3 = 0";
    return v;
  }
  const auto i2 = index_of(p, r2);
  if (!i2) throw DomainError("r2 is not an audited radius");
  std::size_t lo = *i2;
  while (lo > 0 && p.r[lo - 1] > r3 && !same(p.r[lo - 1], r3)) --lo;
  auto g = [&](std::size_t k) { return std::log(p.H[k] / std::pow(p.r[k], dim - 1)); };
  v.margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = lo; k < *i2; ++k) {
    if (!(p.H[k] > p.h_floor) || !(p.H[k + 1] > p.h_floor)) continue;
    const double allowed = slope * (p.r[k + 1] - p.r[k]);
    const double rise = g(k + 1) - g(k);
    const double m = (allowed - rise) / std::max(std::abs(allowed) + std::abs(rise), 1e-300);
    v.margin = std::min(v.margin, m);
    if (rise > allowed + slack * (1.0 + std::abs(allowed)) && !v.fail_radius) v.fail_radius = p.r[k + 1];
  }
  if (!std::isfinite(v.margin)) v.margin = 0.0;
  if (v.fail_radius) {
    v.status = StepStatus::fail;
    v.note = "log(H/r^{N-1}) grows faster than the slope bound";
    return v;
  }
  // H at r3 itself: the grid radius at or below r3.
  double h3 = 0.0;
  if (lo > 0) h3 = p.H[lo - 1];
  if (h3 > p.h_floor) {
    v.status = StepStatus::inconclusive;
    v.note = "H(r3) is above the floor: no contradiction";
    return v;
  }
  const double dr = spacing(p);
  const double rr = std::min(r3 + dr, r2);
  const double bound = p.H[*i2] * std::pow(rr / r2, dim - 1) * std::exp(-slope * (r2 - rr));
  std::ostringstream os;
  os << "backward bound H(r3+dr) >= " << bound << " vs H(r3) = " << h3 << ", floor " << p.h_floor;
  v.note = os.str();
  if (!(bound > p.h_floor)) {
    v.status = StepStatus::inconclusive;
    v.note += ": bound below the floor";
  }
  return v;
}

bool model_route(const core::ProblemSpec& spec) {
  return spec.coefficients.is_identity() && spec.potential.is_zero() && !spec.nonlinearity.superlinear() &&
         spec.nonlinearity.kind() == core::NonlinearityKind::homogeneous;
}

} // namespace

std::string to_string(Classification c) {
  switch (c) {
    case Classification::genuine_nonvanishing: return "genuine_nonvanishing";
    case Classification::contradiction_certified: return "contradiction_certified";
    case Classification::residual_veto: return "residual_veto";
    case Classification::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

std::string to_string(StepStatus s) {
  switch (s) {
    case StepStatus::pass: return "pass";
    case StepStatus::fail: return "fail";
    case StepStatus::skipped: return "skipped";
    case StepStatus::inconclusive: return "inconclusive";
  }
  return "skipped";
}

void AuditControls::validate() const {
  if (!(tol_d > 0.0) || !(residual_factor > 0.0) || !(residual_floor > 0.0) || !(residual_abs > 0.0) ||
      !(monotone_rel > 0.0))
    throw ConfigError("audit tolerances must be positive");
  if (forced_r0 && !(*forced_r0 > 0.0)) throw ConfigError("a forced r0 must be positive");
}

const StepVerdict* CertificateChain::step(const std::string& name) const {
  for (const auto& s : steps)
    if (s.name == name) return &s;
  return nullptr;
}

nlohmann::ordered_json CertificateChain::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = kCertificateSchema;
  j["tool_version"] = kToolVersion;
  j["input_hash"] = input_hash;
  j["route"] = route;
  j["classification"] = to_string(classification);
  j["binding"] = binding;
  j["failing_step"] = failing_step;
  j["whole_grid_zero"] = whole_grid_zero;
  auto& r = j["radii"];
  r["delta1"] = delta1;
  r["r0"] = r0;
  r["r0_strict"] = r0_strict ? nlohmann::ordered_json(*r0_strict) : nlohmann::ordered_json(nullptr);
  for (auto [name, v] : {std::pair{"r1", r1}, std::pair{"r2", r2}, std::pair{"r3", r3}})
    r[name] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  j["constants"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : constants) j["constants"][k] = v;
  j["fitted_constants"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : fitted) j["fitted_constants"][k] = v;
  j["residual"] = {{"sup", residual_sup}, {"threshold", residual_threshold}};
  j["steps"] = nlohmann::ordered_json::array();
  for (const auto& s : steps) {
    nlohmann::ordered_json e;
    e["name"] = s.name;
    e["verdict"] = to_string(s.status);
    e["margin"] = s.margin;
    e["fail_radius"] = s.fail_radius ? nlohmann::ordered_json(*s.fail_radius) : nlohmann::ordered_json(nullptr);
    e["note"] = s.note;
    j["steps"].push_back(std::move(e));
  }
  j["note"] = note;
  return j;
}

Vanishing vanishing_radius(const freq::FrequencyProfile& p, double tol_d) {
  if (p.r.empty()) throw DomainError("empty profile");
  Vanishing v;
  const double top = p.d.back();
  if (!(top > 0.0)) {
    v.whole_grid_zero = true;
    return v;
  }
  const double thr = tol_d * top;
  for (std::size_t k = 0; k < p.r.size() && p.d[k] <= thr; ++k) v.r0 = p.r[k];
  for (std::size_t k = 0; k < p.r.size() && p.d[k] == 0.0; ++k) v.r0_strict = p.r[k];
  if (!v.r0_strict && v.r0 == 0.0) v.r0_strict = 0.0;
  return v;
}

LowerBound lower_bound_certificate(const freq::FrequencyProfile& p, int dim, double q, double r0, double delta1,
                                   double rel_slack) {
  if (!(r0 > 0.0)) throw DomainError("the lower bound certificate needs r0 > 0");
  LowerBound out;
  out.C1 = core::c_constant(dim, q) / std::pow(r0, dim - 1);
  out.C2 = (2 - q) / 2 * std::pow(r0, dim - 2);
  out.r1 = std::min(r0 + (2 - q) / (2 * out.C1), delta1);
  out.verdict = check_lower(p, r0, out.r1, out.C2, rel_slack);
  return out;
}

FrequencyBound frequency_bound_certificate(const freq::FrequencyProfile& p, int dim, double q, double r0, double r1,
                                           double C2, double rel_slack) {
  FrequencyBound out;
  out.C3 = core::c_constant(dim, q) / (r0 * C2);
  const auto b = bracket(p, r0, r1);
  if (!b) {
    out.verdict = make_step(kFreq, StepStatus::inconclusive, "no radius in (r0, r1) with H above the floor");
    return out;
  }
  out.r2 = b->r2;
  out.r3 = b->r3;
  out.verdict = check_monotone(p, *b, out.C3, out.C4, rel_slack);
  if (b->clamped) out.verdict.note += (out.verdict.note.empty() ? "" : "; ") + std::string("r3 clamped to r0");
  return out;
}

StepVerdict logH_contradiction(const freq::FrequencyProfile& p, int dim, double r0, double r3, double r2, double C4,
                               double rel_slack) {
  return check_logH(p, dim, r3, r2, 2 * C4 / r0, rel_slack);
}

CertificateChain audit(const core::ProblemSpec& spec, const field::SolutionField& u, const AuditControls& c) {
  c.validate();
  const auto& nl = spec.nonlinearity;
  if (nl.kind() == core::NonlinearityKind::none) throw DomainError("the audit needs a sublinear nonlinearity");
  const int dim = spec.dim;
  const double q = nl.q();

  CertificateChain ch;
  ch.route = model_route(spec) ? "model" : "general";
  {
    std::ostringstream os;
    field::write_field(os, u);
    ch.input_hash = hex64(fnv1a64(os.str()));
  }

  // Residual gate.
  solve::ResidualOptions ro;
  ro.exclusion = c.frequency.exclusion;
  const auto res = solve::residual_field(spec, u, ro);
  ch.residual_sup = res.sup();
  ch.residual_threshold =
      u.truncation_estimate ? c.residual_factor * *u.truncation_estimate + c.residual_floor : c.residual_abs;
  StepVerdict gate = make_step(kGate, StepStatus::pass);
  gate.margin = (ch.residual_threshold - ch.residual_sup) / ch.residual_threshold;
  if (ch.residual_sup > ch.residual_threshold) {
    gate.status = StepStatus::fail;
    gate.note = "sup |rho| exceeds the gate";
  }

  const auto I = freq::compute_integrals(spec, u, c.frequency);
  const auto& P = I.profile;
  ch.delta1 = P.r.empty() ? 0.0 : P.r.back();
  const auto van = vanishing_radius(P, c.tol_d);
  ch.whole_grid_zero = van.whole_grid_zero;
  ch.r0 = van.r0;
  ch.r0_strict = van.r0_strict;

  if (c.forced_r0) {
    ch.binding = false;
    ch.r0 = *c.forced_r0;
    const double inner = u.linf_ball(*c.forced_r0), outer = u.linf_ball(ch.delta1);
    if (inner > 1e-12 * outer) {
      gate.status = StepStatus::fail;
      gate.fail_radius = *c.forced_r0;
      gate.note += (gate.note.empty() ? "" : "; ") + std::string("field is not zero on B_{r0}");
    }
    ch.note = "r0 forced by the caller; chain is not binding";
  }
  ch.steps.push_back(gate);
  const bool vetoed = gate.status == StepStatus::fail;
  if (vetoed) {
    ch.classification = Classification::residual_veto;
    ch.failing_step = kGate;
    if (!c.evaluate_after_veto && !c.forced_r0) return ch;
  }

  auto finish = [&](Classification cl, const std::string& failing) {
    if (!vetoed) {
      ch.classification = cl;
      ch.failing_step = failing;
    }
    return ch;
  };

  if (ch.whole_grid_zero) {
    ch.steps.push_back(make_step(kVanish, StepStatus::pass, "field identically negligible: d = 0 on the whole grid"));
    return finish(Classification::genuine_nonvanishing, "");
  }
  if (!(ch.r0 > 0.0)) {
    auto s = make_step(kVanish, StepStatus::fail, "d > 0 at the first radius: r0 = 0");
    ch.steps.push_back(s);
    return finish(Classification::genuine_nonvanishing, "");
  }
  {
    std::ostringstream os;
    os << "r0 = " << ch.r0;
    ch.steps.push_back(make_step(kVanish, StepStatus::pass, os.str()));
  }

  const double C = core::c_constant(dim, q);
  double r1 = 0.0, lower_factor = 0.0, rate = 0.0;
  StepVerdict lower;
  std::optional<double> C_fit;
  if (ch.route == "model") {
    const auto lb = lower_bound_certificate(P, dim, q, ch.r0, ch.delta1);
    r1 = lb.r1;
    lower_factor = lb.C2;
    lower = lb.verdict;
    ch.constants["C1"] = lb.C1;
    ch.constants["C2"] = lb.C2;
    rate = C / (ch.r0 * lb.C2);
    ch.constants["C3"] = rate;
  } else {
    // Fitted constants stand in for the unspecified ones in the proof.
    double K = 0.0, Cd = 0.0;
    const double h = I.spacing;
    for (std::size_t k = 0; k < I.size(); ++k) {
      if (P.r[k] <= ch.r0) continue;
      if (P.d[k] > 0.0) K = std::max(K, std::abs(P.D[k] - P.D1[k]) / P.d[k]);
      if (k >= 2 && k + 2 < I.size()) {
        const double Dp = (P.D[k - 2] - 8 * P.D[k - 1] + 8 * P.D[k + 1] - P.D[k + 2]) / (12 * h);
        const double num = (2 - q) * P.dprime[k] - Dp;
        const double den = (P.D1[k] + P.d[k]) / P.r[k] + std::pow(I.S_linf[k], 2 - q) * P.dprime[k];
        if (num > 0.0 && den > 0.0) Cd = std::max(Cd, num / den);
      }
    }
    C_fit = std::max({K, Cd, 1e-12});
    ch.fitted["K_D_minus_D1"] = K;
    ch.fitted["C_D_prime"] = Cd;
    ch.fitted["C"] = *C_fit;
    const double C0 = *C_fit / ch.r0, C1 = C0 * (K + 1), delta0 = ch.delta1;
    ch.constants["C0"] = C0;
    ch.constants["C1"] = C1;
    // r1: first radius past r0 where the continuity condition fails.
    r1 = ch.delta1;
    double ball_sup = 0.0;
    for (std::size_t k = 0; k < I.size(); ++k) {
      ball_sup = std::max(ball_sup, I.S_linf[k]);
      if (P.r[k] <= ch.r0) continue;
      const double lhs = (*C_fit * std::pow(ball_sup, 2 - q) + C1 * (P.r[k] - ch.r0)) * std::exp(C0 * (delta0 - ch.r0));
      if (!(lhs < (2 - q) / 2)) {
        r1 = P.r[k];
        break;
      }
    }
    lower_factor = std::exp(C0 * (ch.r0 - delta0)) * (2 - q) / 2;
    ch.constants["C3"] = lower_factor;
    lower = check_lower(P, ch.r0, r1, lower_factor, 1e-12);
  }
  ch.r1 = r1;
  ch.steps.push_back(lower);
  if (lower.status == StepStatus::inconclusive) return finish(Classification::inconclusive, kLower);
  if (lower.status == StepStatus::fail) return finish(Classification::contradiction_certified, kLower);

  const auto b = bracket(P, ch.r0, r1);
  if (!b) {
    ch.steps.push_back(make_step(kFreq, StepStatus::inconclusive, "no radius in (r0, r1) with H above the floor"));
    return finish(Classification::inconclusive, kFreq);
  }
  ch.r2 = b->r2;
  ch.r3 = b->r3;
  if (C_fit) {
    double worst = 0.0;
    for (std::size_t k = b->i3 + 1; k <= b->i2; ++k)
      if (P.D[k] > 0.0) worst = std::max(worst, (P.D1[k] + P.d[k]) / (ch.r0 * P.D[k]));
    rate = *C_fit * (1 + worst);
    ch.constants["C4"] = rate;
  }
  double bound = 0.0;
  auto fb = check_monotone(P, *b, rate, bound, c.monotone_rel);
  if (b->clamped) fb.note += (fb.note.empty() ? "" : "; ") + std::string("r3 clamped to r0");
  ch.constants[C_fit ? "C5" : "C4"] = bound;
  ch.steps.push_back(fb);
  if (fb.status == StepStatus::inconclusive) return finish(Classification::inconclusive, kFreq);
  if (fb.status == StepStatus::fail) return finish(Classification::contradiction_certified, kFreq);

  const double slope = C_fit ? 2 * bound / ch.r0 + *C_fit : 2 * bound / ch.r0;
  const auto lh = check_logH(P, dim, b->r3, b->r2, slope, c.monotone_rel);
  ch.steps.push_back(lh);
  if (lh.status == StepStatus::inconclusive) return finish(Classification::inconclusive, kLogH);
  if (lh.status == StepStatus::fail) return finish(Classification::contradiction_certified, kLogH);
  return finish(Classification::contradiction_certified, "");
}

} // namespace freqlab::audit
