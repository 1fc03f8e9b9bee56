#include "freqlab/audit.hpp"

#include <doctest.h>

#include <cmath>

using namespace freqlab;
using audit::Classification;
using audit::StepStatus;

namespace {

freq::FrequencyProfile synthetic(const std::function<void(freq::FrequencyProfile&, double)>& fill, double dr = 0.01,
                                 int n = 100) {
  freq::FrequencyProfile p;
  for (int k = 1; k <= n; ++k) {
    p.r.push_back(k * dr);
    p.H.push_back(0);
    p.D.push_back(0);
    p.D1.push_back(0);
    p.d.push_back(0);
    p.dprime.push_back(0);
    p.surfaceD.push_back(0);
    p.N.emplace_back();
    fill(p, k * dr);
  }
  p.h_floor = 1e-14;
  return p;
}

void set_last(freq::FrequencyProfile& p, double H, double D, double d) {
  p.H.back() = H;
  p.D.back() = D;
  p.d.back() = d;
  if (H > p.h_floor || p.h_floor == 0.0) p.N.back() = p.r.back() * D / H;
}

} // namespace

TEST_CASE("closed-form audit constants") {
  const auto p = synthetic([](freq::FrequencyProfile& p, double r) {
    set_last(p, r > 0.3 ? 1.0 : 0.0, r > 0.3 ? 1.0 : 0.0, r > 0.3 ? (r - 0.3) : 0.0);
  });
  for (int dim : {2, 3})
    for (double q : {1.0, 1.5}) {
      const double r0 = 0.3, Cnq = core::c_constant(dim, q);
      const auto lb = audit::lower_bound_certificate(p, dim, q, r0, 1.0);
      CHECK(std::abs(lb.C1 * std::pow(r0, dim - 1) - Cnq) <= 1e-12 * Cnq);
      CHECK(std::abs(2 * lb.C2 - (2 - q) * std::pow(r0, dim - 2)) <= 1e-12);
      CHECK(lb.C1 * (lb.r1 - r0) == doctest::Approx((2 - q) / 2).epsilon(1e-12));
      const auto fb = audit::frequency_bound_certificate(p, dim, q, r0, lb.r1, lb.C2);
      CHECK(std::abs(fb.C3 * r0 * lb.C2 - Cnq) <= 1e-12 * Cnq);
    }
  CHECK_THROWS_AS(audit::lower_bound_certificate(p, 2, 1.5, 0.0, 1.0), DomainError);
}

TEST_CASE("vanishing radius on synthetic profiles") {
  const auto zero = synthetic([](freq::FrequencyProfile& p, double) { set_last(p, 0, 0, 0); });
  CHECK(audit::vanishing_radius(zero, 1e-10).whole_grid_zero);
  const auto glued = synthetic([](freq::FrequencyProfile& p, double r) {
    const double s = std::max(0.0, r - 0.3);
    set_last(p, s * s, s, s * s * s);
  });
  const auto v = audit::vanishing_radius(glued, 1e-10);
  CHECK_FALSE(v.whole_grid_zero);
  CHECK(v.r0 == doctest::Approx(0.3));
  REQUIRE(v.r0_strict);
  CHECK(*v.r0_strict == doctest::Approx(0.3));
  const auto pos = synthetic([](freq::FrequencyProfile& p, double r) { set_last(p, r, r, r * r); });
  CHECK(audit::vanishing_radius(pos, 1e-10).r0 == 0.0);
}

TEST_CASE("lower bound step: D = C2 d exactly passes with zero margin") {
  const int dim = 2;
  const double q = 1.5, r0 = 0.3, C2 = (2 - q) / 2;
  const auto p = synthetic([&](freq::FrequencyProfile& p, double r) {
    const double d = std::max(0.0, r - r0);
    set_last(p, d, C2 * d, d);
  });
  const auto lb = audit::lower_bound_certificate(p, dim, q, r0, 1.0);
  CHECK(lb.verdict.status == StepStatus::pass);
  CHECK(std::abs(lb.verdict.margin) <= 1e-15);
  const auto low = synthetic([&](freq::FrequencyProfile& p, double r) {
    const double d = std::max(0.0, r - r0);
    set_last(p, d, 0.9 * C2 * d, d);
  });
  const auto bad = audit::lower_bound_certificate(low, dim, q, r0, 1.0);
  CHECK(bad.verdict.status == StepStatus::fail);
  REQUIRE(bad.verdict.fail_radius);
  CHECK(*bad.verdict.fail_radius > r0);
  // r1 so close to r0 that no radius falls between
  const auto tight = audit::lower_bound_certificate(p, 3, q, 0.3, 0.305);
  CHECK(tight.verdict.status == StepStatus::inconclusive);
}

TEST_CASE("frequency step: N = e^{-C3 r} makes the product constant") {
  const int dim = 2;
  const double q = 1.5, r0 = 0.3, C2 = (2 - q) / 2, C3 = core::c_constant(dim, q) / (r0 * C2);
  const auto p = synthetic([&](freq::FrequencyProfile& p, double r) {
    if (r <= 0.35 + 1e-12) return set_last(p, 0, 0, 0);
    const double H = 1.0, N = std::exp(-C3 * r);
    set_last(p, H, N * H / r, 1.0);
  });
  const auto fb = audit::frequency_bound_certificate(p, dim, q, r0, 0.6, C2);
  CHECK(fb.verdict.status == StepStatus::pass);
  CHECK(fb.r2 == doctest::Approx(0.59));
  CHECK(fb.r3 == doctest::Approx(0.35));
  CHECK(std::abs(fb.verdict.margin) <= 1e-12);
  CHECK(fb.C4 == doctest::Approx(1.0).epsilon(1e-12));
  const auto steep = synthetic([&](freq::FrequencyProfile& p, double r) {
    if (r <= 0.35 + 1e-12) return set_last(p, 0, 0, 0);
    const double N = std::exp(-2 * C3 * r);
    set_last(p, 1.0, N / r, 1.0);
  });
  CHECK(audit::frequency_bound_certificate(steep, dim, q, r0, 0.6, C2).verdict.status == StepStatus::fail);
  const auto empty = synthetic([](freq::FrequencyProfile& p, double) { set_last(p, 0, 0, 0); });
  CHECK(audit::frequency_bound_certificate(empty, dim, q, r0, 0.6, C2).verdict.status == StepStatus::inconclusive);
}

TEST_CASE("logH step") {
  const int dim = 2;
  // H = r^{N-1}: zero slope, H never vanishes, no contradiction
  const auto flat = synthetic([&](freq::FrequencyProfile& p, double r) { set_last(p, r, 1.0, 1.0); });
  CHECK(audit::logH_contradiction(flat, dim, 0.3, 0.3, 0.6, 1.0).status == StepStatus::inconclusive);
  // H jumps from 0 to a bounded-slope profile at 0.3
  const auto jump = synthetic([&](freq::FrequencyProfile& p, double r) { set_last(p, r > 0.305 ? r : 0.0, 1.0, 1.0); });
  const auto v = audit::logH_contradiction(jump, dim, 0.3, 0.3, 0.6, 1.0);
  CHECK(v.status == StepStatus::pass);
  CHECK(v.margin > 0.0);
  // growth like (r - 0.3)^8 breaks any moderate slope bound
  const auto steep = synthetic([&](freq::FrequencyProfile& p, double r) {
    set_last(p, std::pow(std::max(0.0, r - 0.3), 8), 1.0, 1.0);
  });
  const auto s = audit::logH_contradiction(steep, dim, 0.3, 0.3, 0.6, 1.0);
  CHECK(s.status == StepStatus::fail);
  REQUIRE(s.fail_radius);
  CHECK(*s.fail_radius <= 0.33 + 1e-12);  // H(0.31) = 1e-16 is below the floor
}

TEST_CASE("frequency step is scale invariant in linear mode") {
  core::ProblemSpec spec;
  spec.dim = 2;
  spec.outer_radius = 1.0;
  spec.coefficients = core::CoefficientField::identity(2);
  spec.nonlinearity = core::NonlinearitySpec::none();
  spec.validate();
  auto profile = [&](double scale) {
    const auto f = field::sample_grid(grid::PolarGrid{32, 64, 1.0}, [&](const Vec& x) {
      const double s = std::max(0.0, x.norm() - 0.25);
      return scale * s * s * (1 + x(0));
    });
    return freq::frequency_profile(spec, f);
  };
  const auto a = audit::frequency_bound_certificate(profile(1.0), 2, 1.5, 0.25, 0.6, 0.25);
  const auto b = audit::frequency_bound_certificate(profile(3.0), 2, 1.5, 0.25, 0.6, 0.25);
  CHECK(a.verdict.status == b.verdict.status);
  CHECK(a.r2 == b.r2);
  CHECK(a.r3 == b.r3);
  CHECK(a.C4 == doctest::Approx(b.C4).epsilon(1e-12));
  CHECK(a.verdict.margin == doctest::Approx(b.verdict.margin).epsilon(1e-9));
}

TEST_CASE("audit: genuine radial solutions") {
  struct Case {
    int n;
    double q, a, R;
  };
  for (const Case& c : {Case{2, 1.5, 0.5, 4}, Case{3, 1.5, 0.5, 4}, Case{2, 1.2, 0.3, 3}, Case{3, 1.8, 0.8, 5},
                        Case{2, 1.0, 0.2, 2}}) {
    CAPTURE(c.n);
    CAPTURE(c.q);
    const auto spec = core::make_model_problem(c.n, c.R, c.q);
    const auto chain = audit::audit(spec, solve::solve_radial(spec, c.a, 1e-3));
    CHECK(chain.classification == Classification::genuine_nonvanishing);
    CHECK(chain.r0 == 0.0);
    CHECK(chain.constants.empty());
    CHECK(chain.route == "model");
    CHECK(chain.binding);
  }
}

TEST_CASE("audit: glued fields never come out genuine") {
  for (auto [n, q, r0] : {std::tuple{2, 1.5, 0.5}, std::tuple{3, 1.5, 0.3}, std::tuple{2, 1.2, 0.4}}) {
    CAPTURE(n);
    CAPTURE(q);
    const auto spec = core::make_model_problem(n, 1.5, q);
    const auto f = solve::glued_field(n, q, r0, 1.5, 1e-3);
    const auto chain = audit::audit(spec, f);
    CHECK(chain.classification == Classification::residual_veto);
    CHECK(chain.failing_step == "residual_veto");
    CHECK(chain.r0 >= r0 - 0.008);
    REQUIRE(chain.r0_strict);
    CHECK(std::abs(*chain.r0_strict - r0) <= 0.008 + 1e-12);
    audit::AuditControls ctl;
    ctl.evaluate_after_veto = true;
    const auto full = audit::audit(spec, f, ctl);
    CHECK(full.classification == Classification::residual_veto);
    CHECK(full.steps.size() >= 3);
  }
}

TEST_CASE("audit: forcing r0 on a genuine solution") {
  const auto spec = core::make_model_problem(2, 4.0, 1.5);
  audit::AuditControls ctl;
  ctl.forced_r0 = 0.5;
  const auto chain = audit::audit(spec, solve::solve_radial(spec, 0.5, 1e-3), ctl);
  CHECK(chain.classification == Classification::residual_veto);
  CHECK_FALSE(chain.binding);
  REQUIRE(chain.step("residual_veto"));
  CHECK(chain.step("residual_veto")->note.find("not zero") != std::string::npos);
  CHECK(chain.step("lower_bound_D") != nullptr);
}

TEST_CASE("audit: zero field, grid field, JSON, controls") {
  const auto spec2 = core::make_model_problem(2, 1.0, 1.5);
  const auto zero = field::sample_grid(grid::PolarGrid{16, 32, 1.0}, [](const Vec&) { return 0.0; });
  const auto z = audit::audit(spec2, zero);
  CHECK(z.classification == Classification::genuine_nonvanishing);
  CHECK(z.whole_grid_zero);

  core::ProblemSpec spec;
  spec.dim = 2;
  spec.outer_radius = 1.0;
  spec.coefficients = core::CoefficientField::from_expressions(
      2, {Expression::parse("1 + x1^2/4"), Expression::parse("0"), Expression::parse("1")});
  spec.nonlinearity = core::NonlinearitySpec::homogeneous(1.5);
  spec.validate();
  solve::GridControls gc;
  gc.M = gc.K = 32;
  const auto rep = solve::solve_grid_2d(spec, [](double t) { return 0.3 + 0.1 * std::cos(t); }, gc);
  const auto g = audit::audit(spec, rep.field);
  CHECK(g.route == "general");
  CHECK(g.classification == Classification::genuine_nonvanishing);

  const auto radial = solve::solve_radial(spec2, 0.5, 1e-3);
  const auto j1 = audit::audit(spec2, radial).to_json().dump(2);
  const auto j2 = audit::audit(spec2, radial).to_json().dump(2);
  CHECK(j1 == j2);
  const auto j = nlohmann::json::parse(j1);
  CHECK(j["schema"] == audit::kCertificateSchema);
  CHECK(j["input_hash"].get<std::string>().size() == 16);
  CHECK(j["classification"] == "genuine_nonvanishing");

  audit::AuditControls bad;
  bad.tol_d = 0.0;
  CHECK_THROWS_AS(audit::audit(spec2, radial, bad), ConfigError);
  bad = {};
  bad.residual_factor = -1;
  CHECK_THROWS_AS(audit::audit(spec2, radial, bad), ConfigError);
  core::ProblemSpec lin = spec2;
  lin.nonlinearity = core::NonlinearitySpec::none();
  CHECK_THROWS_AS(audit::audit(lin, radial), DomainError);
}
