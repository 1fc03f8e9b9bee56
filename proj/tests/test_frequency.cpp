#include "freqlab/identities.hpp"

#include "freqlab/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace freqlab;

namespace {

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

const freq::IdentityReport& find(const std::vector<freq::IdentityReport>& v, const std::string& name) {
  for (const auto& r : v)
    if (r.name == name) return r;
  throw std::runtime_error("no report " + name);
}

} // namespace

TEST_CASE("unit sphere areas") {
  CHECK(freq::unit_sphere_area(2) == doctest::Approx(2 * std::numbers::pi).epsilon(1e-15));
  CHECK(freq::unit_sphere_area(3) == doctest::Approx(4 * std::numbers::pi).epsilon(1e-15));
  CHECK(freq::unit_sphere_area(4) == doctest::Approx(2 * std::numbers::pi * std::numbers::pi).epsilon(1e-15));
}

TEST_CASE("homogeneous harmonic polynomials have constant frequency") {
  const auto spec = plane(core::CoefficientField::identity(2), core::NonlinearitySpec::none());
  const std::vector<std::pair<int, std::function<double(const Vec&)>>> cases = {
      {1, [](const Vec& x) { return x(0); }},
      {2, [](const Vec& x) { return x(0) * x(1); }},
      {3, [](const Vec& x) { return x(0) * x(0) * x(0) - 3 * x(0) * x(1) * x(1); }}};
  for (const auto& [deg, fn] : cases) {
    CAPTURE(deg);
    const auto f = field::sample_grid(grid::PolarGrid{64, 512, 1.0}, fn);
    const auto P = freq::frequency_profile(spec, f);
    REQUIRE(P.r.size() == 63);
    for (std::size_t k = 0; k < P.r.size(); ++k) {
      REQUIRE(P.N[k]);
      // Degree 3 puts r^5 into the ball integrand, beyond the cubic rules
      // next to the pole; that error decays like (dr/r)^6.
      if (deg < 3)
        CHECK(std::abs(*P.N[k] - deg) <= 1e-6);
      else if (P.r[k] >= 0.5)
        CHECK(std::abs(*P.N[k] - deg) <= 1e-5);
    }
    // H = pi r^{2 deg + 1} for the normalized polynomials of degree 1 and 2
    if (deg == 1) CHECK(P.H[20] == doctest::Approx(std::numbers::pi * std::pow(P.r[20], 3)).epsilon(1e-12));
  }
}

TEST_CASE("H' identity is exact for u = x1") {
  const auto spec = plane(core::CoefficientField::identity(2), core::NonlinearitySpec::none());
  const auto f = field::sample_grid(grid::PolarGrid{64, 128, 1.0}, [](const Vec& x) { return x(0); });
  const auto rep = freq::verify_H_prime(freq::compute_integrals(spec, f));
  CHECK(rep.pass);
  CHECK(rep.max_relative < 1e-10);
}

TEST_CASE("radial solutions satisfy every identity") {
  for (int n : {2, 3})
    for (double q : {1.0, 1.5}) {
      CAPTURE(n);
      CAPTURE(q);
      const auto spec = core::make_model_problem(n, 4.0, q);
      const auto f = solve::solve_radial(spec, 0.5, 1e-3);
      const auto I = freq::compute_integrals(spec, f);
      CHECK(!I.nonsmooth.empty());
      const auto all = freq::verify_all(spec, I);
      for (const auto& r : all) {
        CAPTURE(r.name);
        CHECK(r.pass);
        CHECK_FALSE(r.flagged);
      }
      CHECK(find(all, "H_prime").max_relative <= 1e-6);
      CHECK(find(all, "pohozaev_model").max_relative <= 1e-6);
      // the u^2 bound is an equality for radial profiles with the default kappa2
      const auto& u2 = find(all, "u2_bound");
      CHECK(u2.scalars.at("bound_constant") == doctest::Approx(q).epsilon(1e-14));
      CHECK(u2.scalars.at("max_effective_constant") == doctest::Approx(q).epsilon(1e-12));
    }
}

TEST_CASE("Pohozaev correction reproduces the defect of the glued field") {
  const double q = 1.5;
  const auto spec = core::make_model_problem(2, 1.5, q);
  const auto f = solve::glued_field(2, q, 0.5, 1.5, 1e-3);
  const auto rep = freq::verify_pohozaev_model(spec, freq::compute_integrals(spec, f));
  CHECK(rep.scalars.at("correction_sup") > 1e-3);
  CHECK(rep.scalars.at("defect_match") <= 1e-4);
  CHECK(rep.pass);
}

TEST_CASE("Rellich-type identities on a manufactured variable-coefficient field") {
  const auto spec = plane(sheared(), core::NonlinearitySpec::homogeneous(1.5));
  const solve::ManufacturedProblem mp(spec, Expression::parse("0.1*(1 - x1^2 - x2^2)^2 + 0.05*x1"));
  std::vector<double> hs, e9, e10;
  for (int m : {128, 256}) {
    const auto I = freq::compute_integrals(spec, mp.sample(grid::PolarGrid{m, m, 1.0}));
    const auto both = freq::verify_rellich_general(I);
    for (const auto& r : both) {
      CAPTURE(r.name);
      CHECK(r.pass);
      CHECK(r.max_relative <= 5e-6);
    }
    hs.push_back(1.0 / m);
    e9.push_back(both[0].max_relative);
    e10.push_back(both[1].max_relative);
    CHECK(freq::verify_z_field(I).pass);
  }
  // fourth-order gradients and quadrature
  CHECK(num::observed_order(hs, e9) >= 3.5);
  CHECK(num::observed_order(hs, e10) >= 3.5);
}

TEST_CASE("H' on a solved variable-coefficient field") {
  const auto spec = plane(sheared(), core::NonlinearitySpec::homogeneous(1.5));
  solve::GridControls c;
  c.M = c.K = 256;
  const auto rep = solve::solve_grid_2d(spec, [](double t) { return 0.3 + 0.2 * std::cos(t) + 0.1 * std::sin(2 * t); }, c);
  const auto I = freq::compute_integrals(spec, rep.field);
  const auto h = freq::verify_H_prime(I);
  CHECK(h.pass);
  CHECK(h.scalars.at("max_relative_D_form") <= 5e-5);
  const auto all = freq::verify_all(spec, I);
  for (const auto& r : all) {
    CAPTURE(r.name);
    CHECK(r.pass);
  }
}

TEST_CASE("N' lower bound and Cauchy-Schwarz gap") {
  for (double q : {1.2, 1.5, 1.8}) {
    CAPTURE(q);
    const auto spec = core::make_model_problem(3, 6.0, q);
    const auto f = solve::solve_radial(spec, 0.3, 1e-3);
    const auto rep = freq::verify_N_prime_bound(spec, freq::compute_integrals(spec, f));
    CHECK(rep.pass);
    CHECK(rep.scalars.at("min_cs_gap") >= -1e-10);
    // radial: u_nu^2 integrates exactly like surfaceD^2 / H
    for (double g : rep.columns.at("cs_gap")) CHECK(std::abs(g) <= 1e-10 * (1 + std::abs(g)));
  }
  // A harmonic polynomial sum has a strictly positive gap.
  const auto spec = plane(core::CoefficientField::identity(2), core::NonlinearitySpec::none());
  const auto f = field::sample_grid(grid::PolarGrid{64, 128, 1.0}, [](const Vec& x) { return x(0) + x(0) * x(1); });
  const auto rep = freq::verify_N_prime_bound(spec, freq::compute_integrals(spec, f));
  CHECK(rep.pass);
  CHECK(rep.scalars.at("min_cs_gap") > 0.0);
}

TEST_CASE("u^2 bound with a constant field has ratio q") {
  const double q = 1.4;
  const auto spec = plane(core::CoefficientField::identity(2), core::NonlinearitySpec::homogeneous(q));
  const auto f = field::sample_grid(grid::PolarGrid{16, 32, 1.0}, [](const Vec&) { return 0.25; });
  const auto rep = freq::verify_u2_bounds(spec, freq::compute_integrals(spec, f));
  CHECK(rep.pass);
  for (double c : rep.columns.at("effective_constant")) CHECK(c == doctest::Approx(q).epsilon(1e-12));
}

TEST_CASE("Z field for the identity matrix") {
  const auto spec = plane(core::CoefficientField::identity(2), core::NonlinearitySpec::none());
  const auto f = field::sample_grid(grid::PolarGrid{32, 64, 1.0}, [](const Vec& x) { return x(0); });
  const auto I = freq::compute_integrals(spec, f);
  CHECK(I.max_mu_defect <= 1e-14);
  CHECK(I.max_Z_defect <= 1e-14);
  CHECK(I.max_divZ_defect <= 1e-12);
  CHECK(freq::verify_z_field(I).pass);
}

TEST_CASE("profile CSV and report JSON") {
  const auto spec = core::make_model_problem(2, 2.0, 1.5);
  const auto f = solve::solve_radial(spec, 0.5, 1e-3);
  const auto P = freq::frequency_profile(spec, f);
  std::ostringstream os;
  P.write_csv(os);
  CHECK(os.str().rfind("r,H,D,D1,d,dprime,N,surfaceD\n", 0) == 0);
  const auto j = freq::verify_H_prime(freq::compute_integrals(spec, f)).to_json();
  CHECK(j["schema"] == freq::kIdentitySchema);
  CHECK(j["verdict"] == "pass");
  CHECK(j["r"].size() == j["rel_residual"].size());
  // a radius step of 0.08 does not resolve H'; the report says so
  const auto coarse = freq::verify_H_prime(freq::compute_integrals(spec, solve::solve_radial(spec, 0.5, 1e-2)));
  CHECK(coarse.flagged);
}

TEST_CASE("model-only checks reject general fields") {
  const auto spec = plane(sheared(), core::NonlinearitySpec::homogeneous(1.5));
  const auto f = field::sample_grid(grid::PolarGrid{16, 32, 1.0}, [](const Vec& x) { return 0.1 + 0.01 * x(0); });
  const auto I = freq::compute_integrals(spec, f);
  CHECK_THROWS_AS(freq::verify_pohozaev_model(spec, I), DomainError);
  CHECK_THROWS_AS(freq::verify_log_derivative(I), DomainError);
}
