#include "doctest.h"

#include "freqlab/numerics.hpp"
#include "freqlab/ode_lab.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace freqlab;
using namespace freqlab::ode;

namespace {

double max_drift(const OdeTrajectory& tr) {
  const auto e = conserved_energy(tr);
  double d = 0.0;
  for (double v : e) d = std::max(d, std::abs(v - e.front()));
  return d;
}

} // namespace

TEST_CASE("counterexample profile values") {
  auto v = counterexample_profile(1.5, 0.0, 2.0);
  CHECK(v.u == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
  CHECK(v.u2 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(v.u2 == doctest::Approx(std::sqrt(v.u)).epsilon(1e-15));
  v = counterexample_profile(1.5, 0.0, 1.0);
  CHECK(v.u == doctest::Approx(1.0 / 144.0).epsilon(1e-15));
  CHECK(v.u2 == doctest::Approx(1.0 / 12.0).epsilon(1e-15));
  for (double q : {1.2, 1.5, 1.8}) {
    v = counterexample_profile(q, 0.3, -0.4);
    CHECK(v.u == 0.0);
    CHECK(v.u2 == 0.0);
  }
  CHECK_THROWS_AS(counterexample_profile(2.0, 0, 1), DomainError);
  CHECK_THROWS_AS(counterexample_profile(1.0, 0, 1), DomainError);
}

TEST_CASE("counterexample residual on both branches") {
  for (double q : {1.2, 1.5, 1.8}) {
    double worst = 0.0, fd_worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double t = -1.0 + 2.0 * (i + 0.5) / 1000;  // both branches, 500 points each
      const auto v = counterexample_profile(q, 0.0, t);
      const double res = v.u2 - f_q(v.u, q);
      worst = std::max(worst, std::abs(res) / std::max(1.0, std::abs(v.u2)));
      if (t > 0.05) {
        // Second difference of u as an independent check of the returned u''.
        const double h = 1e-4;
        const double fd = (counterexample_profile(q, 0, t + h).u - 2 * v.u + counterexample_profile(q, 0, t - h).u) / (h * h);
        fd_worst = std::max(fd_worst, std::abs(fd - v.u2) / std::max(1e-3, std::abs(v.u2)));
      }
    }
    CHECK(worst <= 1e-12);
    CHECK(fd_worst <= 1e-5);
    // Slope is continuous across the glue point and matches the profile.
    CHECK(counterexample_slope(q, 0, 0.0) == 0.0);
    const double t = 0.7, h = 1e-6;
    CHECK(counterexample_slope(q, 0, t) ==
          doctest::Approx((counterexample_profile(q, 0, t + h).u - counterexample_profile(q, 0, t - h).u) / (2 * h)).epsilon(1e-8));
  }
}

TEST_CASE("conserved energy") {
  auto tr = integrate_plane(1.5, 1.0, 0.0, 1.0, 1e-2);
  CHECK(conserved_energy(tr).front() == doctest::Approx(2.0 / 3.0));
  for (double q : {1.0, 1.3, 1.7}) CHECK(conserved_energy(integrate_plane(q, 0.0, 1.0, 1.0, 1e-2)).front() == 0.5);

  const double d = max_drift(integrate_plane(1.5, 1.0, 0.0, 10.0, 1e-3));
  CHECK(d <= 1e-8);
  std::vector<double> hs{1e-2, 5e-3, 2.5e-3}, errs;
  for (double h : hs) errs.push_back(max_drift(integrate_plane(1.5, 1.0, 0.0, 10.0, h)));
  const double p = num::observed_order(hs, errs);
  CHECK(p >= 3.8);
  CHECK(p <= 4.2);
}

TEST_CASE("radial shooting") {
  CHECK(series_start(3, 1.5, 1.0) == doctest::Approx(-1.0 / 3.0));
  const auto tr = integrate_radial(3, 1.5, 1.0, 1.0, 1e-3);
  CHECK(tr.u[1] < tr.u[0]);
  CHECK(tr.u[2] < tr.u[1]);
  // u(h) = a + u''(0) h^2 / 2 + O(h^4).
  CHECK(2.0 * (tr.u[1] - tr.u[0]) / (tr.h * tr.h) == doctest::Approx(-1.0 / 3.0).epsilon(1e-5));

  // N = 1 is the plane problem.
  const auto a = integrate_radial(1, 1.5, 1.0, 3.0, 1e-2);
  const auto b = integrate_plane(1.5, 1.0, 0.0, 3.0, 1e-2);
  CHECK(a.u == b.u);

  // q = 1, N = 2: u = 1 - r^2/4 up to the first zero r* = 2 with |u'(r*)| = 1.
  const auto z1 = zero_audit(integrate_radial(2, 1.0, 1.0, 5.0, 1e-3));
  const auto z2 = zero_audit(integrate_radial(2, 1.0, 1.0, 5.0, 5e-4));
  REQUIRE(!z1.zeros.empty());
  REQUIRE(!z2.zeros.empty());
  CHECK(std::abs(z1.zeros[0].r - z2.zeros[0].r) <= 1e-8);
  CHECK(z1.zeros[0].r == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(z1.zeros[0].slope == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_FALSE(z1.zeros[0].degenerate);

  // Richardson estimate is populated on request and small.
  IntegrateOptions opt;
  opt.estimate_error = true;
  const auto est = integrate_radial(3, 1.5, 1.0, 5.0, 1e-2, opt);
  CHECK(est.error_estimate < 1e-8);

  CHECK_THROWS_AS(integrate_radial(3, 1.5, 0.0, 1.0, 1e-2), DomainError);
  CHECK_THROWS_AS(integrate_radial(3, 1.5, 1.0, 1.0, 0.3), DomainError);
}

TEST_CASE("radial energy is non-increasing") {
  for (int n : {2, 3}) {
    const auto tr = integrate_radial(n, 1.5, 1.0, 15.0, 1e-3);
    const auto e = conserved_energy(tr);
    double worst = 0.0;
    for (std::size_t i = 1; i < e.size(); ++i) worst = std::max(worst, e[i] - e[i - 1]);
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("zero audits") {
  SUBCASE("glued profile has one degenerate zero") {
    const auto z = zero_audit(counterexample_trajectory(1.5, 0.0, -1.0, 1.0, 1000));
    REQUIRE(z.zeros.size() == 1);
    CHECK(z.degenerate_count() == 1);
    CHECK(z.zeros[0].r == doctest::Approx(0.0));
  }
  SUBCASE("plane zeros carry 2 E0") {
    const auto z = zero_audit(integrate_radial(1, 1.5, 1.0, 10.0, 1e-3));
    CHECK(z.zeros.size() >= 3);
    CHECK(z.degenerate_count() == 0);
    for (const auto& r : z.zeros) CHECK(r.slope * r.slope == doctest::Approx(4.0 / 3.0).epsilon(1e-10));
  }
  SUBCASE("damped zeros lose slope") {
    const auto z = zero_audit(integrate_radial(3, 1.5, 1.0, 20.0, 1e-3));
    CHECK(z.zeros.size() >= 5);
    CHECK(z.degenerate_count() == 0);
    for (std::size_t i = 1; i < z.zeros.size(); ++i) CHECK(z.zeros[i].slope < z.zeros[i - 1].slope);
  }
}

TEST_CASE("porous medium separated solution") {
  SUBCASE("closed form for q = 3/2") {
    // m = 2: |w| w = (t - t0)^{-2} u and w_t = -(t - t0)^{-2} f(u).
    const auto base = integrate_radial(3, 1.5, 1.0, 2.0, 1e-3);
    const auto f = make_pme_field(base, 0.0);
    CHECK(f.m() == doctest::Approx(2.0));
    const double t = 1.7, r = 0.8;
    const double w = f.w(r, t);
    const double u = base.u_at(r);
    CHECK(std::abs(w) * w == doctest::Approx(u / (t * t)).epsilon(1e-14));
    const double d = 1e-4;
    const double wt = (f.w(r, t + d) - f.w(r, t - d)) / (2 * d);
    CHECK(wt == doctest::Approx(-f_q(u, 1.5) / (t * t)).epsilon(1e-7));
  }
  SUBCASE("zero base gives zero residual") {
    OdeTrajectory z;
    z.h = 0.1;
    z.q = 1.5;
    z.dim = 2;
    for (int i = 0; i <= 10; ++i) {
      z.t.push_back(0.1 * i);
      z.u.push_back(0.0);
      z.du.push_back(0.0);
    }
    const auto res = pme_separated_residual(make_pme_field(z, 0.0), 8, 8, 0.5, 1.0);
    CHECK(res.max_residual == 0.0);
    CHECK(res.w_inf == 0.0);
  }
  SUBCASE("shooting base") {
    for (int n : {2, 3}) {
      const auto base = integrate_radial(n, 1.5, 1.0, 8.0, 5e-4);
      const auto res = pme_separated_residual(make_pme_field(base, 0.0), 64, 64, 0.5, 2.0);
      CHECK(res.max_residual <= 1e-6 * res.w_inf);
      CHECK(res.samples.size() + 64 * res.excluded.size() == 64u * 64u);
    }
  }
  SUBCASE("times before t0 are rejected") {
    const auto base = integrate_radial(3, 1.5, 1.0, 1.0, 1e-2);
    CHECK_THROWS_AS(pme_separated_residual(make_pme_field(base, 1.0), 8, 8, 0.5, 2.0), DomainError);
  }
}

TEST_CASE("trajectory csv") {
  std::ostringstream os;
  write_trajectory_csv(os, integrate_plane(1.5, 1.0, 0.0, 0.02, 1e-2));
  const std::string s = os.str();
  CHECK(s.rfind("t,u,du\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 4);
  CHECK(s.find("\r") == std::string::npos);
}

TEST_CASE("numerics helpers") {
  // Fourth-order stencils are exact on quartics, across a declared break too.
  std::vector<double> f, g;
  const double h = 0.1;
  for (int i = 0; i <= 20; ++i) {
    const double x = i * h;
    f.push_back(x < 1.0 ? std::pow(x, 4) : 3.0 - std::pow(x, 3));
  }
  std::vector<bool> smooth(20, true);
  smooth[9] = false;  // nodes 9 | 10 straddle x = 1
  const auto d = num::derivative(f, h, smooth);
  const auto d2 = num::second_derivative(f, h, smooth);
  for (int i = 0; i <= 20; ++i) {
    const double x = i * h;
    CHECK(d[i] == doctest::Approx(x < 1.0 ? 4 * std::pow(x, 3) : -3 * x * x).epsilon(1e-10));
    CHECK(d2[i] == doctest::Approx(x < 1.0 ? 12 * x * x : -6 * x).epsilon(1e-9));
  }
  std::vector<double> sq;
  for (int i = 0; i <= 7; ++i) sq.push_back(std::pow(i * 0.5, 3));  // odd interval count
  CHECK(num::simpson(sq, 0.5) == doctest::Approx(std::pow(3.5, 4) / 4).epsilon(1e-14));
  CHECK(num::gauss_split([](double x) { return std::abs(x); }, -1.0, 2.0, {0.0}) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(num::relative_residual({1e-3, -2e-3}, {1.0, 4.0}) == doctest::Approx(5e-4));
}
