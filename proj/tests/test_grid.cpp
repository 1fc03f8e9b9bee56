#include "freqlab/field.hpp"
#include "freqlab/polar_grid.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace freqlab;
using grid::GridFn;
using grid::PolarGrid;
using grid::PolarOps;

namespace {

constexpr double pi = std::numbers::pi;

GridFn sample(const PolarGrid& g, auto fn) {
  GridFn v = grid::make_grid_fn(g);
  for (int i = 0; i <= g.M; ++i)
    for (int j = 0; j < g.K; ++j) {
      const Vec x = g.point(i, j);
      v(i, j) = fn(x(0), x(1));
    }
  return v;
}

} // namespace

TEST_CASE("polar grid geometry") {
  PolarGrid g{16, 32, 2.0};
  CHECK(g.dr() == doctest::Approx(0.125));
  CHECK(g.ring_of(1.0) == 8);
  CHECK_THROWS_AS(g.ring_of(1.01), DomainError);
  CHECK_THROWS_AS((PolarGrid{16, 30, 1.0}.validate()), DomainError);
  CHECK_THROWS_AS((PolarGrid{2, 32, 1.0}.validate()), DomainError);
}

TEST_CASE("polar integrals against closed forms") {
  PolarGrid g{64, 64, 1.0};
  PolarOps ops(g);
  const GridFn one = grid::make_grid_fn(g, 1.0);
  CHECK(ops.sphere_integral(one, 64) == doctest::Approx(2 * pi).epsilon(1e-13));
  const auto area = ops.ball_integrals(one);
  for (int i : {1, 7, 32, 64}) CHECK(area[i] == doctest::Approx(pi * g.r(i) * g.r(i)).epsilon(1e-12));

  // u = x1: int_S u^2 = pi r^3, int_B |grad u|^2 = pi r^2.
  const GridFn u = sample(g, [](double x, double) { return x; });
  const GridFn u2 = u.cwiseProduct(u);
  for (int i : {8, 33, 64}) CHECK(ops.sphere_integral(u2, i) == doctest::Approx(pi * std::pow(g.r(i), 3)).epsilon(1e-12));
  const auto grad = ops.gradient(u);
  const GridFn e = grad[0].cwiseProduct(grad[0]) + grad[1].cwiseProduct(grad[1]);
  const auto be = ops.ball_integrals(e);
  for (int i : {9, 40, 64}) CHECK(be[i] == doctest::Approx(pi * g.r(i) * g.r(i)).epsilon(1e-10));

  // int_{B_r} |x|^4 = pi r^6 / 3 exercises the Simpson and 3/8 branches.
  const GridFn r4 = sample(g, [](double x, double y) { return std::pow(x * x + y * y, 2); });
  const auto b4 = ops.ball_integrals(r4);
  for (int i : {6, 7, 64}) CHECK(b4[i] == doctest::Approx(pi * std::pow(g.r(i), 6) / 3).epsilon(1e-6));
}

TEST_CASE("polar derivatives are fourth order and exact through the pole") {
  auto err = [](int m) {
    PolarGrid g{m, 32, 1.0};
    PolarOps ops(g);
    auto fn = [](double x, double y) { return std::exp(0.7 * x) * std::cos(y) + x * y * y; };
    auto fx = [](double x, double y) { return 0.7 * std::exp(0.7 * x) * std::cos(y) + y * y; };
    auto fy = [](double x, double y) { return -std::exp(0.7 * x) * std::sin(y) + 2 * x * y; };
    const auto grad = ops.gradient(sample(g, fn));
    const GridFn ex = sample(g, fx), ey = sample(g, fy);
    return std::max((grad[0] - ex).cwiseAbs().maxCoeff(), (grad[1] - ey).cwiseAbs().maxCoeff());
  };
  const double e1 = err(16), e2 = err(32);
  CHECK(e1 < 1e-3);
  CHECK(std::log2(e1 / e2) > 3.5);

  // Laplacian of x1^2 x2 + x2^3 = 8 x2, cubic so the radial stencil is exact.
  PolarGrid g{12, 16, 1.5};
  PolarOps ops(g);
  const auto grad = ops.gradient(sample(g, [](double x, double y) { return x * x * y + y * y * y; }));
  const GridFn lap = ops.divergence(grad[0], grad[1]);
  const GridFn want = sample(g, [](double, double y) { return 8 * y; });
  CHECK((lap - want).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("grid field round trip and sup norms") {
  PolarGrid g{8, 16, 1.0};
  auto f = field::sample_grid(g, [](const Vec& x) { return x(0) - 2 * x(1) + 0.25; });
  f.description = "affine";
  f.truncation_estimate = 3e-9;
  std::stringstream ss;
  field::write_field(ss, f);
  const auto back = field::read_field(ss);
  CHECK(back.representation() == field::Representation::grid2d);
  CHECK(back.polar() == g);
  CHECK((back.values() - f.values()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.description == "affine");
  REQUIRE(back.truncation_estimate);
  CHECK(*back.truncation_estimate == 3e-9);
  CHECK(f.linf_ball(0.0) == doctest::Approx(0.25));
  CHECK(f.linf_sphere(1.0) == doctest::Approx(std::sqrt(5.0) + 0.25).epsilon(1e-2));
}

TEST_CASE("radial field round trip keeps crossings") {
  auto traj = ode::integrate_radial(2, 1.5, 1.0, 6.0, 0.01);
  REQUIRE(!traj.crossings.empty());
  const auto f = field::SolutionField::radial(traj, 2);
  std::stringstream ss;
  field::write_field(ss, f);
  const auto back = field::read_field(ss);
  CHECK(back.dim() == 2);
  CHECK(back.profile().crossings.size() == traj.crossings.size());
  CHECK(back.profile().u == traj.u);
  const double r = traj.crossings[0].t + 0.003;
  CHECK(back.radial_value(r) == f.radial_value(r));
  const auto zeros = back.radial_zeros();
  REQUIRE(!zeros.empty());
  CHECK(zeros[0] == doctest::Approx(traj.crossings[0].t));
}

TEST_CASE("field reader rejects malformed input") {
  std::stringstream missing("representation=radial\nq=1.5\nr,u,du\n0,1,0\n");
  CHECK_THROWS_AS(field::read_field(missing), ConfigError);
  std::stringstream bad("representation=grid2d\nN=2\nq=1.5\ndims=4,8\nR=1\ni,j,r,theta,u\n0,0,0,0,x\n");
  CHECK_THROWS_AS(field::read_field(bad), ConfigError);
  std::stringstream holes("representation=grid2d\nN=2\nq=1.5\ndims=4,8\nR=1\ni,j,r,theta,u\n0,0,0,0,1\n");
  CHECK_THROWS_AS(field::read_field(holes), ConfigError);
}
