#include "freqlab/polar_grid.hpp"

#include "freqlab/numerics.hpp"

#include <cmath>
#include <numbers>

namespace freqlab::grid {

double PolarGrid::dtheta() const { return 2.0 * std::numbers::pi / K; }

Vec PolarGrid::point(int i, int j) const {
  const double rr = r(i), t = theta(j);
  return make_vec({rr * std::cos(t), rr * std::sin(t)});
}

int PolarGrid::ring_of(double rr) const {
  const double x = rr / dr();
  const long k = std::lround(x);
  if (k < 0 || k > M || std::abs(x - k) > 1e-9) throw DomainError("radius " + std::to_string(rr) + " is not a grid radius");
  return static_cast<int>(k);
}

void PolarGrid::validate() const {
  if (M < 4) throw DomainError("polar grid needs at least 4 radial intervals");
  if (K < 8 || K % 4 != 0) throw DomainError("polar grid needs K >= 8 angles with K divisible by 4");
  if (!(R > 0.0)) throw DomainError("polar grid radius must be positive");
}

GridFn make_grid_fn(const PolarGrid& g, double fill) { return GridFn::Constant(g.M + 1, g.K, fill); }

PolarOps::PolarOps(const PolarGrid& g) : grid_(g), dtheta_(g.K, g.K) {
  g.validate();
  const int k = g.K;
  const double h = g.dtheta();
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      dtheta_(a, b) = a == b ? 0.0 : 0.5 * (((a - b) % 2 == 0) ? 1.0 : -1.0) / std::tan((a - b) * h / 2.0);
}

GridFn PolarOps::d_r(const GridFn& u) const {
  const int m = grid_.M, k = grid_.K;
  const double h = grid_.dr();
  GridFn out(m + 1, k);
  // Value on the ray theta_j at signed radius index s.
  auto at = [&](int s, int j) { return s >= 0 ? u(s, j) : u(-s, (j + k / 2) % k); };
  static const double one_sided[5][5] = {{-25, 48, -36, 16, -3},
                                         {-3, -10, 18, -6, 1},
                                         {1, -8, 0, 8, -1},
                                         {-1, 6, -18, 10, 3},
                                         {3, -16, 36, -48, 25}};
  for (int i = 0; i <= m; ++i) {
    for (int j = 0; j < k; ++j) {
      if (i + 2 <= m) {
        out(i, j) = (at(i - 2, j) - 8 * at(i - 1, j) + 8 * at(i + 1, j) - at(i + 2, j)) / (12 * h);
      } else {
        const int start = m - 4;
        const int off = i - start;
        double acc = 0.0;
        for (int s = 0; s < 5; ++s) acc += one_sided[off][s] * u(start + s, j);
        out(i, j) = acc / (12 * h);
      }
    }
  }
  return out;
}

GridFn PolarOps::d_theta(const GridFn& u) const {
  GridFn out = u * dtheta_.transpose();
  out.row(0).setZero();
  return out;
}

std::array<GridFn, 2> PolarOps::gradient(const GridFn& u) const {
  const int m = grid_.M, k = grid_.K;
  const GridFn ur = d_r(u);
  const GridFn ut = d_theta(u);
  GridFn g1(m + 1, k), g2(m + 1, k);
  for (int j = 0; j < k; ++j) {
    const double c = std::cos(grid_.theta(j)), s = std::sin(grid_.theta(j));
    for (int i = 1; i <= m; ++i) {
      const double r = grid_.r(i);
      g1(i, j) = c * ur(i, j) - s / r * ut(i, j);
      g2(i, j) = s * ur(i, j) + c / r * ut(i, j);
    }
  }
  // At the pole the radial derivative along theta = 0 and pi/2 is the gradient.
  g1.row(0).setConstant(ur(0, 0));
  g2.row(0).setConstant(ur(0, k / 4));
  return {g1, g2};
}

GridFn PolarOps::divergence(const GridFn& f1, const GridFn& f2) const {
  return gradient(f1)[0] + gradient(f2)[1];
}

std::vector<double> PolarOps::ring_integrals(const GridFn& g) const {
  std::vector<double> out(grid_.M + 1);
  for (int i = 0; i <= grid_.M; ++i) out[i] = grid_.r(i) * grid_.dtheta() * g.row(i).sum();
  return out;
}

double PolarOps::sphere_integral(const GridFn& g, int ring) const {
  return grid_.r(ring) * grid_.dtheta() * g.row(ring).sum();
}

std::vector<double> PolarOps::ball_integrals(const GridFn& g) const {
  const auto ring = ring_integrals(g);
  std::vector<double> out(grid_.M + 1);
  for (int i = 0; i <= grid_.M; ++i) out[i] = num::simpson_prefix(ring, grid_.dr(), static_cast<std::size_t>(i));
  return out;
}

} // namespace freqlab::grid
