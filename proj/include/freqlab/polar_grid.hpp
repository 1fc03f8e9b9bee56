#pragma once

#include "freqlab/types.hpp"

#include <array>
#include <vector>

namespace freqlab::grid {

/// Uniform polar grid on the disk of radius R: rings r_i = i dr (i = 0..M,
/// ring 0 is the pole stored as K equal copies) and angles theta_j = j dtheta
/// (j = 0..K-1). K must be divisible by 4 so that the pole gradient can be
/// read off along theta = 0 and theta = pi/2.
struct PolarGrid {
  int M = 64;
  int K = 64;
  double R = 1.0;

  double dr() const { return R / M; }
  double dtheta() const;
  double r(int i) const { return i * dr(); }
  double theta(int j) const { return j * dtheta(); }
  Vec point(int i, int j) const;
  /// Ring index of radius r; throws DomainError unless r is a ring radius.
  int ring_of(double r) const;
  void validate() const;

  bool operator==(const PolarGrid&) const = default;
};

/// Grid functions: row i is ring i, column j is angle j.
using GridFn = Eigen::MatrixXd;

GridFn make_grid_fn(const PolarGrid& g, double fill = 0.0);

/// Discrete calculus on a PolarGrid: fourth-order differences in r (central
/// stencils continue through the pole along the opposite ray, one-sided at
/// the outer ring) and spectral differentiation in theta.
class PolarOps {
public:
  explicit PolarOps(const PolarGrid& g);

  const PolarGrid& grid() const { return grid_; }

  GridFn d_r(const GridFn& u) const;
  GridFn d_theta(const GridFn& u) const;
  /// Cartesian gradient (d/dx1, d/dx2).
  std::array<GridFn, 2> gradient(const GridFn& u) const;
  /// div(F1, F2) of a Cartesian vector field.
  GridFn divergence(const GridFn& f1, const GridFn& f2) const;

  /// G_i = r_i dtheta sum_j g_ij, the trapezoid rule on the circle S_{r_i}.
  std::vector<double> ring_integrals(const GridFn& g) const;
  double sphere_integral(const GridFn& g, int ring) const;
  /// Integral over B_{r_i} for every ring: composite Simpson in s of G(s)
  /// (3/8 rule on the last three intervals when i is odd).
  std::vector<double> ball_integrals(const GridFn& g) const;

private:
  PolarGrid grid_;
  Eigen::MatrixXd dtheta_;  ///< K x K spectral differentiation matrix
};

} // namespace freqlab::grid
