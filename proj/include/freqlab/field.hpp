#pragma once

#include "freqlab/ode_lab.hpp"
#include "freqlab/polar_grid.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace freqlab::field {

enum class Representation { radial, grid2d };

std::string to_string(Representation r);

/// A candidate solution u: either a radial profile u(|x|) in R^N (stored as
/// an OdeTrajectory on uniform radii, with its zero crossings) or values on
/// a 2-D polar grid.
class SolutionField {
public:
  static SolutionField radial(ode::OdeTrajectory profile, int dim);
  static SolutionField grid2d(grid::PolarGrid g, grid::GridFn values);

  Representation representation() const { return rep_; }
  int dim() const { return dim_; }
  double outer_radius() const;

  const ode::OdeTrajectory& profile() const { return profile_; }
  const grid::PolarGrid& polar() const { return grid_; }
  const grid::GridFn& values() const { return values_; }

  /// Radial fields: u and u' at radius r from the dense output.
  double radial_value(double r) const;
  double radial_slope(double r) const;

  /// sup |u| over the samples in the closed ball B_r.
  double linf_ball(double r) const;
  /// sup |u| over the samples on S_r.
  double linf_sphere(double r) const;

  /// Radii where a radial profile vanishes: crossings, sign changes between
  /// nodes and the edges of runs of vanishing samples.
  std::vector<double> radial_zeros() const;

  std::string description;
  double q = 1.5;
  std::string nonlinearity = "homogeneous";
  /// Estimated truncation error of the residual field (absent for
  /// externally produced fields).
  std::optional<double> truncation_estimate;

private:
  Representation rep_ = Representation::radial;
  int dim_ = 2;
  ode::OdeTrajectory profile_;
  grid::PolarGrid grid_;
  grid::GridFn values_;
};

/// Samples a function of x onto a polar grid.
SolutionField sample_grid(const grid::PolarGrid& g, const std::function<double(const Vec&)>& u);

/// Text format: '#'-comment and key=value header lines (representation, N,
/// q, nonlinearity, dims, ...), then a CSV header row and data rows written
/// with 17 significant digits. Radial rows are r,u,du; grid rows are
/// i,j,r,theta,u.
void write_field(std::ostream& os, const SolutionField& f);
SolutionField read_field(std::istream& is);

} // namespace freqlab::field
