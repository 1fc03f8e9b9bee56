#pragma once

#include "freqlab/elliptic_solver.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace freqlab::freq {

/// |S^{N-1}| = 2 pi^{N/2} / Gamma(N/2).
double unit_sphere_area(int dim);

struct FrequencyOptions {
  /// Radius spacing in samples: trajectory nodes per step for radial fields
  /// (default 8), rings per step for grid fields (default 1).
  int stride = 0;
  /// N is left absent where H <= h_floor_rel * max H.
  double h_floor_rel = 1e-14;
  /// Passed on to residual_field for radial fields.
  std::optional<double> exclusion;
};

struct FrequencyProfile {
  std::vector<double> r, H, D, D1, d, dprime, surfaceD;
  std::vector<std::optional<double>> N;
  double h_floor = 0.0;
  std::vector<double> below_floor;

  /// Columns r,H,D,D1,d,dprime,N,surfaceD; an absent N is written as "nan".
  void write_csv(std::ostream& os) const;
};

/// Sphere (S_) and ball (B_) integrals over the audited radii, with
///   mu = <Ax,x>/|x|^2, Z = Ax/mu, E = <A grad u, grad u>, u_nu = <A grad u, nu>,
///   rho = div(A grad u) + V u + f(x,u).
struct FieldIntegrals {
  int dim = 2;
  bool identity_a = true;
  field::Representation representation = field::Representation::radial;
  double spacing = 0.0;  ///< radius step
  FrequencyProfile profile;

  std::vector<double> S_u2;          ///< int u^2
  std::vector<double> S_unu2;        ///< int u_nu^2 / mu
  std::vector<double> S_u2_divAr;    ///< int u^2 div(A grad |x|)
  std::vector<double> S_Vu2_fu;      ///< int V u^2 + f u
  std::vector<double> S_2F_fu;       ///< int 2F - f u
  std::vector<double> S_E;           ///< int E
  std::vector<double> S_Zgu_unu;     ///< int <Z, grad u> u_nu
  std::vector<double> S_linf;        ///< sup |u| on S_r

  std::vector<double> B_Vu2_fu;      ///< int V u^2 + f u
  std::vector<double> B_u_rho;       ///< int u rho
  std::vector<double> B_Zgu_rho;     ///< int <Z, grad u> rho
  std::vector<double> B_Zgu_lin;     ///< int (V u + f) <Z, grad u>
  std::vector<double> B_f_Zgu;       ///< int f <Z, grad u>
  std::vector<double> B_F_divZ;      ///< int F div Z
  std::vector<double> B_gradF_Z;     ///< int <grad_x F, Z>
  // Grid fields only (empty for radial ones):
  std::vector<double> B_Z_gradE;     ///< int <Z, grad E>
  std::vector<double> B_Z_gradA;     ///< int <Z, grad a_hl> d_h u d_l u
  std::vector<double> B_A_dZ;        ///< int a_hl d_h Z_j d_j u d_l u
  std::vector<double> B_divZ_E;      ///< int div Z E

  /// Radii near zeros of a radial profile, where r-derivatives of the
  /// integrals are not resolved.
  std::vector<double> nonsmooth;
  double residual_sup = 0.0;

  /// Z-field diagnostics over all samples off the origin.
  double max_Z_nu_defect = 0.0;   ///< max |<Z,nu> - |x||
  double max_mu_defect = 0.0;     ///< max |mu - 1|
  double max_Z_defect = 0.0;      ///< max |Z - x|
  double max_divZ_defect = 0.0;   ///< max |div Z - N|
  double max_divZ_over_r = 0.0;   ///< max |div Z - N| / |x|
  double max_divAr_defect = 0.0;  ///< max |div(A grad|x|) - (N-1)/|x||

  std::size_t size() const { return profile.r.size(); }
};

/// Requires A = id for radial fields. The radial reduction uses Gauss
/// quadrature on the dense output, split at zeros; rho terms use Simpson on
/// the trajectory nodes.
FieldIntegrals compute_integrals(const core::ProblemSpec& spec, const field::SolutionField& u,
                                 const FrequencyOptions& opt = {});

FrequencyProfile frequency_profile(const core::ProblemSpec& spec, const field::SolutionField& u,
                                   const FrequencyOptions& opt = {});

/// Trapezoid in theta on the ring of radius r (which must be a ring radius)
/// for grid fields; omega r^{N-1} g(r) for radial ones.
double sphere_integral(const field::SolutionField& u, double r, const std::function<double(const Vec& x, double u)>& g);
/// Composite Simpson over radii of sphere integrals (grid), Gauss on the
/// dense output (radial).
double ball_integral(const field::SolutionField& u, double r, const std::function<double(const Vec& x, double u)>& g);

} // namespace freqlab::freq
