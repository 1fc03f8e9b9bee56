#include "freqlab/frequency.hpp"

#include "freqlab/numerics.hpp"
#include "freqlab/problem_config.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace freqlab::freq {

namespace {

using field::Representation;
using field::SolutionField;
using Density = std::function<double(double s, double u, double du)>;

Vec on_axis(int dim, double r) {
  Vec x = make_vec(dim, 0.0);
  x(0) = r;
  return x;
}

double ipow(double s, int k) {
  double p = 1.0;
  for (int i = 0; i < k; ++i) p *= s;
  return p;
}

// Gauss on each interval of [0, upto], split at crossings.
std::vector<double> cumulative_gauss(const ode::OdeTrajectory& p, int dim, std::size_t upto, const Density& g) {
  const double om = unit_sphere_area(dim);
  std::vector<double> out(upto + 1, 0.0);
  for (std::size_t i = 0; i < upto; ++i) {
    std::vector<double> cuts;
    for (const auto& c : p.crossings_in(i)) cuts.push_back(c.t);
    const auto dens = [&](double s) { return g(s, p.u_at(s), p.du_at(s)) * ipow(s, dim - 1); };
    out[i + 1] = out[i] + om * num::gauss_split(dens, p.t[i], p.t[i + 1], cuts);
  }
  return out;
}

// rho at invalid nodes is replaced by linear interpolation between valid ones.
std::vector<double> patched_rho(const solve::Residual& res) {
  std::vector<double> rho = res.rho;
  const std::size_t n = rho.size();
  std::size_t i = 0;
  while (i < n) {
    if (res.valid[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && !res.valid[j]) ++j;
    const bool has_left = i > 0, has_right = j < n;
    for (std::size_t k = i; k < j; ++k) {
      if (has_left && has_right) {
        const double w = static_cast<double>(k - (i - 1)) / static_cast<double>(j - (i - 1));
        rho[k] = (1 - w) * rho[i - 1] + w * rho[j];
      } else {
        rho[k] = has_left ? rho[i - 1] : (has_right ? rho[j] : 0.0);
      }
    }
    i = j;
  }
  return rho;
}

void fill_profile(FieldIntegrals& I, const FrequencyOptions& opt) {
  auto& P = I.profile;
  const std::size_t n = P.r.size();
  P.D.resize(n);
  for (std::size_t k = 0; k < n; ++k) P.D[k] = P.D1[k] - I.B_Vu2_fu[k];
  const double hmax = P.H.empty() ? 0.0 : *std::max_element(P.H.begin(), P.H.end());
  P.h_floor = opt.h_floor_rel * hmax;
  P.N.assign(n, std::nullopt);
  for (std::size_t k = 0; k < n; ++k) {
    if (P.H[k] > P.h_floor)
      P.N[k] = P.r[k] * P.D[k] / P.H[k];
    else
      P.below_floor.push_back(P.r[k]);
  }
}

FieldIntegrals radial_integrals(const core::ProblemSpec& spec, const SolutionField& u, const FrequencyOptions& opt) {
  if (!spec.coefficients.is_identity()) throw DomainError("radial fields need A = id");
  const auto& p = u.profile();
  const int dim = u.dim();
  const int stride = opt.stride > 0 ? opt.stride : 8;
  const double h = p.h;
  const double om = unit_sphere_area(dim);
  const auto& nl = spec.nonlinearity;
  const auto& V = spec.potential;

  FieldIntegrals I;
  I.dim = dim;
  I.identity_a = true;
  I.representation = Representation::radial;
  I.spacing = stride * h;

  std::vector<std::size_t> nodes;
  for (std::size_t k = stride; k + 1 < p.size(); k += stride) nodes.push_back(k);
  if (nodes.size() < 5) throw DomainError("too few radii for the frequency profile");
  const std::size_t last = nodes.back();

  const auto E = cumulative_gauss(p, dim, last, [](double, double, double du) { return du * du; });
  const auto lin = cumulative_gauss(p, dim, last, [&](double s, double v, double) {
    const Vec x = on_axis(spec.dim, s);
    return V(x) * v * v + nl.f(x, v) * v;
  });
  const auto Fb = cumulative_gauss(p, dim, last, [&](double s, double v, double) { return nl.F(on_axis(spec.dim, s), v); });
  const auto fZ = cumulative_gauss(p, dim, last, [&](double s, double v, double du) {
    const Vec x = on_axis(spec.dim, s);
    return (V(x) * v + nl.f(x, v)) * s * du;
  });
  const auto fZonly = cumulative_gauss(p, dim, last, [&](double s, double v, double du) {
    return nl.f(on_axis(spec.dim, s), v) * s * du;
  });
  const auto gFZ = cumulative_gauss(p, dim, last, [&](double s, double v, double) {
    return s * nl.grad_x_F(on_axis(spec.dim, s), v)(0);
  });

  solve::ResidualOptions ro;
  ro.exclusion = opt.exclusion;
  const auto res = solve::residual_field(spec, u, ro);
  I.residual_sup = res.sup();
  const auto rho = patched_rho(res);
  std::vector<double> urho(p.size()), xrho(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double w = om * ipow(p.t[i], dim - 1);
    urho[i] = w * p.u[i] * rho[i];
    xrho[i] = w * p.t[i] * p.du[i] * rho[i];
  }

  const auto zeros = u.radial_zeros();
  auto& P = I.profile;
  for (std::size_t k : nodes) {
    const double r = p.t[k], v = p.u[k], du = p.du[k];
    const Vec x = on_axis(spec.dim, r);
    const double w = om * ipow(r, dim - 1);
    const double f = nl.f(x, v), F = nl.F(x, v);
    P.r.push_back(r);
    P.H.push_back(w * v * v);
    P.surfaceD.push_back(w * v * du);
    P.D1.push_back(E[k]);
    P.d.push_back(Fb[k]);
    P.dprime.push_back(w * F);
    I.S_u2.push_back(w * v * v);
    I.S_unu2.push_back(w * du * du);
    I.S_u2_divAr.push_back(w * v * v * (dim - 1) / r);
    I.S_Vu2_fu.push_back(w * (V(x) * v * v + f * v));
    I.S_2F_fu.push_back(w * (2 * F - f * v));
    I.S_E.push_back(w * du * du);
    I.S_Zgu_unu.push_back(w * r * du * du);
    I.S_linf.push_back(std::abs(v));
    I.B_Vu2_fu.push_back(lin[k]);
    I.B_u_rho.push_back(num::simpson_prefix(urho, h, k));
    I.B_Zgu_rho.push_back(num::simpson_prefix(xrho, h, k));
    I.B_Zgu_lin.push_back(fZ[k]);
    I.B_f_Zgu.push_back(fZonly[k]);
    I.B_F_divZ.push_back(dim * Fb[k]);
    I.B_gradF_Z.push_back(gFZ[k]);
    const double reach = 2 * I.spacing + h;
    if (std::any_of(zeros.begin(), zeros.end(), [&](double z) { return z > 0.0 && std::abs(z - r) <= reach; }))
      I.nonsmooth.push_back(r);
  }
  fill_profile(I, opt);
  return I;
}

struct NodeGeometry {
  double mu = 1.0;
  Eigen::Vector2d Z = Eigen::Vector2d::Zero();
  Eigen::Matrix2d dZ = Eigen::Matrix2d::Zero();  ///< dZ(h, j) = d_h Z_j
  double divZ = 0.0;
  double divAr = 0.0;
};

// Closed forms from A and its entry gradients:
//   d_h mu = (2 (Ax)_h + x^T (d_h A) x) / |x|^2 - 2 x_h mu / |x|^2,
//   d_h Z_j = (a_jh + (d_h a_jl) x_l) / mu - (Ax)_j d_h mu / mu^2,
//   div(A grad|x|) = ((d_i a_ij) x_j + tr A - mu) / |x|.
NodeGeometry geometry(const Eigen::Matrix2d& a, const std::array<Mat, kMaxDim>& da, const Eigen::Vector2d& x) {
  NodeGeometry g;
  const double r2 = x.squaredNorm(), r = std::sqrt(r2);
  const Eigen::Vector2d ax = a * x;
  g.mu = x.dot(ax) / r2;
  g.Z = ax / g.mu;
  double div_a_x = 0.0;
  for (int h = 0; h < 2; ++h) {
    const Eigen::Matrix2d dh = da[h].topLeftCorner(2, 2);
    const double dmu = (2 * ax(h) + x.dot(dh * x)) / r2 - 2 * x(h) * g.mu / r2;
    const Eigen::Vector2d dhx = dh * x;
    for (int j = 0; j < 2; ++j) g.dZ(h, j) = (a(j, h) + dhx(j)) / g.mu - ax(j) * dmu / (g.mu * g.mu);
    div_a_x += dhx(h);
  }
  g.divZ = g.dZ.trace();
  g.divAr = (div_a_x + a.trace() - g.mu) / r;
  return g;
}

FieldIntegrals grid_integrals(const core::ProblemSpec& spec, const SolutionField& u, const FrequencyOptions& opt) {
  if (spec.dim != 2) throw DomainError("grid fields need N = 2");
  const auto& gr = u.polar();
  const grid::PolarOps ops(gr);
  const int M = gr.M, K = gr.K;
  const auto& U = u.values();
  const auto grad = ops.gradient(U);
  const auto& nl = spec.nonlinearity;
  const auto res = solve::residual_field(spec, u);

  FieldIntegrals I;
  I.dim = 2;
  I.identity_a = spec.coefficients.is_identity();
  I.representation = Representation::grid2d;
  const int stride = opt.stride > 0 ? opt.stride : 1;
  I.spacing = stride * gr.dr();
  I.residual_sup = res.sup();

  auto make = [&] { return grid::make_grid_fn(gr); };
  grid::GridFn H = make(), sD = make(), u2 = make(), unu2 = make(), u2divAr = make(), lin = make(), F2fu = make(),
               E = make(), Zgu_unu = make(), Fg = make(), urho = make(), Zrho = make(), Zlin = make(), fZ = make(),
               FdivZ = make(), gFZ = make(), ZgA = make(), AdZ = make(), divZE = make();
  std::vector<Eigen::Vector2d> Zs(static_cast<std::size_t>((M + 1) * K));

  for (int i = 0; i <= M; ++i)
    for (int j = 0; j < K; ++j) {
      const Vec xv = gr.point(i, j);
      const Eigen::Vector2d x(xv(0), xv(1));
      const Mat am = spec.coefficients.matrix(xv);
      const Eigen::Matrix2d a = am.topLeftCorner(2, 2);
      const Eigen::Vector2d gu(grad[0](i, j), grad[1](i, j));
      const Eigen::Vector2d agu = a * gu;
      const double v = U(i, j), rho = res.rho_grid(i, j);
      const double Vx = spec.potential(xv), f = nl.f(xv, v), F = nl.F(xv, v);
      E(i, j) = agu.dot(gu);
      u2(i, j) = v * v;
      lin(i, j) = Vx * v * v + f * v;
      F2fu(i, j) = 2 * F - f * v;
      Fg(i, j) = F;
      urho(i, j) = v * rho;
      if (i == 0) continue;  // ring integrals weight the origin by r = 0
      const auto da = spec.coefficients.gradient(xv);
      const NodeGeometry geo = geometry(a, da, x);
      const double r = x.norm();
      const Eigen::Vector2d nu = x / r;
      const double unu = agu.dot(nu);
      const double zgu = geo.Z.dot(gu);
      Zs[static_cast<std::size_t>(i * K + j)] = geo.Z;
      H(i, j) = v * v * geo.mu;
      sD(i, j) = v * unu;
      unu2(i, j) = unu * unu / geo.mu;
      u2divAr(i, j) = v * v * geo.divAr;
      Zgu_unu(i, j) = zgu * unu;
      Zrho(i, j) = zgu * rho;
      Zlin(i, j) = zgu * (Vx * v + f);
      fZ(i, j) = zgu * f;
      FdivZ(i, j) = F * geo.divZ;
      const Vec gF = nl.grad_x_F(xv, v);
      gFZ(i, j) = gF(0) * geo.Z(0) + gF(1) * geo.Z(1);
      double t1 = 0.0;
      for (int h = 0; h < 2; ++h) t1 += geo.Z(h) * gu.dot(da[h].topLeftCorner(2, 2) * gu);
      ZgA(i, j) = t1;
      AdZ(i, j) = agu.dot(geo.dZ * gu);
      divZE(i, j) = geo.divZ * E(i, j);

      I.max_Z_nu_defect = std::max(I.max_Z_nu_defect, std::abs(geo.Z.dot(nu) - r));
      I.max_mu_defect = std::max(I.max_mu_defect, std::abs(geo.mu - 1.0));
      I.max_Z_defect = std::max(I.max_Z_defect, (geo.Z - x).cwiseAbs().maxCoeff());
      I.max_divZ_defect = std::max(I.max_divZ_defect, std::abs(geo.divZ - 2.0));
      I.max_divZ_over_r = std::max(I.max_divZ_over_r, std::abs(geo.divZ - 2.0) / r);
      I.max_divAr_defect = std::max(I.max_divAr_defect, std::abs(geo.divAr - 1.0 / r));
    }

  const auto gE = ops.gradient(E);
  grid::GridFn ZgE = make();
  for (int i = 1; i <= M; ++i)
    for (int j = 0; j < K; ++j) {
      const auto& z = Zs[static_cast<std::size_t>(i * K + j)];
      ZgE(i, j) = z(0) * gE[0](i, j) + z(1) * gE[1](i, j);
    }

  const auto sph = [&](const grid::GridFn& g) { return ops.ring_integrals(g); };
  const auto ball = [&](const grid::GridFn& g) { return ops.ball_integrals(g); };
  const auto sH = sph(H), ssD = sph(sD), su2 = sph(u2), sunu2 = sph(unu2), su2div = sph(u2divAr), slin = sph(lin),
             s2F = sph(F2fu), sE = sph(E), sZ = sph(Zgu_unu), sF = sph(Fg);
  const auto bE = ball(E), blin = ball(lin), bF = ball(Fg), burho = ball(urho), bZrho = ball(Zrho), bZlin = ball(Zlin),
             bfZ = ball(fZ), bFdivZ = ball(FdivZ), bgFZ = ball(gFZ), bZgE = ball(ZgE), bZgA = ball(ZgA), bAdZ = ball(AdZ),
             bdivZE = ball(divZE);

  auto& P = I.profile;
  for (int i = stride; i < M; i += stride) {
    P.r.push_back(gr.r(i));
    P.H.push_back(sH[i]);
    P.surfaceD.push_back(ssD[i]);
    P.D1.push_back(bE[i]);
    P.d.push_back(bF[i]);
    P.dprime.push_back(sF[i]);
    I.S_u2.push_back(su2[i]);
    I.S_unu2.push_back(sunu2[i]);
    I.S_u2_divAr.push_back(su2div[i]);
    I.S_Vu2_fu.push_back(slin[i]);
    I.S_2F_fu.push_back(s2F[i]);
    I.S_E.push_back(sE[i]);
    I.S_Zgu_unu.push_back(sZ[i]);
    I.S_linf.push_back(U.row(i).cwiseAbs().maxCoeff());
    I.B_Vu2_fu.push_back(blin[i]);
    I.B_u_rho.push_back(burho[i]);
    I.B_Zgu_rho.push_back(bZrho[i]);
    I.B_Zgu_lin.push_back(bZlin[i]);
    I.B_f_Zgu.push_back(bfZ[i]);
    I.B_F_divZ.push_back(bFdivZ[i]);
    I.B_gradF_Z.push_back(bgFZ[i]);
    I.B_Z_gradE.push_back(bZgE[i]);
    I.B_Z_gradA.push_back(bZgA[i]);
    I.B_A_dZ.push_back(bAdZ[i]);
    I.B_divZ_E.push_back(bdivZE[i]);
  }
  if (P.r.size() < 5) throw DomainError("too few radii for the frequency profile");
  fill_profile(I, opt);
  return I;
}

} // namespace

double unit_sphere_area(int dim) { return 2.0 * std::pow(std::numbers::pi, dim / 2.0) / std::tgamma(dim / 2.0); }

void FrequencyProfile::write_csv(std::ostream& os) const {
  os << "r,H,D,D1,d,dprime,N,surfaceD\n";
  const auto g = [](double v) { return core::format_number(v); };
  for (std::size_t k = 0; k < r.size(); ++k)
    os << g(r[k]) << "," << g(H[k]) << "," << g(D[k]) << "," << g(D1[k]) << "," << g(d[k]) << "," << g(dprime[k]) << ","
       << (N[k] ? g(*N[k]) : std::string("nan")) << "," << g(surfaceD[k]) << "\n";
}

FieldIntegrals compute_integrals(const core::ProblemSpec& spec, const SolutionField& u, const FrequencyOptions& opt) {
  return u.representation() == Representation::radial ? radial_integrals(spec, u, opt) : grid_integrals(spec, u, opt);
}

FrequencyProfile frequency_profile(const core::ProblemSpec& spec, const SolutionField& u, const FrequencyOptions& opt) {
  return compute_integrals(spec, u, opt).profile;
}

double sphere_integral(const SolutionField& u, double r, const std::function<double(const Vec&, double)>& g) {
  if (r > u.outer_radius() * (1 + 1e-12)) throw DomainError("radius beyond the field");
  if (u.representation() == Representation::radial) {
    const int dim = u.dim();
    return unit_sphere_area(dim) * ipow(r, dim - 1) * g(on_axis(std::min(dim, kMaxDim), r), u.radial_value(r));
  }
  const auto& gr = u.polar();
  const int ring = gr.ring_of(r);
  grid::GridFn v = grid::make_grid_fn(gr);
  for (int j = 0; j < gr.K; ++j) v(ring, j) = g(gr.point(ring, j), u.values()(ring, j));
  return grid::PolarOps(gr).sphere_integral(v, ring);
}

double ball_integral(const SolutionField& u, double r, const std::function<double(const Vec&, double)>& g) {
  if (r > u.outer_radius() * (1 + 1e-12)) throw DomainError("radius beyond the field");
  if (u.representation() == Representation::radial) {
    const auto& p = u.profile();
    const int dim = u.dim();
    const double om = unit_sphere_area(dim);
    const int xd = std::min(dim, kMaxDim);
    const auto dens = [&](double s) { return g(on_axis(xd, s), u.radial_value(s)) * ipow(s, dim - 1); };
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < p.size() && p.t[i] < r; ++i) {
      const double b = std::min(r, p.t[i + 1]);
      std::vector<double> cuts;
      for (const auto& c : p.crossings_in(i))
        if (c.t < b) cuts.push_back(c.t);
      acc += num::gauss_split(dens, p.t[i], b, cuts);
    }
    return om * acc;
  }
  const auto& gr = u.polar();
  const int ring = gr.ring_of(r);
  grid::GridFn v(gr.M + 1, gr.K);
  for (int i = 0; i <= gr.M; ++i)
    for (int j = 0; j < gr.K; ++j) v(i, j) = g(gr.point(i, j), u.values()(i, j));
  return grid::PolarOps(gr).ball_integrals(v)[ring];
}

} // namespace freqlab::freq
