#include "freqlab/problem.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace freqlab::core {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct SimpsonState {
  const std::function<double(double)>& fn;
  int max_depth;
  bool converged = true;
  double error = 0.0;
};

double simpson_recurse(SimpsonState& st, double a, double b, double fa, double fm, double fb, double whole, double tol,
                       int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = st.fn(lm);
  const double frm = st.fn(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (!std::isfinite(delta)) {
    st.converged = false;
    st.error = std::numeric_limits<double>::infinity();
    return left + right;
  }
  if (std::abs(delta) <= 15.0 * tol) {
    st.error += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  if (depth >= st.max_depth) {
    st.converged = false;
    st.error += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return simpson_recurse(st, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
         simpson_recurse(st, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

/// Adaptive Simpson on [a,b] to relative tolerance `rel`.
double adaptive_simpson(const std::function<double(double)>& fn, double a, double b, double rel) {
  if (a == b) return 0.0;
  // Coarse composite estimate sets the absolute scale of the tolerance.
  double coarse = 0.0;
  constexpr int n = 16;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    coarse += w * fn(a + (b - a) * i / n);
  }
  coarse *= (b - a) / (3.0 * n);
  const double tol = rel * std::max(std::abs(coarse), 1e-300);
  SimpsonState st{fn, 60};
  const double fa = fn(a);
  const double fb = fn(b);
  const double fm = fn(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double result = simpson_recurse(st, a, b, fa, fm, fb, whole, tol, 0);
  if (!st.converged) {
    throw QuadratureError("adaptive Simpson did not reach relative tolerance " + num(rel),
                          st.error / std::max(std::abs(result), 1e-300));
  }
  return result;
}

double signed_power(double s, double q) {
  if (s == 0.0) return 0.0;
  if (q == 1.0) return sgn(s);
  return sgn(s) * std::pow(std::abs(s), q - 1.0);
}

} // namespace

// ---------------------------------------------------------------------------
// CoefficientField

CoefficientField::CoefficientField(int dim, MatrixFn matrix, GradientFn gradient, std::string description,
                                   bool identity)
    : dim_(dim), matrix_(std::move(matrix)), gradient_(std::move(gradient)), description_(std::move(description)),
      identity_(identity) {}

CoefficientField CoefficientField::identity(int dim) {
  return CoefficientField(
      dim, [dim](const Vec&) { return Mat(Mat::Identity(dim, dim)); },
      [dim](const Vec&) {
        std::array<Mat, kMaxDim> g;
        for (auto& m : g) m = Mat::Zero(dim, dim);
        return g;
      },
      "identity", true);
}

CoefficientField CoefficientField::diagonal(const std::vector<double>& d) {
  const int dim = static_cast<int>(d.size());
  Mat a = Mat::Zero(dim, dim);
  std::string desc = "diagonal(";
  bool ident = true;
  for (int i = 0; i < dim; ++i) {
    a(i, i) = d[i];
    ident = ident && d[i] == 1.0;
    desc += (i ? "," : "") + num(d[i]);
  }
  desc += ")";
  return CoefficientField(
      dim, [a](const Vec&) { return a; },
      [dim](const Vec&) {
        std::array<Mat, kMaxDim> g;
        for (auto& m : g) m = Mat::Zero(dim, dim);
        return g;
      },
      desc, ident);
}

CoefficientField CoefficientField::from_expressions(int dim, const std::vector<Expression>& entries) {
  if (static_cast<int>(entries.size()) != dim * (dim + 1) / 2)
    throw ConfigError("coefficient field needs " + std::to_string(dim * (dim + 1) / 2) + " upper-triangle entries");
  // Index map into the upper triangle.
  std::vector<std::pair<int, int>> ij;
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) ij.emplace_back(i, j);
  std::vector<std::array<Expression, kMaxDim>> grads(entries.size());
  std::string desc = "expressions[";
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (entries[k].max_x_index() > dim) throw ConfigError("coefficient expression uses a variable beyond x" + std::to_string(dim));
    for (int h = 0; h < dim; ++h) grads[k][h] = entries[k].derivative(h);
    desc += (k ? "; " : "") + entries[k].source();
  }
  desc += "]";
  auto matrix = [dim, entries, ij](const Vec& x) {
    Mat a(dim, dim);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const double v = entries[k].eval(x);
      a(ij[k].first, ij[k].second) = v;
      a(ij[k].second, ij[k].first) = v;
    }
    return a;
  };
  auto gradient = [dim, grads, ij](const Vec& x) {
    std::array<Mat, kMaxDim> g;
    for (int h = 0; h < kMaxDim; ++h) g[h] = Mat::Zero(dim, dim);
    for (std::size_t k = 0; k < grads.size(); ++k) {
      for (int h = 0; h < dim; ++h) {
        const double v = grads[k][h].eval(x);
        g[h](ij[k].first, ij[k].second) = v;
        g[h](ij[k].second, ij[k].first) = v;
      }
    }
    return g;
  };
  return CoefficientField(dim, matrix, gradient, desc, false);
}

CoefficientField CoefficientField::rotation_perturbed(int dim, double eps) {
  if (dim < 2) throw DomainError("rotation_perturbed needs N >= 2");
  const std::string e = "(" + num(eps) + ")";
  const std::string t = "(" + e + "*x1)";
  const std::string d = "(1 + " + e + "*(x1^2 + x2^2))";
  const std::string c = "cos" + t;
  const std::string sn = "sin" + t;
  std::vector<Expression> entries;
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      std::string src;
      if (i == 0 && j == 0)
        src = c + "^2*" + d + " + " + sn + "^2";
      else if (i == 0 && j == 1)
        src = c + "*" + sn + "*(" + d + " - 1)";
      else if (i == 1 && j == 1)
        src = sn + "^2*" + d + " + " + c + "^2";
      else
        src = i == j ? "1" : "0";
      entries.push_back(Expression::parse(src));
    }
  }
  auto field = from_expressions(dim, entries);
  return CoefficientField(dim, field.matrix_, field.gradient_, "rotation_perturbed(" + num(eps) + ")", eps == 0.0);
}

double CoefficientField::ellipticity(const Vec& x) const {
  Eigen::SelfAdjointEigenSolver<Mat> es(matrix(x), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return 0.0;
  // Strictly inside (0,1) as required of lambda.
  return std::min({lo, 1.0 / hi, 1.0 - 1e-12});
}

// ---------------------------------------------------------------------------
// ScalarField

ScalarField::ScalarField(Expression e)
    : fn_([e](const Vec& x) { return e.eval(x); }), description_(e.source()),
      zero_(e.is_constant() && e.eval(Vec::Zero(1)) == 0.0) {}

ScalarField::ScalarField(Fn fn, std::string description, bool zero)
    : fn_(std::move(fn)), description_(std::move(description)), zero_(zero) {}

// ---------------------------------------------------------------------------
// NonlinearitySpec

const char* to_string(NonlinearityKind k) {
  switch (k) {
  case NonlinearityKind::none: return "none";
  case NonlinearityKind::homogeneous: return "homogeneous";
  case NonlinearityKind::sum_of_powers: return "sum_of_powers";
  case NonlinearityKind::tabulated: return "tabulated";
  }
  return "none";
}

NonlinearityKind nonlinearity_kind_from_string(const std::string& s) {
  if (s == "none" || s == "linear") return NonlinearityKind::none;
  if (s == "homogeneous") return NonlinearityKind::homogeneous;
  if (s == "sum_of_powers") return NonlinearityKind::sum_of_powers;
  if (s == "tabulated") return NonlinearityKind::tabulated;
  throw ConfigError("unknown nonlinearity kind '" + s + "'");
}

NonlinearitySpec NonlinearitySpec::none() {
  NonlinearitySpec n;
  n.kind_ = NonlinearityKind::none;
  n.q_ = 1.0;
  return n;
}

NonlinearitySpec NonlinearitySpec::homogeneous(double q, double eps0, double kappa1, std::optional<double> kappa2) {
  if (!(q >= 1.0 && q < 2.0)) throw DomainError("q must lie in [1,2)");
  if (!(eps0 > 0.0)) throw DomainError("eps0 must be positive");
  NonlinearitySpec n;
  n.kind_ = NonlinearityKind::homogeneous;
  n.q_ = q;
  n.eps0_ = eps0;
  n.kappa1_ = kappa1;
  n.kappa2_ = kappa2.value_or(std::pow(eps0, q) / q);
  return n;
}

NonlinearitySpec NonlinearitySpec::sum_of_powers(std::vector<PowerTerm> terms, double eps0, double kappa1,
                                                 double kappa2) {
  if (terms.empty()) throw ConfigError("sum_of_powers needs at least one term");
  NonlinearitySpec n;
  n.kind_ = NonlinearityKind::sum_of_powers;
  n.q_ = 0.0;
  for (const auto& t : terms) {
    if (!(t.exponent >= 1.0 && t.exponent < 2.0)) throw DomainError("q must lie in [1,2)");
    n.q_ = std::max(n.q_, t.exponent);
    std::vector<Expression> g;
    for (int h = 0; h < kMaxDim; ++h) g.push_back(t.coefficient.derivative(h));
    n.term_gradients_.push_back(std::move(g));
  }
  n.terms_ = std::move(terms);
  n.eps0_ = eps0;
  n.kappa1_ = kappa1;
  n.kappa2_ = kappa2;
  return n;
}

NonlinearitySpec NonlinearitySpec::tabulated(Expression f, double q, double eps0, double kappa1, double kappa2) {
  if (!(q >= 1.0 && q < 2.0)) throw DomainError("q must lie in [1,2)");
  NonlinearitySpec n;
  n.kind_ = NonlinearityKind::tabulated;
  n.f_tab_ = std::move(f);
  n.q_ = q;
  n.eps0_ = eps0;
  n.kappa1_ = kappa1;
  n.kappa2_ = kappa2;
  return n;
}

NonlinearitySpec NonlinearitySpec::with_superlinear(Expression h) const {
  NonlinearitySpec n = *this;
  n.superlinear_ = std::move(h);
  return n;
}

NonlinearitySpec NonlinearitySpec::with_kappa1(double k) const {
  NonlinearitySpec n = *this;
  n.kappa1_ = k;
  return n;
}

NonlinearitySpec NonlinearitySpec::with_fd_step(double h) const {
  NonlinearitySpec n = *this;
  n.fd_step_ = h;
  return n;
}

NonlinearitySpec NonlinearitySpec::pulled_back(const Mat& S, const Vec& x0) const {
  NonlinearitySpec n = *this;
  if (map_matrix_) {
    // Compose: old map M y + c applied to S x + x0.
    n.map_matrix_ = Mat(*map_matrix_ * S);
    n.map_offset_ = *map_matrix_ * x0 + map_offset_;
  } else {
    n.map_matrix_ = S;
    n.map_offset_ = x0;
  }
  return n;
}

Vec NonlinearitySpec::mapped(const Vec& x) const {
  if (!map_matrix_) return x;
  return *map_matrix_ * x + map_offset_;
}

double NonlinearitySpec::f(const Vec& xin, double s) const {
  switch (kind_) {
  case NonlinearityKind::none: return 0.0;
  case NonlinearityKind::homogeneous: return signed_power(s, q_);
  case NonlinearityKind::sum_of_powers: {
    const Vec x = mapped(xin);
    double acc = 0.0;
    for (const auto& t : terms_) acc += t.coefficient.eval(x) * signed_power(s, t.exponent);
    return acc;
  }
  case NonlinearityKind::tabulated: {
    const double v = f_tab_->eval(mapped(xin), s);
    // Expressions such as abs(s)^(-1/2)*s are 0*inf at the origin.
    return (s == 0.0 && !std::isfinite(v)) ? 0.0 : v;
  }
  }
  return 0.0;
}

double NonlinearitySpec::F(const Vec& xin, double s) const {
  switch (kind_) {
  case NonlinearityKind::none: return 0.0;
  case NonlinearityKind::homogeneous: return std::pow(std::abs(s), q_) / q_;
  case NonlinearityKind::sum_of_powers: {
    const Vec x = mapped(xin);
    double acc = 0.0;
    for (const auto& t : terms_) acc += t.coefficient.eval(x) * std::pow(std::abs(s), t.exponent) / t.exponent;
    return acc;
  }
  case NonlinearityKind::tabulated: {
    const Vec x = mapped(xin);
    const Expression& fx = *f_tab_;
    // t = s tau^2 removes the |t|^(q-2) t kink at the origin from the integrand.
    const std::function<double(double)> g = [&](double tau) {
      return tau == 0.0 ? 0.0 : fx.eval(x, s * tau * tau) * 2.0 * s * tau;
    };
    return adaptive_simpson(g, 0.0, 1.0, 1e-10);
  }
  }
  return 0.0;
}

Vec NonlinearitySpec::grad_x_F(const Vec& xin, double s) const {
  const int dim = static_cast<int>(xin.size());
  Vec g = Vec::Zero(dim);
  switch (kind_) {
  case NonlinearityKind::none:
  case NonlinearityKind::homogeneous: return g;
  case NonlinearityKind::sum_of_powers: {
    const Vec x = mapped(xin);
    Vec gy = Vec::Zero(x.size());
    for (std::size_t k = 0; k < terms_.size(); ++k) {
      const double w = std::pow(std::abs(s), terms_[k].exponent) / terms_[k].exponent;
      for (int h = 0; h < x.size(); ++h) gy[h] += term_gradients_[k][h].eval(x) * w;
    }
    // Chain rule through the affine pullback.
    return map_matrix_ ? Vec(map_matrix_->transpose() * gy) : gy;
  }
  case NonlinearityKind::tabulated: {
    for (int h = 0; h < dim; ++h) {
      Vec xp = xin, xm = xin;
      xp[h] += fd_step_;
      xm[h] -= fd_step_;
      g[h] = (F(xp, s) - F(xm, s)) / (2.0 * fd_step_);
    }
    return g;
  }
  }
  return g;
}

double NonlinearitySpec::h(const Vec& xin, double s) const {
  if (!superlinear_) return 0.0;
  return superlinear_->eval(mapped(xin), s);
}

// ---------------------------------------------------------------------------
// ProblemSpec

void ProblemSpec::validate() const {
  if (dim < 2) throw DomainError("dimension N must be >= 2");
  if (dim > kMaxDim) throw DomainError("dimension N must be <= 3");
  if (!(outer_radius > 0.0)) throw DomainError("outer radius must be positive");
  if (coefficients.dim() != dim) throw DomainError("coefficient field dimension does not match N");
}

bool ProblemSpec::is_model_case() const {
  return coefficients.is_identity() && potential.is_zero() && !nonlinearity.superlinear() &&
         (nonlinearity.kind() == NonlinearityKind::homogeneous || nonlinearity.kind() == NonlinearityKind::none);
}

ProblemSpec make_model_problem(int dim, double radius, double q, double eps0) {
  ProblemSpec p;
  p.dim = dim;
  p.outer_radius = radius;
  p.coefficients = CoefficientField::identity(dim);
  p.potential = ScalarField();
  p.nonlinearity = NonlinearitySpec::homogeneous(q, eps0).with_fd_step(1e-5 * radius);
  p.validate();
  return p;
}

double eval_F(const NonlinearitySpec& spec, const Vec& x, double s) { return spec.F(x, s); }

double sublinear_floor(const NonlinearitySpec& spec, const Vec& x) {
  const double e = spec.eps0();
  return std::min(spec.F(x, e), spec.F(x, -e)) / std::pow(e, spec.q());
}

double c_constant(int dim, double q) { return 2.0 * dim - (dim - 2) * q; }

Mat spd_sqrt(const Mat& a) {
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()))
    throw DomainError("matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw DomainError("matrix is not positive definite");
  const Vec root = es.eigenvalues().cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Mat pullback_standard(const CoefficientField& a, const Mat& sqrt_a0, const Vec& x0, const Vec& x) {
  const Mat inv = sqrt_a0.inverse();
  return inv * a.matrix(sqrt_a0 * x + x0) * inv;
}

Mat pullback_inverse_form(const CoefficientField& a, const Mat& sqrt_a0, const Vec& x0, const Vec& x) {
  return sqrt_a0 * a.matrix(sqrt_a0 * x + x0).inverse() * sqrt_a0;
}

NormalizedProblem normalize_coordinates(const ProblemSpec& spec, const Vec& x0) {
  spec.validate();
  if (x0.size() != spec.dim) throw DomainError("x0 has the wrong dimension");
  const Mat s = spd_sqrt(spec.coefficients.matrix(x0));
  const Mat s_inv = s.inverse();
  const int dim = spec.dim;

  NormalizedProblem out;
  out.sqrt_a0 = s;
  out.x0 = x0;
  out.spec.dim = dim;
  // The ball of radius delta1 around x0 contains T(B_rho) for rho = sqrt(lambda_min) delta1.
  Eigen::SelfAdjointEigenSolver<Mat> es(spec.coefficients.matrix(x0), Eigen::EigenvaluesOnly);
  out.spec.outer_radius = spec.outer_radius / std::sqrt(es.eigenvalues().maxCoeff());

  const CoefficientField a = spec.coefficients;
  out.spec.coefficients = CoefficientField(
      dim, [a, s, s_inv, x0](const Vec& x) { return Mat(s_inv * a.matrix(s * x + x0) * s_inv); },
      [a, s, s_inv, x0, dim](const Vec& x) {
        const auto g = a.gradient(s * x + x0);
        std::array<Mat, kMaxDim> out_g;
        for (int h = 0; h < kMaxDim; ++h) out_g[h] = Mat::Zero(dim, dim);
        for (int h = 0; h < dim; ++h) {
          Mat acc = Mat::Zero(dim, dim);
          for (int k = 0; k < dim; ++k) acc += g[k] * s(k, h);
          out_g[h] = s_inv * acc * s_inv;
        }
        return out_g;
      },
      "pullback(" + a.description() + ")", spec.coefficients.is_identity());

  const ScalarField v = spec.potential;
  out.spec.potential = ScalarField([v, s, x0](const Vec& x) { return v(Vec(s * x + x0)); },
                                   "pullback(" + v.description() + ")", v.is_zero());
  out.spec.nonlinearity = spec.nonlinearity.pulled_back(s, x0);
  return out;
}

} // namespace freqlab::core
