#pragma once

#include "freqlab/expression.hpp"
#include "freqlab/types.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace freqlab::core {

/// Symmetric matrix field A(x) with entry gradients.
///
/// Built-ins and expression-defined fields get exact gradients by
/// differentiating the entry expressions.
class CoefficientField {
public:
  using MatrixFn = std::function<Mat(const Vec&)>;
  using GradientFn = std::function<std::array<Mat, kMaxDim>(const Vec&)>;

  CoefficientField() = default;
  CoefficientField(int dim, MatrixFn matrix, GradientFn gradient, std::string description, bool identity = false);

  static CoefficientField identity(int dim);
  static CoefficientField diagonal(const std::vector<double>& d);
  /// `entries` holds the upper triangle row by row: a11, a12, .., a1N, a22, ...
  static CoefficientField from_expressions(int dim, const std::vector<Expression>& entries);
  /// A(x) = R(eps x1) diag(1 + eps |x|^2, 1, ..) R(eps x1)^T, rotating in the
  /// (x1, x2) plane. A(0) = id.
  static CoefficientField rotation_perturbed(int dim, double eps);

  int dim() const { return dim_; }
  bool is_identity() const { return identity_; }
  const std::string& description() const { return description_; }

  Mat matrix(const Vec& x) const { return matrix_(x); }
  /// Element h is the matrix of partial derivatives d_h a_ij.
  std::array<Mat, kMaxDim> gradient(const Vec& x) const { return gradient_(x); }
  /// lambda(x) in (0,1) with lambda |xi|^2 <= <A xi, xi> <= |xi|^2 / lambda.
  double ellipticity(const Vec& x) const;

private:
  int dim_ = 0;
  MatrixFn matrix_;
  GradientFn gradient_;
  std::string description_;
  bool identity_ = false;
};

/// Scalar potential V(x).
class ScalarField {
public:
  using Fn = std::function<double(const Vec&)>;

  ScalarField() : ScalarField(Expression(0.0)) {}
  explicit ScalarField(Expression e);
  ScalarField(Fn fn, std::string description, bool zero = false);

  double operator()(const Vec& x) const { return fn_(x); }
  bool is_zero() const { return zero_; }
  const std::string& description() const { return description_; }

private:
  Fn fn_;
  std::string description_;
  bool zero_ = false;
};

enum class NonlinearityKind { none, homogeneous, sum_of_powers, tabulated };

const char* to_string(NonlinearityKind k);
NonlinearityKind nonlinearity_kind_from_string(const std::string& s);

struct PowerTerm {
  double exponent;
  Expression coefficient;
};

/// f(x,s), its primitive F(x,s) = int_0^s f(x,t) dt and the assumption
/// parameters eps0, kappa1, kappa2, q.
class NonlinearitySpec {
public:
  static NonlinearitySpec none();
  static NonlinearitySpec homogeneous(double q, double eps0 = 1.0, double kappa1 = 1.0,
                                      std::optional<double> kappa2 = std::nullopt);
  static NonlinearitySpec sum_of_powers(std::vector<PowerTerm> terms, double eps0, double kappa1, double kappa2);
  static NonlinearitySpec tabulated(Expression f, double q, double eps0, double kappa1, double kappa2);

  NonlinearityKind kind() const { return kind_; }
  double q() const { return q_; }
  double eps0() const { return eps0_; }
  double kappa1() const { return kappa1_; }
  double kappa2() const { return kappa2_; }
  const std::vector<PowerTerm>& terms() const { return terms_; }
  const std::optional<Expression>& tabulated_f() const { return f_tab_; }
  const std::optional<Expression>& superlinear() const { return superlinear_; }

  NonlinearitySpec with_superlinear(Expression h) const;
  NonlinearitySpec with_kappa1(double k) const;
  /// Pull back through x -> S x + x0.
  NonlinearitySpec pulled_back(const Mat& S, const Vec& x0) const;
  /// Step for central differences of tabulated primitives in x.
  NonlinearitySpec with_fd_step(double h) const;

  double f(const Vec& x, double s) const;
  /// Primitive F(x,s); adaptive Simpson for tabulated kinds.
  double F(const Vec& x, double s) const;
  /// Gradient of F in x at fixed s.
  Vec grad_x_F(const Vec& x, double s) const;
  /// Superlinear part h(x,s) (0 when absent); it is routed into V.
  double h(const Vec& x, double s) const;

private:
  Vec mapped(const Vec& x) const;

  NonlinearityKind kind_ = NonlinearityKind::none;
  double q_ = 1.0;
  double eps0_ = 1.0;
  double kappa1_ = 0.0;
  double kappa2_ = 1.0;
  std::vector<PowerTerm> terms_;
  std::vector<std::vector<Expression>> term_gradients_;
  std::optional<Expression> f_tab_;
  std::optional<Expression> superlinear_;
  double fd_step_ = 1e-5;
  std::optional<Mat> map_matrix_;
  Vec map_offset_;
};

/// -div(A grad u) = V u + f(x,u) on the ball of radius outer_radius in R^N.
struct ProblemSpec {
  int dim = 2;
  double outer_radius = 1.0;
  CoefficientField coefficients;
  ScalarField potential;
  NonlinearitySpec nonlinearity;

  /// Validates the invariants (N >= 2, radius > 0, matching dimensions).
  void validate() const;
  bool is_model_case() const;
};

ProblemSpec make_model_problem(int dim, double radius, double q, double eps0 = 1.0);

double eval_F(const NonlinearitySpec& spec, const Vec& x, double s);

/// min{F(x,eps0), F(x,-eps0)} / eps0^q.
double sublinear_floor(const NonlinearitySpec& spec, const Vec& x);

/// 2N - (N-2) q.
double c_constant(int dim, double q);

struct NormalizedProblem {
  ProblemSpec spec;
  Mat sqrt_a0;     ///< A(x0)^{1/2}
  Vec x0;
  Vec map(const Vec& x) const { return sqrt_a0 * x + x0; }
};

/// Affine change of variables T(x) = A(x0)^{1/2} x + x0 such that u o T solves
/// the pulled-back problem with A~(0) = id.
NormalizedProblem normalize_coordinates(const ProblemSpec& spec, const Vec& x0);

/// The two candidate pullback matrices at x: the change-of-variables form
/// A(x0)^{-1/2} A(T x) A(x0)^{-1/2} (used by normalize_coordinates) and the
/// inverse form A(x0)^{1/2} A(T x)^{-1} A(x0)^{1/2}.
Mat pullback_standard(const CoefficientField& a, const Mat& sqrt_a0, const Vec& x0, const Vec& x);
Mat pullback_inverse_form(const CoefficientField& a, const Mat& sqrt_a0, const Vec& x0, const Vec& x);

/// Symmetric square root by eigendecomposition; throws DomainError unless SPD.
Mat spd_sqrt(const Mat& a);

} // namespace freqlab::core
