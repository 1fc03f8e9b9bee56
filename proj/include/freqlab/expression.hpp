#pragma once

#include "freqlab/types.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace freqlab {

/// Small arithmetic expression language used for coefficient, potential and
/// nonlinearity fields in config files.
///
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := '-' unary | power
///   power  := atom ('^' unary)?          (right associative)
///   atom   := number | 'pi' | var | func '(' expr ')' | '(' expr ')'
///   var    := 'x1' | 'x2' | 'x3' | 's'
///   func   := exp | sin | cos | sqrt | log | abs | sgn
///
/// Expressions are immutable and cheap to copy. `derivative` differentiates
/// the tree exactly, which gives closed-form coefficient gradients.
class Expression {
public:
  struct Node;

  Expression();
  explicit Expression(double constant);

  static Expression parse(std::string_view source);

  double eval(const Vec& x, double s = 0.0) const;

  /// Variable index: 0..2 for x1..x3, 3 for s.
  Expression derivative(int var) const;

  bool is_constant() const;
  /// Largest x-index referenced plus one (0 if only s or constants).
  int max_x_index() const;
  bool uses_s() const;

  const std::string& source() const { return source_; }

  static constexpr int kVarS = 3;

private:
  Expression(std::shared_ptr<const Node> root, std::string source);

  std::shared_ptr<const Node> root_;
  std::string source_;
};

} // namespace freqlab
