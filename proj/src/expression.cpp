#include "freqlab/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

namespace freqlab {

enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Exp, Sin, Cos, Sqrt, Log, Abs, Sgn };

struct Expression::Node {
  Op op;
  double value = 0.0;
  int var = 0;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr constant(double v) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::Const;
  n->value = v;
  return n;
}

NodePtr variable(int v) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::Var;
  n->var = v;
  return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

// Constructors with the trivial 0/1 folds so derivative trees stay small.
NodePtr add(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  if (a->op == Op::Const && b->op == Op::Const) return constant(a->value + b->value);
  return make(Op::Add, a, b);
}

NodePtr sub(NodePtr a, NodePtr b) {
  if (is_const(b, 0.0)) return a;
  if (a->op == Op::Const && b->op == Op::Const) return constant(a->value - b->value);
  return make(Op::Sub, a, b);
}

NodePtr mul(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  if (a->op == Op::Const && b->op == Op::Const) return constant(a->value * b->value);
  return make(Op::Mul, a, b);
}

NodePtr div(NodePtr a, NodePtr b) {
  if (is_const(a, 0.0)) return constant(0.0);
  if (is_const(b, 1.0)) return a;
  return make(Op::Div, a, b);
}

NodePtr neg(NodePtr a) {
  if (a->op == Op::Const) return constant(-a->value);
  return make(Op::Neg, a);
}

double eval_node(const Expression::Node& n, const Vec& x, double s) {
  switch (n.op) {
  case Op::Const: return n.value;
  case Op::Var:
    if (n.var == Expression::kVarS) return s;
    return n.var < x.size() ? x[n.var] : 0.0;
  case Op::Neg: return -eval_node(*n.a, x, s);
  case Op::Add: return eval_node(*n.a, x, s) + eval_node(*n.b, x, s);
  case Op::Sub: return eval_node(*n.a, x, s) - eval_node(*n.b, x, s);
  case Op::Mul: return eval_node(*n.a, x, s) * eval_node(*n.b, x, s);
  case Op::Div: return eval_node(*n.a, x, s) / eval_node(*n.b, x, s);
  case Op::Pow: {
    const double base = eval_node(*n.a, x, s);
    if (n.b->op == Op::Const) {
      const double e = n.b->value;
      if (e == 2.0) return base * base;
      if (e == 1.0) return base;
    }
    return std::pow(base, eval_node(*n.b, x, s));
  }
  case Op::Exp: return std::exp(eval_node(*n.a, x, s));
  case Op::Sin: return std::sin(eval_node(*n.a, x, s));
  case Op::Cos: return std::cos(eval_node(*n.a, x, s));
  case Op::Sqrt: return std::sqrt(eval_node(*n.a, x, s));
  case Op::Log: return std::log(eval_node(*n.a, x, s));
  case Op::Abs: return std::abs(eval_node(*n.a, x, s));
  case Op::Sgn: return sgn(eval_node(*n.a, x, s));
  }
  return 0.0;
}

NodePtr diff(const NodePtr& n, int v) {
  switch (n->op) {
  case Op::Const: return constant(0.0);
  case Op::Var: return constant(n->var == v ? 1.0 : 0.0);
  case Op::Neg: return neg(diff(n->a, v));
  case Op::Add: return add(diff(n->a, v), diff(n->b, v));
  case Op::Sub: return sub(diff(n->a, v), diff(n->b, v));
  case Op::Mul: return add(mul(diff(n->a, v), n->b), mul(n->a, diff(n->b, v)));
  case Op::Div:
    return div(sub(mul(diff(n->a, v), n->b), mul(n->a, diff(n->b, v))), make(Op::Pow, n->b, constant(2.0)));
  case Op::Pow: {
    const NodePtr da = diff(n->a, v);
    if (n->b->op == Op::Const) {
      const double e = n->b->value;
      if (e == 0.0) return constant(0.0);
      return mul(mul(constant(e), make(Op::Pow, n->a, constant(e - 1.0))), da);
    }
    // d(a^b) = a^b (b' log a + b a'/a)
    const NodePtr db = diff(n->b, v);
    return mul(n, add(mul(db, make(Op::Log, n->a)), div(mul(n->b, da), n->a)));
  }
  case Op::Exp: return mul(n, diff(n->a, v));
  case Op::Sin: return mul(make(Op::Cos, n->a), diff(n->a, v));
  case Op::Cos: return neg(mul(make(Op::Sin, n->a), diff(n->a, v)));
  case Op::Sqrt: return div(diff(n->a, v), mul(constant(2.0), n));
  case Op::Log: return div(diff(n->a, v), n->a);
  case Op::Abs: return mul(make(Op::Sgn, n->a), diff(n->a, v));
  case Op::Sgn: return constant(0.0);
  }
  return constant(0.0);
}

void visit_vars(const Expression::Node& n, int& max_x, bool& uses_s) {
  if (n.op == Op::Var) {
    if (n.var == Expression::kVarS)
      uses_s = true;
    else
      max_x = std::max(max_x, n.var + 1);
  }
  if (n.a) visit_vars(*n.a, max_x, uses_s);
  if (n.b) visit_vars(*n.b, max_x, uses_s);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

class Parser {
public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return n;
  }

private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("expression '" + std::string(src_) + "': " + msg + " at offset " + std::to_string(pos_));
  }

  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr n = term();
    for (;;) {
      if (accept('+'))
        n = make(Op::Add, n, term());
      else if (accept('-'))
        n = make(Op::Sub, n, term());
      else
        return n;
    }
  }

  NodePtr term() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*'))
        n = make(Op::Mul, n, unary());
      else if (accept('/'))
        n = make(Op::Div, n, unary());
      else
        return n;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (accept('^')) return make(Op::Pow, base, unary());
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr n = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const std::string rest(src_.substr(pos_));
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(rest, &used);
      } catch (const std::exception&) {
        fail("bad number");
      }
      pos_ += used;
      return constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      const std::string_view id = src_.substr(start, pos_ - start);
      if (id == "pi") return constant(std::numbers::pi);
      if (id == "s") return variable(Expression::kVarS);
      if (id == "x1") return variable(0);
      if (id == "x2") return variable(1);
      if (id == "x3") return variable(2);
      Op op;
      if (id == "exp")
        op = Op::Exp;
      else if (id == "sin")
        op = Op::Sin;
      else if (id == "cos")
        op = Op::Cos;
      else if (id == "sqrt")
        op = Op::Sqrt;
      else if (id == "log")
        op = Op::Log;
      else if (id == "abs")
        op = Op::Abs;
      else if (id == "sgn")
        op = Op::Sgn;
      else
        fail("unknown identifier '" + std::string(id) + "'");
      if (!accept('(')) fail("expected '(' after function name");
      NodePtr arg = expr();
      if (!accept(')')) fail("expected ')'");
      return make(op, arg);
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

} // namespace

Expression::Expression() : Expression(0.0) {}

Expression::Expression(double c) : root_(constant(c)), source_(format_double(c)) {}

Expression::Expression(std::shared_ptr<const Node> root, std::string source)
    : root_(std::move(root)), source_(std::move(source)) {}

Expression Expression::parse(std::string_view source) {
  Parser p(source);
  return Expression(p.parse(), std::string(source));
}

double Expression::eval(const Vec& x, double s) const { return eval_node(*root_, x, s); }

Expression Expression::derivative(int var) const {
  static const char* names[] = {"x1", "x2", "x3", "s"};
  return Expression(diff(root_, var), "d(" + source_ + ")/d" + names[var]);
}

bool Expression::is_constant() const {
  int mx = 0;
  bool us = false;
  visit_vars(*root_, mx, us);
  return mx == 0 && !us;
}

int Expression::max_x_index() const {
  int mx = 0;
  bool us = false;
  visit_vars(*root_, mx, us);
  return mx;
}

bool Expression::uses_s() const {
  int mx = 0;
  bool us = false;
  visit_vars(*root_, mx, us);
  return us;
}

} // namespace freqlab
