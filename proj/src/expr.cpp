#include <errcalc/expr.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace errcalc {

namespace {

bool is_const(const ExprPtr& e, double v) {
  return e->kind == ExprKind::constant && e->value == v;
}

}  // namespace

ExprPtr make_const(double c) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::constant;
  e->value = c;
  return e;
}

ExprPtr make_coord(int i) {
  if (i < 0) throw ArityError("coordinate index must be positive");
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::coordinate;
  e->coord = i;
  return e;
}

ExprPtr make_add(ExprPtr a, ExprPtr b) {
  if (is_const(a, 0.0)) return b;
  if (is_const(b, 0.0)) return a;
  if (a->kind == ExprKind::constant && b->kind == ExprKind::constant)
    return make_const(a->value + b->value);
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::add;
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}

ExprPtr make_sub(ExprPtr a, ExprPtr b) {
  if (is_const(b, 0.0)) return a;
  if (a->kind == ExprKind::constant && b->kind == ExprKind::constant)
    return make_const(a->value - b->value);
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::sub;
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}

ExprPtr make_mul(ExprPtr a, ExprPtr b) {
  if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
  if (is_const(a, 1.0)) return b;
  if (is_const(b, 1.0)) return a;
  if (a->kind == ExprKind::constant && b->kind == ExprKind::constant)
    return make_const(a->value * b->value);
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::mul;
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}

ExprPtr make_div(ExprPtr a, ExprPtr b) {
  if (is_const(b, 1.0)) return a;
  if (is_const(a, 0.0) && !is_const(b, 0.0)) return make_const(0.0);
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::div;
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}

ExprPtr make_pow(ExprPtr a, int exponent) {
  if (exponent == 0) return make_const(1.0);
  if (exponent == 1) return a;
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::pow_int;
  e->exponent = exponent;
  e->a = std::move(a);
  return e;
}

ExprPtr make_neg(ExprPtr a) {
  if (a->kind == ExprKind::constant) return make_const(-a->value);
  auto n = std::make_shared<Expr>();
  n->kind = ExprKind::neg;
  n->a = std::move(a);
  return n;
}

ExprPtr make_call(Builtin fn, ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::call;
  e->fn = fn;
  e->a = std::move(a);
  return e;
}

// ---------------------------------------------------------------------------
// Parser: infix arithmetic, ^ with integer exponent, function calls,
// coordinates x1..xN. Tracks line/column for errors.

namespace {

struct Parser {
  std::string_view text;
  std::size_t pos = 0;
  int line = 1;
  int col = 1;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, line, col);
  }

  bool eof() const { return pos >= text.size(); }
  char peek() const { return eof() ? '\0' : text[pos]; }

  char advance() {
    const char c = text[pos++];
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    return c;
  }

  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) advance();
  }

  bool consume(char c) {
    skip_ws();
    if (peek() == c) {
      advance();
      return true;
    }
    return false;
  }

  void expect(char c, const char* what) {
    if (!consume(c)) fail(std::string("expected '") + c + "' " + what);
  }

  ExprPtr parse_expr() {
    ExprPtr e = parse_term();
    for (;;) {
      skip_ws();
      if (peek() == '+') {
        advance();
        e = make_add(e, parse_term());
      } else if (peek() == '-') {
        advance();
        e = make_sub(e, parse_term());
      } else {
        return e;
      }
    }
  }

  ExprPtr parse_term() {
    ExprPtr e = parse_unary();
    for (;;) {
      skip_ws();
      if (peek() == '*') {
        advance();
        e = make_mul(e, parse_unary());
      } else if (peek() == '/') {
        advance();
        e = make_div(e, parse_unary());
      } else {
        return e;
      }
    }
  }

  ExprPtr parse_unary() {
    skip_ws();
    if (peek() == '-') {
      advance();
      return make_neg(parse_unary());
    }
    if (peek() == '+') {
      advance();
      return parse_unary();
    }
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_atom();
    skip_ws();
    if (peek() == '^') {
      advance();
      return make_pow(base, parse_int_exponent());
    }
    return base;
  }

  int parse_int_exponent() {
    skip_ws();
    bool parens = false;
    if (peek() == '(') {
      advance();
      parens = true;
      skip_ws();
    }
    bool negative = false;
    if (peek() == '-') {
      advance();
      negative = true;
      skip_ws();
    }
    if (!std::isdigit(static_cast<unsigned char>(peek())))
      fail("integer exponent required after '^'");
    long v = 0;
    while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) {
      v = v * 10 + (advance() - '0');
      if (v > 64) fail("exponent too large");
    }
    if (!eof() && (peek() == '.' || peek() == 'e' || peek() == 'E'))
      fail("integer exponent required after '^'");
    if (parens) expect(')', "closing the exponent");
    return negative ? -static_cast<int>(v) : static_cast<int>(v);
  }

  ExprPtr parse_atom() {
    skip_ws();
    if (eof()) fail("unexpected end of expression");
    const char c = peek();
    if (c == '(') {
      advance();
      ExprPtr e = parse_expr();
      expect(')', "closing the group");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    fail(std::string("unexpected character '") + c + "'");
  }

  ExprPtr parse_number() {
    const int start_line = line, start_col = col;
    std::string num;
    while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) num += advance();
    if (peek() == '.') {
      num += advance();
      while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) num += advance();
    }
    if (peek() == 'e' || peek() == 'E') {
      num += advance();
      if (peek() == '+' || peek() == '-') num += advance();
      if (!std::isdigit(static_cast<unsigned char>(peek())))
        fail("malformed number exponent");
      while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) num += advance();
    }
    try {
      return make_const(std::stod(num));
    } catch (const std::exception&) {
      throw ParseError("malformed number '" + num + "'", start_line, start_col);
    }
  }

  ExprPtr parse_ident() {
    const int start_line = line, start_col = col;
    std::string id;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_'))
      id += advance();
    if (id.size() > 1 && id[0] == 'x' &&
        std::all_of(id.begin() + 1, id.end(),
                    [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      const long idx = std::stol(id.substr(1));
      if (idx < 1) throw ParseError("coordinate indices start at x1", start_line, start_col);
      return make_coord(static_cast<int>(idx - 1));
    }
    Builtin fn;
    if (id == "exp") fn = Builtin::exp_fn;
    else if (id == "log") fn = Builtin::log_fn;
    else if (id == "sin") fn = Builtin::sin_fn;
    else if (id == "cos") fn = Builtin::cos_fn;
    else if (id == "tanh") fn = Builtin::tanh_fn;
    else if (id == "sqrt") fn = Builtin::sqrt_fn;
    else if (id == "pi") return make_const(M_PI);
    else
      throw ParseError("unknown identifier '" + id + "'", start_line, start_col);
    expect('(', ("after function '" + id + "'").c_str());
    ExprPtr arg = parse_expr();
    expect(')', ("closing call of '" + id + "'").c_str());
    return make_call(fn, arg);
  }
};

}  // namespace

Functional Functional::parse(std::string_view text) {
  Parser p{text};
  ExprPtr e = p.parse_expr();
  p.skip_ws();
  if (!p.eof()) p.fail("trailing input");
  return Functional(e);
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double ipow(double base, int e) {
  if (e < 0) {
    if (base == 0.0) throw DomainError("0 raised to a negative power");
    return 1.0 / ipow(base, -e);
  }
  double r = 1.0;
  double b = base;
  for (int k = e; k > 0; k >>= 1) {
    if (k & 1) r *= b;
    b *= b;
  }
  return r;
}

double call_value(Builtin fn, double u) {
  switch (fn) {
    case Builtin::exp_fn:
      return std::exp(u);
    case Builtin::log_fn:
      if (u <= 0.0) throw DomainError("log of a non-positive value");
      return std::log(u);
    case Builtin::sin_fn:
      return std::sin(u);
    case Builtin::cos_fn:
      return std::cos(u);
    case Builtin::tanh_fn:
      return std::tanh(u);
    case Builtin::sqrt_fn:
      if (u < 0.0) throw DomainError("sqrt of a negative value");
      return std::sqrt(u);
  }
  throw DomainError("unknown builtin");
}

// first derivative of a builtin at u, given its value v = fn(u)
double call_deriv(Builtin fn, double u, double v) {
  switch (fn) {
    case Builtin::exp_fn:
      return v;
    case Builtin::log_fn:
      return 1.0 / u;
    case Builtin::sin_fn:
      return std::cos(u);
    case Builtin::cos_fn:
      return -std::sin(u);
    case Builtin::tanh_fn:
      return 1.0 - v * v;
    case Builtin::sqrt_fn:
      if (u <= 0.0) throw DomainError("sqrt not differentiable at 0");
      return 0.5 / v;
  }
  throw DomainError("unknown builtin");
}

double call_deriv2(Builtin fn, double u, double v) {
  switch (fn) {
    case Builtin::exp_fn:
      return v;
    case Builtin::log_fn:
      return -1.0 / (u * u);
    case Builtin::sin_fn:
      return -v;
    case Builtin::cos_fn:
      return -v;
    case Builtin::tanh_fn:
      return -2.0 * v * (1.0 - v * v);
    case Builtin::sqrt_fn:
      if (u <= 0.0) throw DomainError("sqrt not twice differentiable at 0");
      return -0.25 / (v * u);
  }
  throw DomainError("unknown builtin");
}

double eval_node(const Expr& e, const Vector& w) {
  switch (e.kind) {
    case ExprKind::constant:
      return e.value;
    case ExprKind::coordinate:
      if (e.coord >= w.size())
        throw ArityError("coordinate x" + std::to_string(e.coord + 1) +
                         " out of range for dimension " + std::to_string(w.size()));
      return w[e.coord];
    case ExprKind::add:
      return eval_node(*e.a, w) + eval_node(*e.b, w);
    case ExprKind::sub:
      return eval_node(*e.a, w) - eval_node(*e.b, w);
    case ExprKind::mul:
      return eval_node(*e.a, w) * eval_node(*e.b, w);
    case ExprKind::div: {
      const double num = eval_node(*e.a, w);
      const double den = eval_node(*e.b, w);
      if (den == 0.0) throw DomainError("division by zero");
      return num / den;
    }
    case ExprKind::pow_int:
      return ipow(eval_node(*e.a, w), e.exponent);
    case ExprKind::neg:
      return -eval_node(*e.a, w);
    case ExprKind::call:
      return call_value(e.fn, eval_node(*e.a, w));
  }
  throw DomainError("unknown node");
}

struct Dual {
  double v;
  Vector g;
};

Dual eval_dual(const Expr& e, const Vector& w) {
  const Index n = w.size();
  switch (e.kind) {
    case ExprKind::constant:
      return {e.value, Vector::Zero(n)};
    case ExprKind::coordinate: {
      if (e.coord >= n)
        throw ArityError("coordinate x" + std::to_string(e.coord + 1) +
                         " out of range for dimension " + std::to_string(n));
      Vector g = Vector::Zero(n);
      g[e.coord] = 1.0;
      return {w[e.coord], std::move(g)};
    }
    case ExprKind::add: {
      Dual a = eval_dual(*e.a, w), b = eval_dual(*e.b, w);
      return {a.v + b.v, a.g + b.g};
    }
    case ExprKind::sub: {
      Dual a = eval_dual(*e.a, w), b = eval_dual(*e.b, w);
      return {a.v - b.v, a.g - b.g};
    }
    case ExprKind::mul: {
      Dual a = eval_dual(*e.a, w), b = eval_dual(*e.b, w);
      return {a.v * b.v, a.v * b.g + b.v * a.g};
    }
    case ExprKind::div: {
      Dual a = eval_dual(*e.a, w), b = eval_dual(*e.b, w);
      if (b.v == 0.0) throw DomainError("division by zero");
      const double q = a.v / b.v;
      return {q, (a.g - q * b.g) / b.v};
    }
    case ExprKind::pow_int: {
      Dual a = eval_dual(*e.a, w);
      const double v = ipow(a.v, e.exponent);
      const double d = e.exponent * ipow(a.v, e.exponent - 1);
      return {v, d * a.g};
    }
    case ExprKind::neg: {
      Dual a = eval_dual(*e.a, w);
      return {-a.v, -a.g};
    }
    case ExprKind::call: {
      Dual a = eval_dual(*e.a, w);
      const double v = call_value(e.fn, a.v);
      const double d = call_deriv(e.fn, a.v, v);
      return {v, d * a.g};
    }
  }
  throw DomainError("unknown node");
}

struct Dual2 {
  double v;
  Vector g;
  Matrix h;
};

Dual2 eval_dual2(const Expr& e, const Vector& w) {
  const Index n = w.size();
  switch (e.kind) {
    case ExprKind::constant:
      return {e.value, Vector::Zero(n), Matrix::Zero(n, n)};
    case ExprKind::coordinate: {
      if (e.coord >= n)
        throw ArityError("coordinate x" + std::to_string(e.coord + 1) +
                         " out of range for dimension " + std::to_string(n));
      Vector g = Vector::Zero(n);
      g[e.coord] = 1.0;
      return {w[e.coord], std::move(g), Matrix::Zero(n, n)};
    }
    case ExprKind::add: {
      Dual2 a = eval_dual2(*e.a, w), b = eval_dual2(*e.b, w);
      return {a.v + b.v, a.g + b.g, a.h + b.h};
    }
    case ExprKind::sub: {
      Dual2 a = eval_dual2(*e.a, w), b = eval_dual2(*e.b, w);
      return {a.v - b.v, a.g - b.g, a.h - b.h};
    }
    case ExprKind::mul: {
      Dual2 a = eval_dual2(*e.a, w), b = eval_dual2(*e.b, w);
      // the symmetrized outer product is materialized first so mirrored
      // entries run through identical arithmetic (bitwise-symmetric h)
      const Matrix outer =
          a.g * b.g.transpose() + b.g * a.g.transpose();
      Matrix h = a.v * b.h + b.v * a.h + outer;
      return {a.v * b.v, a.v * b.g + b.v * a.g, std::move(h)};
    }
    case ExprKind::div: {
      Dual2 a = eval_dual2(*e.a, w), b = eval_dual2(*e.b, w);
      if (b.v == 0.0) throw DomainError("division by zero");
      const double q = a.v / b.v;
      Vector gq = (a.g - q * b.g) / b.v;
      const Matrix outer =
          gq * b.g.transpose() + b.g * gq.transpose();
      Matrix h = (a.h - q * b.h - outer) / b.v;
      return {q, std::move(gq), std::move(h)};
    }
    case ExprKind::pow_int: {
      Dual2 a = eval_dual2(*e.a, w);
      const int p = e.exponent;
      const double v = ipow(a.v, p);
      const double d1 = p * ipow(a.v, p - 1);
      const double d2 = static_cast<double>(p) * (p - 1) * ipow(a.v, p - 2);
      const Matrix outer = a.g * a.g.transpose();
      Matrix h = d1 * a.h + d2 * outer;
      return {v, d1 * a.g, std::move(h)};
    }
    case ExprKind::neg: {
      Dual2 a = eval_dual2(*e.a, w);
      return {-a.v, -a.g, -a.h};
    }
    case ExprKind::call: {
      Dual2 a = eval_dual2(*e.a, w);
      const double v = call_value(e.fn, a.v);
      const double d1 = call_deriv(e.fn, a.v, v);
      const double d2 = call_deriv2(e.fn, a.v, v);
      const Matrix outer = a.g * a.g.transpose();
      Matrix h = d1 * a.h + d2 * outer;
      return {v, d1 * a.g, std::move(h)};
    }
  }
  throw DomainError("unknown node");
}

}  // namespace

double Functional::eval(const Vector& w) const { return eval_node(*root_, w); }

std::pair<double, Vector> Functional::eval_grad(const Vector& w) const {
  Dual d = eval_dual(*root_, w);
  return {d.v, std::move(d.g)};
}

void Functional::eval_hessian(const Vector& w, double& value, Vector& grad,
                              Matrix& hess) const {
  Dual2 d = eval_dual2(*root_, w);
  value = d.v;
  grad = std::move(d.g);
  hess = std::move(d.h);
}

// ---------------------------------------------------------------------------
// Symbolic derivative

namespace {

ExprPtr diff(const ExprPtr& e, int coord) {
  switch (e->kind) {
    case ExprKind::constant:
      return make_const(0.0);
    case ExprKind::coordinate:
      return make_const(e->coord == coord ? 1.0 : 0.0);
    case ExprKind::add:
      return make_add(diff(e->a, coord), diff(e->b, coord));
    case ExprKind::sub:
      return make_sub(diff(e->a, coord), diff(e->b, coord));
    case ExprKind::mul:
      return make_add(make_mul(diff(e->a, coord), e->b),
                      make_mul(e->a, diff(e->b, coord)));
    case ExprKind::div:
      return make_div(make_sub(make_mul(diff(e->a, coord), e->b),
                               make_mul(e->a, diff(e->b, coord))),
                      make_pow(e->b, 2));
    case ExprKind::pow_int:
      return make_mul(make_mul(make_const(e->exponent), make_pow(e->a, e->exponent - 1)),
                      diff(e->a, coord));
    case ExprKind::neg:
      return make_neg(diff(e->a, coord));
    case ExprKind::call: {
      ExprPtr inner = diff(e->a, coord);
      switch (e->fn) {
        case Builtin::exp_fn:
          return make_mul(make_call(Builtin::exp_fn, e->a), inner);
        case Builtin::log_fn:
          return make_div(inner, e->a);
        case Builtin::sin_fn:
          return make_mul(make_call(Builtin::cos_fn, e->a), inner);
        case Builtin::cos_fn:
          return make_neg(make_mul(make_call(Builtin::sin_fn, e->a), inner));
        case Builtin::tanh_fn:
          return make_mul(
              make_sub(make_const(1.0), make_pow(make_call(Builtin::tanh_fn, e->a), 2)),
              inner);
        case Builtin::sqrt_fn:
          return make_div(inner,
                          make_mul(make_const(2.0), make_call(Builtin::sqrt_fn, e->a)));
      }
      throw DomainError("unknown builtin");
    }
  }
  throw DomainError("unknown node");
}

ExprPtr subst(const ExprPtr& e, const std::vector<Functional>& coords) {
  switch (e->kind) {
    case ExprKind::constant:
      return e;
    case ExprKind::coordinate:
      if (e->coord >= static_cast<int>(coords.size()))
        throw ArityError("substitution missing coordinate x" +
                         std::to_string(e->coord + 1));
      return coords[static_cast<std::size_t>(e->coord)].root();
    case ExprKind::add:
      return make_add(subst(e->a, coords), subst(e->b, coords));
    case ExprKind::sub:
      return make_sub(subst(e->a, coords), subst(e->b, coords));
    case ExprKind::mul:
      return make_mul(subst(e->a, coords), subst(e->b, coords));
    case ExprKind::div:
      return make_div(subst(e->a, coords), subst(e->b, coords));
    case ExprKind::pow_int:
      return make_pow(subst(e->a, coords), e->exponent);
    case ExprKind::neg:
      return make_neg(subst(e->a, coords));
    case ExprKind::call:
      return make_call(e->fn, subst(e->a, coords));
  }
  throw DomainError("unknown node");
}

std::optional<SparsePoly> lower(const ExprPtr& e, int dim) {
  switch (e->kind) {
    case ExprKind::constant:
      return SparsePoly::constant(dim, e->value);
    case ExprKind::coordinate:
      if (e->coord >= dim) return std::nullopt;
      return SparsePoly::coordinate(dim, e->coord);
    case ExprKind::add: {
      auto a = lower(e->a, dim), b = lower(e->b, dim);
      if (!a || !b) return std::nullopt;
      return *a + *b;
    }
    case ExprKind::sub: {
      auto a = lower(e->a, dim), b = lower(e->b, dim);
      if (!a || !b) return std::nullopt;
      return *a - *b;
    }
    case ExprKind::mul: {
      auto a = lower(e->a, dim), b = lower(e->b, dim);
      if (!a || !b) return std::nullopt;
      return *a * *b;
    }
    case ExprKind::div: {
      // polynomial only when the divisor is a nonzero constant
      if (e->b->kind != ExprKind::constant || e->b->value == 0.0) return std::nullopt;
      auto a = lower(e->a, dim);
      if (!a) return std::nullopt;
      return a->scaled(1.0 / e->b->value);
    }
    case ExprKind::pow_int: {
      if (e->exponent < 0) return std::nullopt;
      auto a = lower(e->a, dim);
      if (!a) return std::nullopt;
      return a->pow(e->exponent);
    }
    case ExprKind::neg: {
      auto a = lower(e->a, dim);
      if (!a) return std::nullopt;
      return a->scaled(-1.0);
    }
    case ExprKind::call:
      return std::nullopt;
  }
  return std::nullopt;
}

int max_coord(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::constant:
      return -1;
    case ExprKind::coordinate:
      return e->coord;
    case ExprKind::pow_int:
    case ExprKind::neg:
    case ExprKind::call:
      return max_coord(e->a);
    default:
      return std::max(max_coord(e->a), max_coord(e->b));
  }
}

}  // namespace

Functional Functional::derivative(int coord) const {
  return Functional(diff(root_, coord));
}

Functional Functional::substitute(const std::vector<Functional>& coords) const {
  return Functional(subst(root_, coords));
}

std::optional<SparsePoly> Functional::polynomial(int dim) const {
  return lower(root_, dim);
}

int Functional::min_dim() const { return max_coord(root_) + 1; }

// ---------------------------------------------------------------------------
// Printing

namespace {

const char* builtin_name(Builtin fn) {
  switch (fn) {
    case Builtin::exp_fn:
      return "exp";
    case Builtin::log_fn:
      return "log";
    case Builtin::sin_fn:
      return "sin";
    case Builtin::cos_fn:
      return "cos";
    case Builtin::tanh_fn:
      return "tanh";
    case Builtin::sqrt_fn:
      return "sqrt";
  }
  return "?";
}

int precedence(const Expr& e) {
  switch (e.kind) {
    case ExprKind::add:
    case ExprKind::sub:
      return 1;
    case ExprKind::mul:
    case ExprKind::div:
      return 2;
    case ExprKind::neg:
      return 3;
    case ExprKind::pow_int:
      return 4;
    default:
      return 5;
  }
}

void print_infix(const Expr& e, std::ostream& os, int parent_prec) {
  const int prec = precedence(e);
  const bool parens = prec < parent_prec;
  if (parens) os << '(';
  switch (e.kind) {
    case ExprKind::constant: {
      std::ostringstream tmp;
      tmp << e.value;
      os << tmp.str();
      break;
    }
    case ExprKind::coordinate:
      os << 'x' << (e.coord + 1);
      break;
    case ExprKind::add:
      print_infix(*e.a, os, prec);
      os << " + ";
      print_infix(*e.b, os, prec + 1);
      break;
    case ExprKind::sub:
      print_infix(*e.a, os, prec);
      os << " - ";
      print_infix(*e.b, os, prec + 1);
      break;
    case ExprKind::mul:
      print_infix(*e.a, os, prec);
      os << "*";
      print_infix(*e.b, os, prec + 1);
      break;
    case ExprKind::div:
      print_infix(*e.a, os, prec);
      os << "/";
      print_infix(*e.b, os, prec + 1);
      break;
    case ExprKind::pow_int:
      print_infix(*e.a, os, prec + 1);
      os << '^';
      if (e.exponent < 0)
        os << '(' << e.exponent << ')';
      else
        os << e.exponent;
      break;
    case ExprKind::neg:
      os << '-';
      print_infix(*e.a, os, prec + 1);
      break;
    case ExprKind::call:
      os << builtin_name(e.fn) << '(';
      print_infix(*e.a, os, 0);
      os << ')';
      break;
  }
  if (parens) os << ')';
}

void print_tree(const Expr& e, std::ostream& os, int depth) {
  for (int i = 0; i < depth; ++i) os << "  ";
  switch (e.kind) {
    case ExprKind::constant:
      os << "const " << e.value << '\n';
      return;
    case ExprKind::coordinate:
      os << "coord x" << (e.coord + 1) << '\n';
      return;
    case ExprKind::add:
      os << "add\n";
      break;
    case ExprKind::sub:
      os << "sub\n";
      break;
    case ExprKind::mul:
      os << "mul\n";
      break;
    case ExprKind::div:
      os << "div\n";
      break;
    case ExprKind::pow_int:
      os << "pow " << e.exponent << '\n';
      break;
    case ExprKind::neg:
      os << "neg\n";
      break;
    case ExprKind::call:
      os << builtin_name(e.fn) << '\n';
      break;
  }
  if (e.a) print_tree(*e.a, os, depth + 1);
  if (e.b) print_tree(*e.b, os, depth + 1);
}

}  // namespace

std::string Functional::to_string() const {
  std::ostringstream os;
  print_infix(*root_, os, 0);
  return os.str();
}

std::string Functional::ast_string() const {
  std::ostringstream os;
  print_tree(*root_, os, 0);
  return os.str();
}

Matrix jacobian(const std::vector<Functional>& fs, const Vector& w) {
  Matrix j(static_cast<Index>(fs.size()), w.size());
  for (std::size_t i = 0; i < fs.size(); ++i)
    j.row(static_cast<Index>(i)) = fs[i].eval_grad(w).second.transpose();
  return j;
}

}  // namespace errcalc
