#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <errcalc/errors.hpp>
#include <errcalc/polynomial.hpp>
#include <errcalc/types.hpp>

namespace errcalc {

enum class ExprKind { constant, coordinate, add, sub, mul, div, pow_int, neg, call };

enum class Builtin { exp_fn, log_fn, sin_fn, cos_fn, tanh_fn, sqrt_fn };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Immutable expression node over coordinates x1..xN.
struct Expr {
  ExprKind kind;
  double value = 0.0;               // constant
  int coord = -1;                   // coordinate, 0-based
  int exponent = 0;                 // pow_int
  Builtin fn = Builtin::exp_fn;     // call
  ExprPtr a, b;
};

// Smart constructors; fold constants and drop units so symbolic
// derivatives stay readable. No further simplification.
ExprPtr make_const(double c);
ExprPtr make_coord(int i);
ExprPtr make_add(ExprPtr a, ExprPtr b);
ExprPtr make_sub(ExprPtr a, ExprPtr b);
ExprPtr make_mul(ExprPtr a, ExprPtr b);
ExprPtr make_div(ExprPtr a, ExprPtr b);
ExprPtr make_pow(ExprPtr a, int exponent);
ExprPtr make_neg(ExprPtr a);
ExprPtr make_call(Builtin fn, ExprPtr a);

// A member of the functional domain: an expression evaluable to
// (value, coordinate gradient) at a sample point. Gradients and Hessians
// come from forward derivative propagation, not finite differences.
class Functional {
 public:
  Functional() : root_(make_const(0.0)) {}
  explicit Functional(ExprPtr root) : root_(std::move(root)) {}

  // Throws ParseError with line/column on malformed input.
  static Functional parse(std::string_view text);
  static Functional constant(double c) { return Functional(make_const(c)); }
  static Functional coordinate(int i) { return Functional(make_coord(i)); }

  double eval(const Vector& w) const;
  // grad has length w.size()
  std::pair<double, Vector> eval_grad(const Vector& w) const;
  void eval_hessian(const Vector& w, double& value, Vector& grad, Matrix& hess) const;

  Functional derivative(int coord) const;
  // coordinate i replaced by coords[i]
  Functional substitute(const std::vector<Functional>& coords) const;
  // exact lowering to a sparse polynomial in dim variables, when the
  // expression is polynomial; nullopt otherwise
  std::optional<SparsePoly> polynomial(int dim) const;

  // highest referenced coordinate index + 1 (0 for constants)
  int min_dim() const;

  std::string to_string() const;
  std::string ast_string() const;

  const ExprPtr& root() const { return root_; }

  friend Functional operator+(const Functional& a, const Functional& b) {
    return Functional(make_add(a.root_, b.root_));
  }
  friend Functional operator-(const Functional& a, const Functional& b) {
    return Functional(make_sub(a.root_, b.root_));
  }
  friend Functional operator*(const Functional& a, const Functional& b) {
    return Functional(make_mul(a.root_, b.root_));
  }
  friend Functional operator/(const Functional& a, const Functional& b) {
    return Functional(make_div(a.root_, b.root_));
  }
  friend Functional operator-(const Functional& a) {
    return Functional(make_neg(a.root_));
  }
  Functional pow(int e) const { return Functional(make_pow(root_, e)); }

 private:
  ExprPtr root_;
};

inline Functional apply(Builtin fn, const Functional& a) {
  return Functional(make_call(fn, a.root()));
}

// Gradient of a vector-valued map as a d x dim Jacobian at w.
Matrix jacobian(const std::vector<Functional>& fs, const Vector& w);

}  // namespace errcalc
