#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <errcalc/errors.hpp>
#include <errcalc/expr.hpp>
#include <errcalc/polynomial.hpp>
#include <errcalc/types.hpp>

namespace errcalc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Half-open interval [lo, hi).
struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool full() const { return lo == -kInf && hi == kInf; }
  bool contains(double t) const { return t >= lo && t < hi; }
  Interval intersect(const Interval& o) const {
    return {std::max(lo, o.lo), std::min(hi, o.hi)};
  }
  bool empty() const { return lo >= hi; }
};

// Polynomial restricted to a box; the closed-form integrable shape.
// The box may live in rotated coordinates z = rot * w (rot orthogonal),
// which Gaussian base measures still integrate exactly; rot of size 0
// means the box is axis-aligned.
struct PolyBoxData {
  SparsePoly poly;
  std::vector<Interval> box;  // one entry per base-space dimension
  Matrix rot;

  bool rotated() const { return rot.size() != 0; }

  bool box_trivial() const {
    for (const auto& iv : box)
      if (!iv.full()) return false;
    return true;
  }
};

struct BaseFnNode;
using BaseFnPtr = std::shared_ptr<const BaseFnNode>;
struct WeightedBaseFn;

// Function on the base space E = R^dim. Leaves are either poly-on-box
// (exact inner products against catalog bases) or generic callables
// (Monte Carlo quadrature); formal linear combinations are kept as such
// so white-noise evaluation can distribute over them exactly.
class BaseFn {
 public:
  BaseFn() = default;  // empty; factories below build valid instances

  static BaseFn constant(int dim, double c);
  static BaseFn indicator1d(double a, double b);
  static BaseFn box(std::vector<Interval> b);
  static BaseFn poly(SparsePoly p);
  static BaseFn poly_box(SparsePoly p, std::vector<Interval> b);
  // p(w) restricted to the box in rotated coordinates q * w; q orthogonal
  static BaseFn rotated_box(SparsePoly p, std::vector<Interval> b, Matrix q);
  static BaseFn generic(int dim, std::function<double(const Vector&)> f);
  static BaseFn lincomb(std::vector<WeightedBaseFn> terms);
  // exact polynomial lowering when the expression allows it
  static BaseFn from_functional(const Functional& f, int dim);

  bool valid() const { return node_ != nullptr; }
  int dim() const;
  double eval(const Vector& e) const;
  BaseFn operator*(const BaseFn& o) const;
  BaseFn squared() const { return (*this) * (*this); }

  bool is_polybox() const;
  bool is_generic() const;
  bool is_lincomb() const;
  const PolyBoxData& polybox() const;
  const std::vector<WeightedBaseFn>& terms() const;
  const std::function<double(const Vector&)>& generic_eval() const;

  // constant value when this is an unrestricted constant polynomial
  std::optional<double> constant_value() const;
  bool is_constant_one() const {
    const auto c = constant_value();
    return c && *c == 1.0;
  }

  // node identity, used for symbolic metadata comparison
  const void* id() const { return node_.get(); }

 private:
  explicit BaseFn(BaseFnPtr node) : node_(std::move(node)) {}
  BaseFnPtr node_;
};

struct WeightedBaseFn {
  double coeff;
  BaseFn fn;
};

struct BaseFnNode {
  enum class Kind { polybox, generic, lincomb };
  Kind kind;
  int dim;
  PolyBoxData pb;
  std::function<double(const Vector&)> fn;
  std::vector<WeightedBaseFn> terms;
};

// --- associated-measure metadata -------------------------------------------

// Symbolic density against the base measure: scale times a product of
// factors, each either phi^2 for a scalar function phi or |psi|^2 for a
// field psi. Kept symbolic so the a/b/c transformation algebra can be
// checked exactly.
struct DensityFactor {
  bool is_field = false;
  BaseFn fn;                  // phi, squared at evaluation
  std::vector<BaseFn> field;  // psi components, norm-squared at evaluation
};

struct AssociatedMeasure {
  double scale = 1.0;
  std::vector<DensityFactor> factors;

  double density(const Vector& e) const {
    double v = scale;
    for (const auto& f : factors) {
      if (f.is_field) {
        double s = 0.0;
        for (const auto& c : f.field) {
          const double x = c.eval(e);
          s += x * x;
        }
        v *= s;
      } else {
        const double x = f.fn.eval(e);
        v *= x * x;
      }
    }
    return v;
  }

  AssociatedMeasure times_fn_squared(const BaseFn& phi) const {
    AssociatedMeasure m = *this;
    m.factors.push_back({false, phi, {}});
    return m;
  }

  AssociatedMeasure times_scale(double s) const {
    AssociatedMeasure m = *this;
    m.scale *= s;
    return m;
  }

  AssociatedMeasure times_field_norm(std::vector<BaseFn> psi) const {
    AssociatedMeasure m = *this;
    m.factors.push_back({true, BaseFn{}, std::move(psi)});
    return m;
  }

  // structural equality: same scale, same factor multiset by node identity
  bool same_as(const AssociatedMeasure& o) const;
};

}  // namespace errcalc
