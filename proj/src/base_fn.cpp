#include <errcalc/base_fn.hpp>

#include <algorithm>
#include <tuple>

namespace errcalc {

namespace {

BaseFnPtr make_node(BaseFnNode n) {
  return std::make_shared<const BaseFnNode>(std::move(n));
}

std::vector<Interval> full_box(int dim) {
  return std::vector<Interval>(static_cast<std::size_t>(dim), Interval{});
}

}  // namespace

BaseFn BaseFn::constant(int dim, double c) {
  return poly_box(SparsePoly::constant(dim, c), full_box(dim));
}

BaseFn BaseFn::indicator1d(double a, double b) {
  return poly_box(SparsePoly::constant(1, 1.0), {Interval{a, b}});
}

BaseFn BaseFn::box(std::vector<Interval> b) {
  const int dim = static_cast<int>(b.size());
  return poly_box(SparsePoly::constant(dim, 1.0), std::move(b));
}

BaseFn BaseFn::poly(SparsePoly p) {
  const int dim = p.dim();
  return poly_box(std::move(p), full_box(dim));
}

BaseFn BaseFn::poly_box(SparsePoly p, std::vector<Interval> b) {
  if (static_cast<int>(b.size()) != p.dim())
    throw DimensionError("poly_box: box rank does not match polynomial arity");
  for (const auto& iv : b)
    if (iv.empty()) {
      // empty support collapses to the zero function
      p = SparsePoly::constant(p.dim(), 0.0);
      b = full_box(p.dim());
      break;
    }
  BaseFnNode n;
  n.kind = BaseFnNode::Kind::polybox;
  n.dim = p.dim();
  n.pb = PolyBoxData{std::move(p), std::move(b), Matrix{}};
  return BaseFn{make_node(std::move(n))};
}

BaseFn BaseFn::rotated_box(SparsePoly p, std::vector<Interval> b, Matrix q) {
  const int dim = p.dim();
  if (static_cast<int>(b.size()) != dim)
    throw DimensionError("rotated_box: box rank does not match polynomial arity");
  if (q.rows() != dim || q.cols() != dim)
    throw DimensionError("rotated_box: rotation must be dim x dim");
  if ((q.transpose() * q - Matrix::Identity(dim, dim)).cwiseAbs().maxCoeff() >
      1e-12)
    throw ValidationError("rotated_box: rotation is not orthogonal");
  bool trivial = true;
  for (const auto& iv : b) {
    if (iv.empty()) return poly_box(SparsePoly::constant(dim, 0.0), full_box(dim));
    if (!iv.full()) trivial = false;
  }
  if (trivial || (q - Matrix::Identity(dim, dim)).cwiseAbs().maxCoeff() == 0.0)
    return poly_box(std::move(p), std::move(b));
  BaseFnNode n;
  n.kind = BaseFnNode::Kind::polybox;
  n.dim = dim;
  n.pb = PolyBoxData{std::move(p), std::move(b), std::move(q)};
  return BaseFn{make_node(std::move(n))};
}

BaseFn BaseFn::generic(int dim, std::function<double(const Vector&)> f) {
  if (dim < 1) throw DimensionError("generic: dimension must be positive");
  if (!f) throw ValidationError("generic: empty callable");
  BaseFnNode n;
  n.kind = BaseFnNode::Kind::generic;
  n.dim = dim;
  n.fn = std::move(f);
  return BaseFn{make_node(std::move(n))};
}

BaseFn BaseFn::lincomb(std::vector<WeightedBaseFn> terms) {
  if (terms.empty()) throw ValidationError("lincomb: no terms");
  const int dim = terms.front().fn.dim();
  for (const auto& t : terms) {
    if (!t.fn.valid()) throw ValidationError("lincomb: invalid term");
    if (t.fn.dim() != dim)
      throw DimensionError("lincomb: mixed dimensions");
  }
  if (terms.size() == 1 && terms.front().coeff == 1.0) return terms.front().fn;
  BaseFnNode n;
  n.kind = BaseFnNode::Kind::lincomb;
  n.dim = dim;
  n.terms = std::move(terms);
  return BaseFn{make_node(std::move(n))};
}

BaseFn BaseFn::from_functional(const Functional& f, int dim) {
  if (auto p = f.polynomial(dim)) return poly(std::move(*p));
  return generic(dim, [f](const Vector& e) { return f.eval(e); });
}

int BaseFn::dim() const {
  if (!node_) throw ValidationError("BaseFn: empty handle");
  return node_->dim;
}

double BaseFn::eval(const Vector& e) const {
  if (!node_) throw ValidationError("BaseFn: empty handle");
  if (e.size() != node_->dim)
    throw DimensionError("BaseFn::eval: point rank mismatch");
  switch (node_->kind) {
    case BaseFnNode::Kind::polybox: {
      const auto& pb = node_->pb;
      for (std::size_t i = 0; i < pb.box.size(); ++i) {
        const Index ix = static_cast<Index>(i);
        const double t = pb.rotated() ? pb.rot.row(ix).dot(e) : e[ix];
        if (!pb.box[i].contains(t)) return 0.0;
      }
      return pb.poly.eval(e);
    }
    case BaseFnNode::Kind::generic:
      return node_->fn(e);
    case BaseFnNode::Kind::lincomb: {
      double v = 0.0;
      for (const auto& t : node_->terms) v += t.coeff * t.fn.eval(e);
      return v;
    }
  }
  throw Error("BaseFn::eval: unreachable");
}

BaseFn BaseFn::operator*(const BaseFn& o) const {
  if (!node_ || !o.node_) throw ValidationError("BaseFn: empty handle");
  if (node_->dim != o.node_->dim)
    throw DimensionError("BaseFn product: mixed dimensions");
  // multiplying by the constant one returns the other factor unchanged,
  // so weight-1 paths stay bit-identical to unweighted ones
  if (is_constant_one()) return o;
  if (o.is_constant_one()) return *this;
  if (is_lincomb()) {
    std::vector<WeightedBaseFn> out;
    out.reserve(terms().size());
    for (const auto& t : terms()) out.push_back({t.coeff, t.fn * o});
    return lincomb(std::move(out));
  }
  if (o.is_lincomb()) {
    std::vector<WeightedBaseFn> out;
    out.reserve(o.terms().size());
    for (const auto& t : o.terms()) out.push_back({t.coeff, (*this) * t.fn});
    return lincomb(std::move(out));
  }
  if (is_polybox() && o.is_polybox()) {
    const auto& a = polybox();
    const auto& b = o.polybox();
    if (!a.rotated() && !b.rotated()) {
      std::vector<Interval> bx(a.box.size());
      for (std::size_t i = 0; i < bx.size(); ++i)
        bx[i] = a.box[i].intersect(b.box[i]);
      return poly_box(a.poly * b.poly, std::move(bx));
    }
    if (a.rotated() && b.box_trivial())
      return rotated_box(a.poly * b.poly, a.box, a.rot);
    if (b.rotated() && a.box_trivial())
      return rotated_box(a.poly * b.poly, b.box, b.rot);
    if (a.rotated() && b.rotated() &&
        (a.rot - b.rot).cwiseAbs().maxCoeff() == 0.0) {
      std::vector<Interval> bx(a.box.size());
      for (std::size_t i = 0; i < bx.size(); ++i)
        bx[i] = a.box[i].intersect(b.box[i]);
      return rotated_box(a.poly * b.poly, std::move(bx), a.rot);
    }
    // incompatible restrictions: fall through to pointwise evaluation
  }
  const BaseFn lhs = *this;
  const BaseFn rhs = o;
  return generic(node_->dim,
                 [lhs, rhs](const Vector& e) { return lhs.eval(e) * rhs.eval(e); });
}

bool BaseFn::is_polybox() const {
  return node_ && node_->kind == BaseFnNode::Kind::polybox;
}

bool BaseFn::is_generic() const {
  return node_ && node_->kind == BaseFnNode::Kind::generic;
}

bool BaseFn::is_lincomb() const {
  return node_ && node_->kind == BaseFnNode::Kind::lincomb;
}

const PolyBoxData& BaseFn::polybox() const {
  if (!is_polybox()) throw ValidationError("BaseFn: not a poly-box node");
  return node_->pb;
}

const std::vector<WeightedBaseFn>& BaseFn::terms() const {
  if (!is_lincomb()) throw ValidationError("BaseFn: not a linear combination");
  return node_->terms;
}

const std::function<double(const Vector&)>& BaseFn::generic_eval() const {
  if (!is_generic()) throw ValidationError("BaseFn: not a generic node");
  return node_->fn;
}

std::optional<double> BaseFn::constant_value() const {
  if (!is_polybox()) return std::nullopt;
  const auto& pb = polybox();
  if (!pb.box_trivial()) return std::nullopt;
  if (pb.poly.total_degree() > 0) return std::nullopt;
  return pb.poly.eval(Vector::Zero(pb.poly.dim()));
}

bool AssociatedMeasure::same_as(const AssociatedMeasure& o) const {
  if (scale != o.scale) return false;
  if (factors.size() != o.factors.size()) return false;
  using Key = std::tuple<bool, const void*, std::vector<const void*>>;
  const auto keys = [](const std::vector<DensityFactor>& fs) {
    std::vector<Key> ks;
    ks.reserve(fs.size());
    for (const auto& f : fs) {
      std::vector<const void*> ids;
      ids.reserve(f.field.size());
      for (const auto& c : f.field) ids.push_back(c.id());
      ks.emplace_back(f.is_field, f.is_field ? nullptr : f.fn.id(),
                      std::move(ids));
    }
    std::sort(ks.begin(), ks.end());
    return ks;
  };
  return keys(factors) == keys(o.factors);
}

}  // namespace errcalc
