#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include <errcalc/errors.hpp>
#include <errcalc/types.hpp>

namespace errcalc {

// Sparse multivariate polynomial, exponent vector -> coefficient.
// Sized for desk scale (dim <= ~16, degree <= ~12); used as the exact
// ("closed form") route for inner products against Gaussian measures.
class SparsePoly {
 public:
  using Key = std::vector<int>;

  explicit SparsePoly(int dim = 0) : dim_(dim) {}

  static SparsePoly constant(int dim, double c) {
    SparsePoly p(dim);
    if (c != 0.0) p.terms_[Key(dim, 0)] = c;
    return p;
  }

  static SparsePoly coordinate(int dim, int i) {
    SparsePoly p(dim);
    Key k(dim, 0);
    k[i] = 1;
    p.terms_[k] = 1.0;
    return p;
  }

  int dim() const { return dim_; }
  bool empty() const { return terms_.empty(); }
  const std::map<Key, double>& terms() const { return terms_; }

  int total_degree() const {
    int d = 0;
    for (const auto& [k, c] : terms_) {
      int t = 0;
      for (int e : k) t += e;
      d = std::max(d, t);
    }
    return d;
  }

  void add_term(const Key& k, double c) {
    if (c == 0.0) return;
    auto it = terms_.find(k);
    if (it == terms_.end()) {
      terms_[k] = c;
    } else {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  SparsePoly operator+(const SparsePoly& o) const {
    SparsePoly r = *this;
    for (const auto& [k, c] : o.terms_) r.add_term(k, c);
    return r;
  }

  SparsePoly operator-(const SparsePoly& o) const {
    SparsePoly r = *this;
    for (const auto& [k, c] : o.terms_) r.add_term(k, -c);
    return r;
  }

  SparsePoly operator*(const SparsePoly& o) const {
    SparsePoly r(dim_);
    for (const auto& [ka, ca] : terms_)
      for (const auto& [kb, cb] : o.terms_) {
        Key k(dim_);
        for (int i = 0; i < dim_; ++i) k[i] = ka[i] + kb[i];
        r.add_term(k, ca * cb);
      }
    return r;
  }

  SparsePoly scaled(double s) const {
    SparsePoly r(dim_);
    for (const auto& [k, c] : terms_) r.add_term(k, s * c);
    return r;
  }

  SparsePoly pow(int e) const {
    if (e < 0) throw DomainError("negative power in polynomial lowering");
    SparsePoly r = constant(dim_, 1.0);
    for (int i = 0; i < e; ++i) r = r * (*this);
    return r;
  }

  double eval(const Vector& w) const {
    double v = 0.0;
    for (const auto& [k, c] : terms_) {
      double t = c;
      for (int i = 0; i < dim_; ++i)
        for (int e = 0; e < k[i]; ++e) t *= w[i];
      v += t;
    }
    return v;
  }

 private:
  int dim_;
  std::map<Key, double> terms_;
};

// p(m z) as a polynomial in z, for a linear substitution w = m z.
inline SparsePoly linear_image(const SparsePoly& p, const Matrix& m) {
  const int dw = p.dim();
  const int dz = static_cast<int>(m.cols());
  if (static_cast<int>(m.rows()) != dw)
    throw DimensionError("linear_image: substitution rank mismatch");
  // cached powers of the row forms sum_a m(i,a) z_a
  std::vector<std::vector<SparsePoly>> pows(static_cast<std::size_t>(dw));
  const auto power = [&](int i, int e) -> const SparsePoly& {
    auto& v = pows[static_cast<std::size_t>(i)];
    if (v.empty()) {
      v.push_back(SparsePoly::constant(dz, 1.0));
      SparsePoly form(dz);
      for (int a = 0; a < dz; ++a) {
        if (m(i, a) == 0.0) continue;
        SparsePoly::Key k(static_cast<std::size_t>(dz), 0);
        k[static_cast<std::size_t>(a)] = 1;
        form.add_term(k, m(i, a));
      }
      v.push_back(std::move(form));
    }
    while (static_cast<int>(v.size()) <= e) v.push_back(v.back() * v[1]);
    return v[static_cast<std::size_t>(e)];
  };
  SparsePoly out(dz);
  for (const auto& [k, c] : p.terms()) {
    SparsePoly t = SparsePoly::constant(dz, c);
    for (int i = 0; i < dw; ++i)
      if (k[static_cast<std::size_t>(i)] > 0)
        t = t * power(i, k[static_cast<std::size_t>(i)]);
    out = out + t;
  }
  return out;
}

// p(q_1(w), ..., q_d(w)) for polynomial substitutions q_j sharing a
// common ambient dimension.
inline SparsePoly poly_compose(const SparsePoly& p,
                               const std::vector<SparsePoly>& qs) {
  if (static_cast<int>(qs.size()) != p.dim())
    throw DimensionError("poly_compose: substitution rank mismatch");
  const int dw = qs.empty() ? 0 : qs.front().dim();
  for (const auto& q : qs)
    if (q.dim() != dw)
      throw DimensionError("poly_compose: mixed substitution dimensions");
  std::vector<std::vector<SparsePoly>> pows(qs.size());
  const auto power = [&](int j, int e) -> const SparsePoly& {
    auto& v = pows[static_cast<std::size_t>(j)];
    if (v.empty()) {
      v.push_back(SparsePoly::constant(dw, 1.0));
      v.push_back(qs[static_cast<std::size_t>(j)]);
    }
    while (static_cast<int>(v.size()) <= e) v.push_back(v.back() * v[1]);
    return v[static_cast<std::size_t>(e)];
  };
  SparsePoly out(dw);
  for (const auto& [k, c] : p.terms()) {
    SparsePoly t = SparsePoly::constant(dw, c);
    for (std::size_t j = 0; j < k.size(); ++j)
      if (k[j] > 0) t = t * power(static_cast<int>(j), k[j]);
    out = out + t;
  }
  return out;
}

// E[x^p] under N(0,1): 0 for odd p, (p-1)!! for even p.
inline double gaussian_monomial_mean(int p) {
  if (p % 2) return 0.0;
  double v = 1.0;
  for (int k = p - 1; k >= 1; k -= 2) v *= k;
  return v;
}

// E[poly] under the standard Gaussian product measure.
inline double gaussian_mean(const SparsePoly& p) {
  double v = 0.0;
  for (const auto& [k, c] : p.terms()) {
    double t = c;
    for (int e : k) t *= gaussian_monomial_mean(e);
    v += t;
  }
  return v;
}

}  // namespace errcalc
