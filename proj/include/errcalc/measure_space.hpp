#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <errcalc/base_fn.hpp>
#include <errcalc/rng.hpp>
#include <errcalc/types.hpp>

namespace errcalc {

// Bounded positive measure on E = R^dim, carried as total mass plus a
// sampler for the normalized measure mu / mass.
struct BaseMeasure {
  enum class Kind { uniform01, gauss_product, generic };

  Kind kind = Kind::generic;
  int dim = 0;
  double total_mass = 0.0;
  std::function<Vector(Rng&)> sampler;

  static BaseMeasure uniform01();
  static BaseMeasure gauss_product(int dim);
  static BaseMeasure generic_measure(int dim, double mass,
                                     std::function<Vector(Rng&)> s);
};

// Orthonormal system in L2(mu). Catalog members pair with a specific
// measure kind and provide closed-form inner products where the shape
// of f allows; otherwise the space falls back to quadrature.
class Basis {
 public:
  virtual ~Basis() = default;
  virtual int size() const = 0;
  virtual BaseFn fn(int n) const = 0;
  virtual std::optional<double> inner_closed(const BaseFn& f, int n) const = 0;
  virtual std::string label() const = 0;
};

// First 2^levels Haar functions on [0,1) (constant plus wavelets),
// orthonormal under the uniform measure.
class HaarBasis final : public Basis {
 public:
  explicit HaarBasis(int levels);
  int size() const override { return static_cast<int>(fns_.size()); }
  BaseFn fn(int n) const override;
  std::optional<double> inner_closed(const BaseFn& f, int n) const override;
  std::string label() const override;

 private:
  int levels_;
  std::vector<BaseFn> fns_;
};

// Products of orthonormal Hermite polynomials, graded by total degree
// then lexicographic index, orthonormal under the standard Gaussian
// product measure. dim = 1 gives the plain Hermite basis.
class HermiteProductBasis final : public Basis {
 public:
  HermiteProductBasis(int dim, int max_degree, int size_cap = 200);
  int size() const override { return static_cast<int>(idx_.size()); }
  BaseFn fn(int n) const override;
  std::optional<double> inner_closed(const BaseFn& f, int n) const override;
  std::string label() const override;
  const std::vector<std::vector<int>>& indices() const { return idx_; }

 private:
  std::optional<double> inner_polybox(const PolyBoxData& pb, int n) const;
  int dim_;
  int max_degree_;
  std::vector<std::vector<int>> idx_;
  std::vector<BaseFn> fns_;
};

// Normalized indicators of equal-mass cells of a sampled 1-D measure;
// cell edges come from empirical quantiles of the quadrature stream.
class IndicatorBasis final : public Basis {
 public:
  IndicatorBasis(std::vector<double> cuts, std::vector<double> masses);
  int size() const override { return static_cast<int>(masses_.size()); }
  BaseFn fn(int n) const override;
  std::optional<double> inner_closed(const BaseFn&, int) const override {
    return std::nullopt;
  }
  std::string label() const override;
  const std::vector<double>& cuts() const { return cuts_; }
  const std::vector<double>& cell_masses() const { return masses_; }

 private:
  std::vector<double> cuts_;    // interior edges, ascending
  std::vector<double> masses_;  // empirical mu(cell)
  std::vector<BaseFn> fns_;
};

struct InnerResult {
  double value = 0.0;
  double std_error = 0.0;  // 0 for closed-form routes
};

struct CoeffExpansion {
  Vector coeff;
  double quad_stderr = 0.0;  // l2 norm of per-coefficient standard errors
};

// Measure plus truncated orthonormal basis plus a deterministic
// quadrature stream; the home of every inner-product computation.
class BaseMeasureSpace {
 public:
  BaseMeasureSpace(BaseMeasure mu, std::shared_ptr<const Basis> basis,
                   uint64_t quad_seed = 0x9e3779b97f4a7c15ULL,
                   long quad_samples = 100000);

  const BaseMeasure& measure() const { return mu_; }
  const Basis& basis() const { return *basis_; }
  int truncation() const { return basis_->size(); }
  long quad_samples() const { return n_quad_; }

  // integral of f against mu; closed form when measure and shape allow
  std::optional<double> integrate_closed(const BaseFn& f) const;
  InnerResult integrate(const BaseFn& f) const;

  InnerResult inner(const BaseFn& f, int n) const;
  CoeffExpansion expand(const BaseFn& f) const;

  // int f^2 dmu and its quadrature error (0 when closed form)
  InnerResult norm_sq(const BaseFn& f) const;

  // Bessel defect int f^2 dmu - sum_n (f, xi_n)^2 of the truncation
  double truncation_defect(const BaseFn& f) const;

  Matrix gram(double* max_defect, bool* closed_all) const;
  // throws BasisError when the Gram matrix strays from the identity
  void verify_gram() const;

  const Matrix& quad_points() const;

 private:
  CoeffExpansion expand_quadrature(const BaseFn& f) const;

  BaseMeasure mu_;
  std::shared_ptr<const Basis> basis_;
  uint64_t quad_seed_;
  long n_quad_;
  mutable std::once_flag quad_once_;
  mutable Matrix quad_;
  mutable std::once_flag gram_once_;
  mutable std::exception_ptr gram_failure_;
};

using SpacePtr = std::shared_ptr<const BaseMeasureSpace>;

SpacePtr make_uniform_haar(int levels);
SpacePtr make_gauss_hermite(int n_basis);
SpacePtr make_gauss_hermite_product(int dim, int max_degree,
                                    int size_cap = 200);
SpacePtr make_indicator_refined(BaseMeasure mu, int cells, uint64_t quad_seed,
                                long quad_samples = 100000);

}  // namespace errcalc
