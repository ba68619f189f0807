#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <errcalc/expr.hpp>
#include <errcalc/mc.hpp>
#include <errcalc/psd.hpp>
#include <errcalc/rng.hpp>
#include <errcalc/types.hpp>

namespace errcalc {

// An error structure on a finite-dimensional coordinate space: sampling
// measure m on R^dim plus the Gamma matrix field over coordinates. The
// functional domain is whatever the expression language can write with
// finite Gamma.
struct ErrorStructure {
  int dim = 1;
  std::string label;
  std::function<Vector(Rng&)> sampler;  // one draw distributed as m
  Matrix gamma_const;                   // used when gamma_fn is empty
  std::function<Matrix(const Vector&)> gamma_fn;  // optional position dependence

  bool constant_gamma() const { return !gamma_fn; }

  Matrix gamma_field(const Vector& w) const {
    return gamma_fn ? gamma_fn(w) : gamma_const;
  }

  Vector sample(Rng& rng) const { return sampler(rng); }
};

// m = N(0,1)^dim with identity Gamma (the finite-dimensional
// Ornstein-Uhlenbeck structure).
ErrorStructure gaussian_product(int dim);

// m = N(0,1)^dim with a constant PSD Gamma matrix.
ErrorStructure gaussian_aniso(int dim, const Matrix& gamma);

// Gamma[U,V](w) = grad U^T gamma_field(w) grad V, symmetrized so the
// (U,V) and (V,U) evaluations are bit-identical.
double gamma_bilinear(const ErrorStructure& s, const Functional& u,
                      const Functional& v, const Vector& w);

// Matrix with entries Gamma[X_i, X_j](w).
Matrix gamma_matrix(const ErrorStructure& s, const std::vector<Functional>& x,
                    const Vector& w);

// Gamma[u,v] as an expression, via symbolic derivatives. Only available
// when gamma is a constant matrix; ValidationError otherwise.
Functional gamma_functional(const ErrorStructure& s, const Functional& u,
                            const Functional& v);

// E[u,v] = 1/2 int Gamma[u,v] dm by Monte Carlo over n draws.
MonteCarloEstimate dirichlet_form(const ErrorStructure& s, const Functional& u,
                                  const Functional& v, long n, std::uint64_t seed,
                                  int workers = 1);

// A[f o X](w) = sum_i A[X_i] df/dx_i(X) + 1/2 sum_ij Gamma[X_i,X_j]
// d2f/dx_i dx_j(X), given the generator values A[X_i](w) and the Gamma
// matrix at w. Second derivatives by forward-on-forward propagation.
double generator_compose(const Vector& ax, const Matrix& gamma,
                         const Functional& f, const Vector& x);

}  // namespace errcalc
