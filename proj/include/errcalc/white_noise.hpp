#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <errcalc/base_fn.hpp>
#include <errcalc/mc.hpp>
#include <errcalc/measure_space.hpp>
#include <errcalc/types.hpp>

namespace errcalc {

// Truncated Gaussian white noise against a base measure space. The
// realization is the coefficient matrix g (one row of i.i.d. standard
// normals per underlying noise); evaluations pair basis coefficients of
// the test function with g. Transformed noises keep the source g, so a
// transform acts on the same realization.
struct ScalarWhiteNoise {
  SpacePtr space;
  Matrix g;                   // rows x N coefficients
  Vector mix;                 // constant mixing weights, one per row
  std::vector<BaseFn> field;  // per-row weight functions; empty or invalid = 1
  AssociatedMeasure assoc;    // symbolic density against mu
  uint64_t seed = 0;

  int rows() const { return static_cast<int>(g.rows()); }
};

struct HValuedWhiteNoise {
  SpacePtr space;
  int K = 0;       // truncated auxiliary Hilbert dimension
  Matrix g;        // K x N, row k drives component k
  BaseFn weight;   // scalar multiplier applied to integrands; invalid = 1
  AssociatedMeasure assoc;
  uint64_t seed = 0;
};

// p-variate noise with a pointwise PSD density rho against mu;
// components mix p independent underlying noises through a pointwise
// square root M with M^T M = rho.
struct VectorWhiteNoise {
  SpacePtr space;
  int p = 0;
  std::function<Matrix(const Vector&)> density;
  bool constant_density = false;
  Matrix mixer;  // the root M when the density is constant
  Matrix g;      // p x N underlying coefficients
  uint64_t seed = 0;
};

// row k drawn from the stream derived as (seed, k)
Matrix draw_wn_coeffs(int rows, int n, uint64_t seed);

ScalarWhiteNoise sample_scalar_wn(SpacePtr space, uint64_t seed);
HValuedWhiteNoise sample_hvalued_wn(SpacePtr space, int K, uint64_t seed);
VectorWhiteNoise sample_vector_wn(SpacePtr space,
                                  std::function<Matrix(const Vector&)> density,
                                  int p, uint64_t seed);
VectorWhiteNoise sample_vector_wn(SpacePtr space, const Matrix& rho,
                                  uint64_t seed);

double wn_eval(const ScalarWhiteNoise& nu, const BaseFn& f);
Vector wn_eval_h(const HValuedWhiteNoise& nu, const BaseFn& f);

ScalarWhiteNoise transform_multiply(const ScalarWhiteNoise& nu,
                                    const BaseFn& phi);
HValuedWhiteNoise transform_multiply_h(const HValuedWhiteNoise& nu,
                                       const BaseFn& phi);
ScalarWhiteNoise transform_pair_vector(const HValuedWhiteNoise& nu,
                                       const Vector& x);
ScalarWhiteNoise transform_pair_field(const HValuedWhiteNoise& nu,
                                      std::vector<BaseFn> psi);

ScalarWhiteNoise vector_component(const VectorWhiteNoise& nu, int i);
ScalarWhiteNoise vector_pair(const VectorWhiteNoise& nu, const Vector& x);

// Coefficient form of a pairing nu(f) for repeated evaluation across
// realizations: value applies a coefficient matrix to fresh draws,
// variance is the truncated second moment over realizations. defect is
// the part of the untruncated variance the basis cannot see.
struct PreparedPairing {
  Matrix coeff;  // rows x N, mixing weights folded in
  double quad_stderr = 0.0;
  double defect = 0.0;

  double value(const Matrix& g) const {
    return (coeff.array() * g.array()).sum();
  }
  double variance() const { return coeff.squaredNorm(); }
};

PreparedPairing prepare_pairing(const ScalarWhiteNoise& nu, const BaseFn& f);

// Moments of pp.value over m independent realizations; realization r
// draws its coefficients from the stream derived as (seed, r), so the
// result does not depend on the worker count.
MomentAccumulator realization_moments(const PreparedPairing& pp, long m,
                                      uint64_t seed, int workers = 1);

}  // namespace errcalc
