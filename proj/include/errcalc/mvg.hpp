#pragma once

#include <cstdint>
#include <vector>

#include <errcalc/psd.hpp>
#include <errcalc/structure.hpp>
#include <errcalc/white_noise.hpp>

namespace errcalc {

// Gradient into a K-dimensional auxiliary space, built pointwise as a
// square root of the Gamma matrix: D[U](w) = M(w) grad U(w) with
// M(w)^T M(w) = gamma_field(w), so |D[U]|^2 = Gamma[U]. K >= dim; any
// extra rows of M are zero, they only enlarge the auxiliary space.
struct DGradientOp {
  ErrorStructure structure;
  int K = 0;
  SqrtMethod method = SqrtMethod::cholesky;
  Matrix root_const;  // cached K x dim root when gamma is constant

  Matrix root(const Vector& w) const;
  // D[u](w) as a K-vector
  Vector apply(const Functional& u, const Vector& w) const;
};

// K = 0 means K = dim. FactorizationError when gamma fails the PSD
// tolerance (eigenvalue below -1e-8 relative).
DGradientOp build_dgradient(const ErrorStructure& s,
                            SqrtMethod method = SqrtMethod::cholesky,
                            int K = 0);

// D[F(u1..ud)](w) = sum_i dF/du_i(u(w)) D[u_i](w), the chain rule
// defining D on composites.
Vector dgrad_apply(const DGradientOp& d, const Functional& f,
                   const std::vector<Functional>& u, const Vector& w);

// Component functions (D[x])_k on the base space. Symbolic (exact
// coefficients downstream) when gamma is constant, generic otherwise.
std::vector<BaseFn> dgrad_field(const DGradientOp& d, const Functional& x);

// The measure-valued gradient of X: the scalar white noise
// f -> sum_k nu_k(f * (D[X])_k), realized by pairing the H-valued noise
// with the gradient field. Vector X holds one pairing per component,
// all driven by the same realization of nu.
struct MeasureValuedGradient {
  std::vector<Functional> X;
  DGradientOp D;
  HValuedWhiteNoise nu;
  std::vector<ScalarWhiteNoise> pairings;

  const ScalarWhiteNoise& pairing(int i = 0) const;
};

MeasureValuedGradient mv_gradient(const Functional& x, const DGradientOp& d,
                                  const HValuedWhiteNoise& nu);
MeasureValuedGradient mv_gradient(std::vector<Functional> x,
                                  const DGradientOp& d,
                                  const HValuedWhiteNoise& nu);

// One realization of the Gaussian variable int f d_G X_comp.
double mvg_eval(const MeasureValuedGradient& dgx, const BaseFn& f,
                int comp = 0);

// Density of the associated positive measure against m: Gamma[X_i, X_j]
// as an expression (constant-gamma structures only).
Functional mvg_density(const MeasureValuedGradient& dgx, int i = 0, int j = -1);
std::vector<std::vector<Functional>> mvg_density_matrix(
    const MeasureValuedGradient& dgx);

// Deterministic corpus of closed-form test functions: constants,
// half-space and box indicators, low-degree polynomials.
std::vector<BaseFn> test_function_corpus(int dim, int n, uint64_t seed);

struct ChainRuleReport {
  int n_functions = 0;
  double max_discrepancy = 0.0;
};

// Compares realizations of int f d_G(F(X)) against the multiplier route
// sum_i int f dF/dx_i(X) d_G X_i on a random test-function corpus. The
// identity is exact at coefficient level, so discrepancies are rounding.
ChainRuleReport chain_rule_check(const MeasureValuedGradient& dgx,
                                 const Functional& F, int n_test_functions,
                                 uint64_t seed);

// Hermite chaos space matching a structure whose sampling measure is the
// standard Gaussian product (the catalog structures all are).
SpacePtr chaos_space(const ErrorStructure& s, int max_degree,
                     int size_cap = 200);

}  // namespace errcalc
