#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <errcalc/structure.hpp>
#include <errcalc/white_noise.hpp>

namespace errcalc {

// Brownian paths truncated to n_inc i.i.d. standard normal increments on
// a uniform grid of [0,1]: int f dw = sum_i avg_i(f) x_i / sqrt(n_inc),
// so Var[int f dw] equals the L2 norm of the cell-average step function,
// exactly for grid-aligned f.
struct TruncatedWienerSpace {
  int n_inc = 1;
  ErrorStructure structure;  // N(0,1)^n_inc with identity gamma

  Vector grid() const;  // right endpoints i / n_inc
  // increment coefficients of int f dw for a step function with the
  // given cell values
  Vector step_coeffs(const Vector& cell_values) const;
  Functional integral_step(const Vector& cell_values) const;
  // cell averages by fixed-order Gauss-Legendre, exact for polynomials
  Vector cell_average(const std::function<double(double)>& f) const;
  Functional integral(const std::function<double(double)>& f) const;
};

TruncatedWienerSpace wiener_space(int n_inc);

// The Ornstein-Uhlenbeck structure carried by the increments:
// Gamma[int f dw] = |f_step|^2 with the identity gamma matrix.
ErrorStructure ou_structure(int n_inc);

// |f_step|^2 in L2[0,1] for cell values on the uniform grid
double step_norm_sq(const Vector& cell_values);

// Orthonormal basis of the truncated chaos: normalized Hermite products
// in the increments, graded by total degree starting from the constant.
struct ChaosBasis {
  SpacePtr space;
  int n_inc = 0;
  int degree = 0;
  std::vector<int> degrees;  // chaos degree of each element

  int size() const { return space ? space->truncation() : 0; }
  BaseFn fn(int n) const { return space->basis().fn(n); }
};

ChaosBasis chaos_basis(int n_inc, int degree, int size_cap = 200);

// Gradient on the copy space: X = F(I_1, ..., I_p) with I_j = int f_j dw
// maps to X^#(w, what) = sum_j dF/du_j(I(w)) . int f_j dwhat. The copy
// integrals are linear, so the whole object is determined on the first
// chaos.
struct SharpGradient {
  Functional F;                // outer function of the base integrals
  std::vector<Vector> coeffs;  // increment coefficients of each I_j
  int n_inc = 0;

  int arity() const { return static_cast<int>(coeffs.size()); }
  Vector bases(const Vector& w) const;  // (I_1(w), ..., I_p(w))
  Functional composite() const;         // X as a functional of the increments
  double eval(const Vector& w, const Vector& what) const;
  // E_mhat[(X^#)^2](w) in closed form over the Gaussian copy
  double second_moment(const Vector& w) const;
  // Gamma[X] as a functional of the increments
  Functional gamma() const;
};

SharpGradient sharp(const TruncatedWienerSpace& ws, Functional f,
                    std::vector<Vector> cell_values);

// Monte Carlo second moment of X^#(w, .) over fresh copy draws
MonteCarloEstimate sharp_second_moment_mc(const SharpGradient& sg,
                                          const Vector& w, long n,
                                          std::uint64_t seed);

// The chaos-constructed noise int Y dnu = sum_{k,n} E_m[Y Z_n] Zhat_k g_nk:
// row k of the coefficient matrix carries the Zhat_k component of the
// copy space, truncated to the first k_copy elements.
HValuedWhiteNoise wiener_hvalued_wn(const ChaosBasis& z, int k_copy,
                                    std::uint64_t seed);

// Copy-basis coefficient fields psi_k(w) = E_mhat[X^# Zhat_k](w); only
// first-chaos copy elements contribute.
std::vector<Functional> sharp_copy_fields(const SharpGradient& sg,
                                          const BaseMeasureSpace& copy_space,
                                          int k_copy);

// d_G X by the chaos construction: the scalar noise whose evaluation on Y
// is sum_{k,n} E_m[Y Z_n psi_k] g_nk.
ScalarWhiteNoise wiener_gradient_noise(const SharpGradient& sg,
                                       const HValuedWhiteNoise& nu);

// Closing variance identity at a fixed truncation: the Parseval sum of
// the pairing coefficients and the realized variance, both against
// E_m[Y^2 Gamma[X]].
struct WienerVarianceReport {
  double target = 0.0;  // E_m[Y^2 Gamma[X]]
  double target_stderr = 0.0;
  double parseval = 0.0;  // sum of squared pairing coefficients
  double defect = 0.0;    // target - parseval, the truncation loss
  double empirical = 0.0;
  double emp_stderr = 0.0;
  std::vector<double> parseval_by_degree;  // cumulative over chaos degree
  long m_realizations = 0;
};

WienerVarianceReport wiener_variance_check(const SharpGradient& sg,
                                           const ChaosBasis& z, const BaseFn& y,
                                           const HValuedWhiteNoise& nu,
                                           long m_realizations,
                                           std::uint64_t seed,
                                           double defect_budget = kInf);

}  // namespace errcalc
