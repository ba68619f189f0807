#pragma once

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <errcalc/errors.hpp>
#include <errcalc/types.hpp>

namespace errcalc {

enum class SqrtMethod { cholesky, eigen };

// Largest |eigenvalue| proxy used for relative tolerances.
inline double spectral_scale(const Matrix& a) {
  const double s = a.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm bound
  return s > 0.0 ? s : 1.0;
}

// Throws PositivityError if the symmetric matrix has an eigenvalue below
// -tol * spectral scale.
inline void check_psd(const Matrix& a, double rel_tol = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  const double floor = -rel_tol * spectral_scale(a);
  if (es.eigenvalues().minCoeff() < floor)
    throw PositivityError("matrix is not positive semidefinite (min eigenvalue " +
                          std::to_string(es.eigenvalues().minCoeff()) + ")");
}

// Returns R with R^T R = A for symmetric PSD A. Cholesky when positive
// definite; otherwise the symmetric square root from an eigendecomposition
// with eigenvalues clamped at zero below clamp_tol.
inline Matrix psd_sqrt(const Matrix& a, SqrtMethod method = SqrtMethod::cholesky,
                       double clamp_tol = 1e-12) {
  if (a.rows() != a.cols())
    throw FactorizationError("psd_sqrt needs a square matrix");
  if (method == SqrtMethod::cholesky) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success)
      return Matrix(llt.matrixU());  // R = L^T, R^T R = L L^T = A
    // singular or indefinite: fall through to the eigen route
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success)
    throw FactorizationError("eigendecomposition failed");
  const double floor = -1e-8 * spectral_scale(a);
  Vector lam = es.eigenvalues();
  for (Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < floor)
      throw FactorizationError("matrix has eigenvalue " + std::to_string(lam[i]) +
                               " below the PSD tolerance");
    if (lam[i] < clamp_tol) lam[i] = 0.0;
  }
  // symmetric root: S = U sqrt(L) U^T, S^T S = S^2 = A
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

// Projects a nearly-symmetric matrix onto symmetric PSD by clamping
// negative eigenvalues at zero (used on estimated Gamma fields).
inline Matrix psd_clamp(const Matrix& a) {
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const Vector lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace errcalc
