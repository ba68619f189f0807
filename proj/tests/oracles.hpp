#pragma once

// Independent numeric oracles used only by tests: finite differences,
// composite Simpson quadrature, and Gaussian expectations by quadrature.
// Deliberately implemented without touching the library's derivative or
// integration code paths.

#include <cmath>
#include <functional>

#include <errcalc/types.hpp>

namespace oracle {

using errcalc::Index;
using errcalc::Matrix;
using errcalc::Vector;

using ScalarField = std::function<double(const Vector&)>;

inline double fd_partial(const ScalarField& f, Vector w, Index i,
                         double h = 1e-6) {
  const double step = h * (1.0 + std::abs(w[i]));
  w[i] += step;
  const double up = f(w);
  w[i] -= 2.0 * step;
  const double dn = f(w);
  return (up - dn) / (2.0 * step);
}

inline Vector fd_grad(const ScalarField& f, const Vector& w, double h = 1e-6) {
  Vector g(w.size());
  for (Index i = 0; i < w.size(); ++i) g[i] = fd_partial(f, w, i, h);
  return g;
}

inline Matrix fd_hess(const ScalarField& f, const Vector& w, double h = 1e-4) {
  const Index d = w.size();
  Matrix m(d, d);
  for (Index i = 0; i < d; ++i) {
    const double hi = h * (1.0 + std::abs(w[i]));
    for (Index j = 0; j < d; ++j) {
      const double hj = h * (1.0 + std::abs(w[j]));
      Vector p = w;
      p[i] += hi;
      p[j] += hj;
      double acc = f(p);
      p[j] -= 2.0 * hj;
      acc -= f(p);
      p[i] -= 2.0 * hi;
      acc += f(p);
      p[j] += 2.0 * hj;
      acc -= f(p);
      m(i, j) = acc / (4.0 * hi * hj);
    }
  }
  return 0.5 * (m + m.transpose());
}

inline double simpson(const std::function<double(double)>& f, double a,
                      double b, int panels = 2000) {
  const double h = (b - a) / (2 * panels);
  double acc = f(a) + f(b);
  for (int k = 1; k < 2 * panels; ++k)
    acc += f(a + k * h) * ((k % 2) ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// E[f(Z)] for Z ~ N(0,1), quadrature over [-10, 10]
inline double gauss_expect(const std::function<double(double)>& f,
                           int panels = 4000) {
  const auto weighted = [&f](double x) {
    return f(x) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  };
  return simpson(weighted, -10.0, 10.0, panels);
}

}  // namespace oracle
