#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <errcalc/polynomial.hpp>
#include <errcalc/stats.hpp>
#include <errcalc/types.hpp>

namespace errcalc {

// Probabilists' Hermite polynomial He_n, three-term recurrence.
inline double hermite_he(int n, double x) {
  if (n == 0) return 1.0;
  double hm = 1.0, h = x;
  for (int k = 1; k < n; ++k) {
    const double hn = x * h - k * hm;
    hm = h;
    h = hn;
  }
  return h;
}

inline double factorial(int n) {
  double v = 1.0;
  for (int k = 2; k <= n; ++k) v *= k;
  return v;
}

// he_n = He_n / sqrt(n!), orthonormal under N(0,1).
inline double hermite_orthonormal(int n, double x) {
  return hermite_he(n, x) / std::sqrt(factorial(n));
}

// (x^p, he_n)_{L2(N(0,1))} from the monomial expansion
// x^p = sum_j p!/(2^j j! (p-2j)!) He_{p-2j}.
inline double monomial_hermite_coeff(int p, int n) {
  if (n > p || (p - n) % 2) return 0.0;
  const int j = (p - n) / 2;
  return factorial(p) / (std::pow(2.0, j) * factorial(j) * std::sqrt(factorial(n)));
}

// I_n(a) = int_a^inf x^n phi(x) dx; I_n = a^{n-1} phi(a) + (n-1) I_{n-2}.
inline double gaussian_upper_moment(int n, double a) {
  if (n == 0) return 1.0 - normal_cdf(a);
  if (n == 1) return normal_pdf(a);
  return std::pow(a, n - 1) * normal_pdf(a) + (n - 1) * gaussian_upper_moment(n - 2, a);
}

// int_a^b x^n phi(x) dx = I_n(a) - I_n(b); either bound may be infinite.
inline double gaussian_interval_moment(int n, double a, double b) {
  const double ia = (std::isinf(a) && a < 0) ? gaussian_monomial_mean(n)
                                             : gaussian_upper_moment(n, a);
  const double ib = (std::isinf(b) && b > 0) ? 0.0 : gaussian_upper_moment(n, b);
  return ia - ib;
}

// Unnormalized monomial expansion helper: coefficient c with
// x^p = sum_n c(p,n) He_n, c = p! / (2^j j! n!), n = p - 2j.
inline double monomial_he_coeff(int p, int n) {
  if (n > p || (p - n) % 2) return 0.0;
  const int j = (p - n) / 2;
  return factorial(p) / (std::pow(2.0, j) * factorial(j) * factorial(n));
}

// (x^p 1_{(a,b]}, he_n)_{L2(N(0,1))} via He_n's monomial form and
// incomplete Gaussian moments. Exact up to floating point.
inline double monomial_hermite_coeff_interval(int p, int n, double a, double b) {
  // He_n(x) = sum_m b_{n,m} x^m with b from the inverse expansion:
  // He_n = sum_j (-1)^j n!/(2^j j! (n-2j)!) x^{n-2j}
  double acc = 0.0;
  for (int j = 0; 2 * j <= n; ++j) {
    const int m = n - 2 * j;
    const double bnm = ((j % 2) ? -1.0 : 1.0) * factorial(n) /
                       (std::pow(2.0, j) * factorial(j) * factorial(m));
    acc += bnm * gaussian_interval_moment(p + m, a, b);
  }
  return acc / std::sqrt(factorial(n));
}

// (x^p, he_n) for n = 0..n_max via the multiplication recurrence
// x he_n = sqrt(n+1) he_{n+1} + sqrt(n) he_{n-1}; stays accurate at
// degrees where the factorial formula starts to cancel.
inline std::vector<double> monomial_hermite_coeffs_stable(int p, int n_max) {
  const int top = std::max(n_max, p) + 1;
  std::vector<double> c(static_cast<std::size_t>(top) + 1, 0.0);
  std::vector<double> next(c.size(), 0.0);
  c[0] = 1.0;
  for (int k = 0; k < p; ++k) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int n = 0; n <= k; ++n) {
      if (c[n] == 0.0) continue;
      next[n + 1] += std::sqrt(static_cast<double>(n + 1)) * c[n];
      if (n > 0) next[n - 1] += std::sqrt(static_cast<double>(n)) * c[n];
    }
    c.swap(next);
  }
  c.resize(static_cast<std::size_t>(n_max) + 1);
  return c;
}

// he_n as an explicit 1-D polynomial.
inline SparsePoly hermite_orthonormal_poly(int n) {
  SparsePoly p(1);
  const double norm = std::sqrt(factorial(n));
  for (int j = 0; 2 * j <= n; ++j) {
    const int m = n - 2 * j;
    const double bnm = ((j % 2) ? -1.0 : 1.0) * factorial(n) /
                       (std::pow(2.0, j) * factorial(j) * factorial(m));
    p.add_term(SparsePoly::Key{m}, bnm / norm);
  }
  return p;
}

}  // namespace errcalc
