#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "check_catalog.hpp"

namespace errcalc::detail {

// Statistical verdict: the truncation defect is discounted before the
// deviation is standardized.
inline void stat_verdict(CheckReport& r, double z_thr) {
  const double excess =
      std::max(0.0, std::abs(r.estimate - r.target) - r.defect);
  if (r.std_error > 0.0)
    r.z = excess / r.std_error;
  else
    r.z = excess <= 1e-12 ? 0.0 : 1e9;
  r.pass = r.z <= z_thr;
}

inline void exact_verdict(CheckReport& r, double atol) {
  r.z = 0.0;
  r.pass = std::abs(r.estimate - r.target) <= atol;
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Two-sided Kolmogorov-Smirnov p-value against the standard normal,
// asymptotic series with the Stephens small-sample correction.
inline double ks_pvalue(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = normal_cdf(xs[i]);
    d = std::max(d, std::max((static_cast<double>(i) + 1.0) / n - f,
                             f - static_cast<double>(i) / n));
  }
  const double lam = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double t = std::exp(-2.0 * k * k * lam * lam);
    p += (k % 2 ? 2.0 : -2.0) * t;
    if (t < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

inline std::string fnum(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

inline void note(CheckReport& r, const std::string& s) {
  if (!r.detail.empty()) r.detail += "; ";
  r.detail += s;
}

}  // namespace errcalc::detail
