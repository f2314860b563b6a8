#pragma once

// Test-only reference computations. These deliberately avoid the library's
// QR path so they can serve as independent checks.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

// Intercept weights by forming X'WX explicitly and inverting it with
// Gauss-Jordan elimination in long double.
inline std::vector<double> intercept_weights(const std::vector<double>& x,
                                             const std::vector<double>& w,
                                             int order) {
  const int p = order + 1;
  std::vector<long double> a(p * 2 * p, 0.0L);
  auto at = [&](int r, int c) -> long double& { return a[r * 2 * p + c]; };
  for (std::size_t i = 0; i < x.size(); ++i)
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < p; ++c)
        at(r, c) += w[i] * std::pow((long double)x[i], r + c);
  for (int r = 0; r < p; ++r) at(r, p + r) = 1.0L;
  for (int col = 0; col < p; ++col) {
    int piv = col;
    for (int r = col + 1; r < p; ++r)
      if (std::fabs(at(r, col)) > std::fabs(at(piv, col))) piv = r;
    for (int c = 0; c < 2 * p; ++c) std::swap(at(col, c), at(piv, c));
    const long double d = at(col, col);
    for (int c = 0; c < 2 * p; ++c) at(col, c) /= d;
    for (int r = 0; r < p; ++r) {
      if (r == col) continue;
      const long double f = at(r, col);
      for (int c = 0; c < 2 * p; ++c) at(r, c) -= f * at(col, c);
    }
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    long double s = 0.0L;
    for (int k = 0; k < p; ++k) s += at(0, p + k) * std::pow((long double)x[i], k);
    out[i] = static_cast<double>(w[i] * s);
  }
  return out;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Plain bisection on the folded-normal coverage.
inline double bisect_cv(double t, double alpha) {
  double lo = 0.0, hi = t + 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double cover = normal_cdf(mid - t) - normal_cdf(-mid - t);
    (cover >= 1.0 - alpha ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace oracle
