#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "lspc/core/error.hpp"

namespace lspc::nn {

/// Asymmetric squared error |xi - 1(u < 0)| * u^2.
template <typename T>
constexpr T expectile_loss(T u, T xi) {
  const T w = u < T(0) ? T(1) - xi : xi;
  return w * u * u;
}

/// d/du of `expectile_loss`; continuous at u = 0 with value 0.
template <typename T>
constexpr T expectile_grad(T u, T xi) {
  const T w = u < T(0) ? T(1) - xi : xi;
  return T(2) * w * u;
}

/// Constant v minimising sum_i expectile_loss(u_i - v, xi). The stationarity
/// condition sum_i w_i (u_i - v) = 0 is piecewise linear in v, so the root is
/// found exactly by scanning the sorted sample.
inline double expectile_of(std::span<const double> u, double xi) {
  if (u.empty()) throw UsageError("expectile_of: empty sample");
  std::vector<double> x(u.begin(), u.end());
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  // Samples x[0..k) lie below v and carry weight 1 - xi; the rest carry xi.
  double below_sum = 0.0, above_sum = 0.0;
  for (double v : x) above_sum += v;
  for (std::size_t k = 0; k <= n; ++k) {
    const double wb = (1.0 - xi) * static_cast<double>(k);
    const double wa = xi * static_cast<double>(n - k);
    const double v = ((1.0 - xi) * below_sum + xi * above_sum) / (wb + wa);
    const bool lo_ok = k == 0 || x[k - 1] <= v;
    const bool hi_ok = k == n || v <= x[k];
    if (lo_ok && hi_ok) return v;
    if (k < n) {
      below_sum += x[k];
      above_sum -= x[k];
    }
  }
  return x[n / 2];  // unreachable for xi in (0, 1)
}

}  // namespace lspc::nn
