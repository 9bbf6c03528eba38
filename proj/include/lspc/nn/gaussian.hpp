#pragma once

#include <cmath>

#include "lspc/core/error.hpp"
#include "lspc/core/real.hpp"

namespace lspc::nn {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

/// Diagonal Gaussian N(mean, diag(exp(log_std)^2)).
template <typename T>
struct DiagGaussian {
  Vec<T> mean;
  Vec<T> log_std;

  int dim() const { return static_cast<int>(mean.size()); }

  /// Splits a gaussian-head output column [mean; log_std].
  static DiagGaussian from_head(const Vec<T>& head) {
    const Eigen::Index k = head.size() / 2;
    return {head.head(k), head.tail(k)};
  }
};

/// KL(N(mean, sigma^2) || N(0, I)) = 0.5 * sum(mean^2 + sigma^2 - 2 log sigma - 1).
template <typename T>
T kl_to_standard_normal(const DiagGaussian<T>& g) {
  const auto ls = g.log_std.array();
  return T(0.5) * (g.mean.array().square() + (T(2) * ls).exp() - T(2) * ls - T(1)).sum();
}

/// Reparameterised draw mean + sigma * noise.
template <typename T>
Vec<T> gaussian_sample(const DiagGaussian<T>& g, const Vec<T>& noise) {
  if (noise.size() != g.mean.size()) throw UsageError("gaussian_sample: noise dimension mismatch");
  return g.mean + (g.log_std.array().exp() * noise.array()).matrix();
}

template <typename T>
T gaussian_log_prob(const DiagGaussian<T>& g, const Vec<T>& x) {
  if (x.size() != g.mean.size()) throw UsageError("gaussian_log_prob: dimension mismatch");
  const auto z = (x - g.mean).array() * (-g.log_std.array()).exp();
  return (T(-0.5) * z.square() - g.log_std.array() - T(kHalfLog2Pi)).sum();
}

// Batched forms: one column per sample.

/// Column-wise KL to N(0, I); returns a 1 x B row.
template <typename T>
RowVec<T> batch_kl_to_standard_normal(const Mat<T>& mean, const Mat<T>& log_std) {
  const auto ls = log_std.array();
  return (T(0.5) * (mean.array().square() + (T(2) * ls).exp() - T(2) * ls - T(1)))
      .matrix()
      .colwise()
      .sum();
}

/// Column-wise log density of x under N(mean, sigma^2); returns a 1 x B row.
template <typename T>
RowVec<T> batch_log_prob(const Mat<T>& mean, const Mat<T>& log_std, const Mat<T>& x) {
  const auto z = (x - mean).array() * (-log_std.array()).exp();
  return (T(-0.5) * z.square() - log_std.array() - T(kHalfLog2Pi)).matrix().colwise().sum();
}

}  // namespace lspc::nn
