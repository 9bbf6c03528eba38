#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "lspc/nn/mlp.hpp"

namespace lspc::nn {

/// Outcome of an analytic-vs-finite-difference comparison.
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;         // parameters compared
  std::size_t skipped_points = 0;  // data points dropped for sitting near a kink
  std::string worst;               // tensor coordinate with the largest error

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
  void merge(const GradCheckReport& o);
};

/// Gradients whose magnitude falls below this are compared absolutely.
inline constexpr double kRelErrorFloor = 1e-6;
inline constexpr double kKinkMargin = 1e-3;

double relative_error(double analytic, double numeric);

/// Compares `analytic` against central differences of `loss` with respect to
/// every parameter of `net`. `loss` must read the current parameters of
/// `net`. Coordinates whose first comparison fails are retried with smaller
/// steps, which resolves spurious relu kink crossings.
GradCheckReport compare_gradients(Mlp<double>& net, const GradientBuffer<double>& analytic,
                                  const std::function<double()>& loss, const std::string& name,
                                  double h = 1e-5);

/// Network-level losses with closed-form output gradients.
enum class LossKind {
  kZero,          // loss == 0
  kMse,           // mean squared error against random targets
  kExpectile,     // mean expectile loss (xi = 0.7) of target - output
  kGaussianNll,   // mean negative log density of random targets (gaussian head)
  kKlStandardNormal,  // mean KL of the gaussian head to N(0, I)
};

/// Builds a random batch for `kind`, differentiates the loss analytically
/// through `net`, and compares against central differences. For kExpectile,
/// points with |u| <= kKinkMargin are removed before checking; targets may be
/// pinned to the network output with `pin_fraction` to exercise that filter.
GradCheckReport grad_check(const Mlp<double>& net, LossKind kind, std::uint64_t seed,
                           int batch = 8, double pin_fraction = 0.0);

}  // namespace lspc::nn
