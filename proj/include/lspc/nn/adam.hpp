#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "lspc/core/error.hpp"
#include "lspc/nn/mlp.hpp"

namespace lspc::nn {

/// Adam moments for one network. `t` counts completed steps.
template <typename T>
struct AdamState {
  GradientBuffer<T> m;
  GradientBuffer<T> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_net(const Mlp<T>& net) {
    AdamState s;
    s.m = net.zero_grad();
    s.v = net.zero_grad();
    return s;
  }
};

/// One bias-corrected Adam update. Non-finite gradients abort before any
/// parameter is touched.
template <typename T>
void adam_step(AdamState<T>& state, Mlp<T>& net, const GradientBuffer<T>& grads, double lr,
               std::string_view name = "net") {
  auto& layers = net.layers();
  if (grads.layers.size() != layers.size() || state.m.layers.size() != layers.size())
    throw UsageError("adam_step: gradient/state shape mismatch for " + std::string(name));
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (!grads.layers[k].weight.allFinite())
      throw NumericError("non-finite gradient in tensor " + std::string(name) + ".L" +
                         std::to_string(k) + ".w");
    if (!grads.layers[k].bias.allFinite())
      throw NumericError("non-finite gradient in tensor " + std::string(name) + ".L" +
                         std::to_string(k) + ".b");
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T step = static_cast<T>(lr / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);
  const T eps = static_cast<T>(state.eps);

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
    param.array() -= step * m.array() / ((v.array() * inv_bc2).sqrt() + eps);
  };
  for (std::size_t k = 0; k < layers.size(); ++k) {
    update(layers[k].weight, state.m.layers[k].weight, state.v.layers[k].weight,
           grads.layers[k].weight);
    update(layers[k].bias, state.m.layers[k].bias, state.v.layers[k].bias, grads.layers[k].bias);
  }
}

}  // namespace lspc::nn
