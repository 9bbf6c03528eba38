#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lspc/core/error.hpp"
#include "lspc/core/real.hpp"
#include "lspc/core/rng.hpp"

namespace lspc::nn {

enum class Activation { kRelu, kTanh };

/// kLinear emits the raw last layer. kGaussian splits it into a mean half
/// and a log-std half; the log-std half is clamped to [kLogStdMin, kLogStdMax].
enum class Head { kLinear, kGaussian };

inline constexpr double kLogStdMin = -4.0;
inline constexpr double kLogStdMax = 1.0;

template <typename T>
struct DenseLayer {
  Mat<T> weight;  // out x in
  Vec<T> bias;    // out
};

/// One array per parameter tensor, shaped like the owning network.
template <typename T>
struct GradientBuffer {
  std::vector<DenseLayer<T>> layers;

  void set_zero() {
    for (auto& l : layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  GradientBuffer& operator+=(const GradientBuffer& o) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight += o.layers[i].weight;
      layers[i].bias += o.layers[i].bias;
    }
    return *this;
  }

  /// Largest absolute entry; 0 for an empty buffer.
  T max_abs() const {
    T m = T(0);
    for (const auto& l : layers) {
      if (l.weight.size()) m = std::max(m, l.weight.cwiseAbs().maxCoeff());
      if (l.bias.size()) m = std::max(m, l.bias.cwiseAbs().maxCoeff());
    }
    return m;
  }
};

/// Activations recorded by a forward pass, consumed by `Mlp::backward`.
template <typename T>
struct ForwardCache {
  std::vector<Mat<T>> inputs;  // input to layer k
  std::vector<Mat<T>> pre;     // pre-activation of layer k
  bool valid = false;
};

/// Dense feed-forward network operating on column batches (features x batch).
template <typename T>
class Mlp {
 public:
  Mlp() = default;

  /// Zero-initialised network with the given layer sizes (input first).
  Mlp(std::vector<int> sizes, Activation activation, Head head)
      : sizes_(std::move(sizes)), activation_(activation), head_(head) {
    if (sizes_.size() < 2) throw UsageError("Mlp needs at least an input and an output layer");
    for (int s : sizes_)
      if (s <= 0) throw UsageError("Mlp layer sizes must be positive");
    if (head_ == Head::kGaussian && sizes_.back() % 2 != 0)
      throw UsageError("gaussian head needs an even raw output size");
    layers_.resize(sizes_.size() - 1);
    for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
      layers_[k].weight = Mat<T>::Zero(sizes_[k + 1], sizes_[k]);
      layers_[k].bias = Vec<T>::Zero(sizes_[k + 1]);
    }
  }

  /// Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases.
  static Mlp glorot(std::vector<int> sizes, Activation activation, Head head, Rng& rng) {
    Mlp net(std::move(sizes), activation, head);
    for (auto& l : net.layers_) {
      const double bound = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
          l.weight(r, c) = static_cast<T>(rng.uniform(-bound, bound));
    }
    return net;
  }

  const std::vector<int>& sizes() const { return sizes_; }
  Activation activation() const { return activation_; }
  Head head() const { return head_; }
  int input_dim() const { return sizes_.front(); }
  int raw_output_dim() const { return sizes_.back(); }
  /// Dimension of the modelled quantity: half the raw output for a gaussian head.
  int output_dim() const { return head_ == Head::kGaussian ? sizes_.back() / 2 : sizes_.back(); }

  std::vector<DenseLayer<T>>& layers() { return layers_; }
  const std::vector<DenseLayer<T>>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  bool same_architecture(const Mlp& o) const {
    return sizes_ == o.sizes_ && activation_ == o.activation_ && head_ == o.head_;
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  GradientBuffer<T> zero_grad() const {
    GradientBuffer<T> g;
    g.layers.resize(layers_.size());
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      g.layers[k].weight = Mat<T>::Zero(layers_[k].weight.rows(), layers_[k].weight.cols());
      g.layers[k].bias = Vec<T>::Zero(layers_[k].bias.size());
    }
    return g;
  }

  /// Forward pass over a batch (input_dim x B). Returns the head output
  /// (raw_output_dim x B); for a gaussian head the lower half is the clamped
  /// log-std.
  Mat<T> forward(const Mat<T>& x, ForwardCache<T>* cache = nullptr) const {
    if (x.rows() != input_dim())
      throw UsageError("Mlp input has " + std::to_string(x.rows()) + " rows, expected " +
                       std::to_string(input_dim()));
    const std::size_t n = layers_.size();
    if (cache) {
      cache->inputs.resize(n);
      cache->pre.resize(n);
    }
    Mat<T> h = x;
    for (std::size_t k = 0; k < n; ++k) {
      Mat<T> z(layers_[k].weight.rows(), h.cols());
      z.noalias() = layers_[k].weight * h;
      z.colwise() += layers_[k].bias;
      if (cache) {
        cache->inputs[k] = std::move(h);
        cache->pre[k] = z;
      }
      if (k + 1 < n) {
        h = activate(z);
      } else {
        if (head_ == Head::kGaussian) {
          const Eigen::Index half = z.rows() / 2;
          z.bottomRows(half) =
              z.bottomRows(half).cwiseMax(T(kLogStdMin)).cwiseMin(T(kLogStdMax));
        }
        if (cache) cache->valid = true;
        return z;
      }
    }
    return h;  // unreachable: n >= 1
  }

  /// Single-sample convenience wrapper around `forward`.
  Vec<T> apply(const Vec<T>& x) const { return forward(Mat<T>(x)).col(0); }

  /// Back-propagates `upstream` (d loss / d head output, same shape as the
  /// forward output). Parameter gradients are accumulated into `grads` when
  /// non-null. Returns d loss / d input.
  Mat<T> backward(const ForwardCache<T>& cache, const Mat<T>& upstream,
                  GradientBuffer<T>* grads) const {
    if (!cache.valid || cache.pre.size() != layers_.size())
      throw UsageError("Mlp::backward called without a matching forward cache");
    const std::size_t n = layers_.size();
    Mat<T> g = upstream;
    if (g.rows() != raw_output_dim() || g.cols() != cache.pre.back().cols())
      throw UsageError("Mlp::backward upstream gradient has the wrong shape");
    if (head_ == Head::kGaussian) {
      const Eigen::Index half = g.rows() / 2;
      const auto raw = cache.pre.back().bottomRows(half).array();
      g.bottomRows(half) =
          ((raw < T(kLogStdMin)) || (raw > T(kLogStdMax))).select(T(0), g.bottomRows(half).array());
    }
    for (std::size_t k = n; k-- > 0;) {
      if (grads) {
        grads->layers[k].weight.noalias() += g * cache.inputs[k].transpose();
        grads->layers[k].bias += g.rowwise().sum();
      }
      Mat<T> gin(layers_[k].weight.cols(), g.cols());
      gin.noalias() = layers_[k].weight.transpose() * g;
      if (k == 0) return gin;
      g = gin.cwiseProduct(activation_derivative(cache.pre[k - 1]));
    }
    return g;  // unreachable
  }

  template <typename U>
  Mlp<U> cast() const {
    Mlp<U> out(sizes_, activation_, head_);
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      out.layers()[k].weight = layers_[k].weight.template cast<U>();
      out.layers()[k].bias = layers_[k].bias.template cast<U>();
    }
    return out;
  }

 private:
  Mat<T> activate(const Mat<T>& z) const {
    if (activation_ == Activation::kRelu) return z.cwiseMax(T(0));
    return z.array().tanh().matrix();
  }

  Mat<T> activation_derivative(const Mat<T>& z) const {
    if (activation_ == Activation::kRelu) return (z.array() > T(0)).template cast<T>().matrix();
    const auto t = z.array().tanh();
    return (T(1) - t * t).matrix();
  }

  std::vector<int> sizes_;
  Activation activation_ = Activation::kRelu;
  Head head_ = Head::kLinear;
  std::vector<DenseLayer<T>> layers_;
};

/// target <- (1 - tau) * target + tau * online, element-wise.
template <typename T>
void soft_update(Mlp<T>& target, const Mlp<T>& online, double tau) {
  if (!target.same_architecture(online)) throw UsageError("soft_update: architecture mismatch");
  if (!(tau >= 0.0 && tau <= 1.0)) throw UsageError("soft_update: tau must lie in [0, 1]");
  if (tau == 0.0) return;
  auto& tl = target.layers();
  const auto& ol = online.layers();
  if (tau == 1.0) {
    for (std::size_t k = 0; k < tl.size(); ++k) tl[k] = ol[k];
    return;
  }
  const T keep = static_cast<T>(1.0 - tau);
  const T take = static_cast<T>(tau);
  for (std::size_t k = 0; k < tl.size(); ++k) {
    tl[k].weight = keep * tl[k].weight + take * ol[k].weight;
    tl[k].bias = keep * tl[k].bias + take * ol[k].bias;
  }
}

/// Hidden layer sizes helper: [in, width x depth, out].
inline std::vector<int> layer_sizes(int in, int width, int depth, int out) {
  std::vector<int> s{in};
  for (int i = 0; i < depth; ++i) s.push_back(width);
  s.push_back(out);
  return s;
}

}  // namespace lspc::nn
