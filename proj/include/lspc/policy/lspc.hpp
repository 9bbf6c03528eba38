#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lspc/core/real.hpp"
#include "lspc/core/rng.hpp"
#include "lspc/critics/critics.hpp"
#include "lspc/dataset/dataset.hpp"
#include "lspc/env/environment.hpp"
#include "lspc/nn/mlp.hpp"

namespace lspc::policy {

using nn::GradientBuffer;
using nn::Mlp;

/// Scalars shared by the policy losses and action selection.
struct PolicyParams {
  int latent_dim = 8;
  double epsilon = 0.25;  // latent restriction
  double lambda = 2.0;    // cost inverse temperature
  double zeta = 2.0;      // reward inverse temperature
  double kl_coef = 0.5;
  double w_max = 200.0;
  std::optional<double> c_zero_thresh;
  bool truncated_normal = false;  // LSPC-S sampler: clip (default) or truncated normal

  void validate() const;
};

/// CVAE encoder q(z|s,a), decoder p(a|s,z) and latent safety encoder mu(z|s).
template <typename T>
struct PolicyBundle {
  Mlp<T> cvae_enc;  // (s||a) -> gaussian over z
  Mlp<T> cvae_dec;  // (s||z) -> gaussian over a
  Mlp<T> lat_enc;   // s -> gaussian over the pre-tanh latent
  PolicyParams params;

  static PolicyBundle init(int state_dim, int action_dim, const PolicyParams& params, int width, int depth,
                           Rng& rng);

  int state_dim() const { return lat_enc.input_dim(); }
  int action_dim() const { return cvae_dec.output_dim(); }
  int latent_dim() const { return params.latent_dim; }

  /// Architecture consistency plus `params.validate()`.
  void validate() const;

  template <typename U>
  PolicyBundle<U> cast() const {
    return {cvae_enc.template cast<U>(), cvae_dec.template cast<U>(), lat_enc.template cast<U>(), params};
  }

  void for_each(const std::function<void(std::string_view, Mlp<T>&)>& fn);
  void for_each(const std::function<void(std::string_view, const Mlp<T>&)>& fn) const;
};

/// min(exp(-lambda * A_c), w_max); zero when a threshold is given and either
/// cost value exceeds it.
double cost_awr_weight(double cost_advantage, double lambda, double w_max,
                       std::optional<double> c_zero_thresh = std::nullopt, double q_cost = 0.0,
                       double v_cost = 0.0);

/// min(exp(zeta * A_r), w_max).
double reward_awr_weight(double reward_advantage, double zeta, double w_max);

template <typename T>
struct CvaeLoss {
  T loss = T(0);
  GradientBuffer<T> grad_enc;
  GradientBuffer<T> grad_dec;
  double mean_weight = 0.0;
};

template <typename T>
struct EncoderLoss {
  T loss = T(0);
  GradientBuffer<T> grad;
  double mean_weight = 0.0;
};

/// Per-sample cost weights from the online critics.
template <typename T>
RowVec<T> cvae_weights(const PolicyBundle<T>& pb, const critics::CriticSet<T>& cs, const data::Batch<T>& b);

/// Per-sample reward weights from the online critics.
template <typename T>
RowVec<T> encoder_weights(const PolicyBundle<T>& pb, const critics::CriticSet<T>& cs, const data::Batch<T>& b);

/// mean -w * [log p(a|s,z) - kl_coef * KL(q(z|s,a) || N(0,I))] with
/// z = mu + sigma * noise; noise is latent_dim x B.
template <typename T>
CvaeLoss<T> cvae_loss(const PolicyBundle<T>& pb, const RowVec<T>& weights, const data::Batch<T>& b,
                      const Mat<T>& noise);

/// Weighted by `cvae_weights`, one standard-normal draw per sample from `rng`.
template <typename T>
CvaeLoss<T> cvae_loss(const PolicyBundle<T>& pb, const critics::CriticSet<T>& cs, const data::Batch<T>& b,
                      Rng& rng);

/// mean -w * log p(a|s,z) with z = epsilon * tanh(m + sigma * noise) from the
/// latent encoder; the decoder is differentiated through but not updated.
template <typename T>
EncoderLoss<T> encoder_loss(const PolicyBundle<T>& pb, const RowVec<T>& weights, const data::Batch<T>& b,
                            const Mat<T>& noise);

template <typename T>
EncoderLoss<T> encoder_loss(const PolicyBundle<T>& pb, const critics::CriticSet<T>& cs,
                            const data::Batch<T>& b, Rng& rng);

enum class PolicyKind { kLspcS, kLspcO, kCvae };

PolicyKind parse_policy_kind(std::string_view name);
std::string policy_kind_name(PolicyKind kind);

/// LSPC-S latent: standard normal restricted to [-eps, eps] per coordinate.
VecD restricted_latent(int dim, double epsilon, bool truncated_normal, Rng& rng);

/// Decoder mean at (s, z) clipped to `box`; states S x B, latents dz x B.
template <typename T>
Mat<T> decode_actions(const PolicyBundle<T>& pb, const Mat<T>& states, const Mat<T>& latents,
                      const env::ActionBox& box);

/// epsilon * tanh(latent encoder mean).
template <typename T>
Mat<T> optimized_latents(const PolicyBundle<T>& pb, const Mat<T>& states);

template <typename T>
VecD act_lspc_s(const PolicyBundle<T>& pb, const VecD& s, const env::ActionBox& box, Rng& rng);
template <typename T>
VecD act_lspc_o(const PolicyBundle<T>& pb, const VecD& s, const env::ActionBox& box);
template <typename T>
VecD act_cvae(const PolicyBundle<T>& pb, const VecD& s, const env::ActionBox& box, Rng& rng);

/// Dispatches on `kind`; LSPC-O ignores `rng`.
template <typename T>
VecD act(const PolicyBundle<T>& pb, PolicyKind kind, const VecD& s, const env::ActionBox& box, Rng& rng);

/// `n` actions for one state, drawn in the same order as repeated `act` calls.
template <typename T>
MatD act_many(const PolicyBundle<T>& pb, PolicyKind kind, const VecD& s, int n, const env::ActionBox& box,
              Rng& rng);

struct ScanPoint {
  VecD action;
  double q = 0.0;
  std::string source;  // "cvae", "lspc_s" or "lspc_o"
};

/// n_samples CVAE actions, n_samples LSPC-S actions, then the LSPC-O action,
/// each annotated with min(Q1, Q2)(s, a).
template <typename T>
std::vector<ScanPoint> action_scan(const PolicyBundle<T>& pb, const critics::CriticSet<T>& cs, const VecD& s,
                                   int n_samples, const env::ActionBox& box, Rng& rng);

extern template struct PolicyBundle<float>;
extern template struct PolicyBundle<double>;

}  // namespace lspc::policy
