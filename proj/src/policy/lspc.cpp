#include "lspc/policy/lspc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lspc/core/error.hpp"
#include "lspc/nn/gaussian.hpp"

namespace lspc::policy {

using nn::Activation;
using nn::ForwardCache;
using nn::Head;
using nn::layer_sizes;

void PolicyParams::validate() const {
  if (latent_dim <= 0) throw UsageError("latent_dim must be positive");
  if (!(epsilon >= 0.0)) throw UsageError("epsilon must be non-negative");
  if (!(lambda >= 0.0) || !(zeta >= 0.0)) throw UsageError("inverse temperatures must be non-negative");
  if (!(kl_coef >= 0.0)) throw UsageError("kl_coef must be non-negative");
  if (!(w_max > 0.0)) throw UsageError("w_max must be positive");
}

template <typename T>
PolicyBundle<T> PolicyBundle<T>::init(int state_dim, int action_dim, const PolicyParams& params, int width,
                                      int depth, Rng& rng) {
  params.validate();
  const int dz = params.latent_dim;
  PolicyBundle pb;
  pb.cvae_enc = Mlp<T>::glorot(layer_sizes(state_dim + action_dim, width, depth, 2 * dz), Activation::kRelu,
                               Head::kGaussian, rng);
  pb.cvae_dec = Mlp<T>::glorot(layer_sizes(state_dim + dz, width, depth, 2 * action_dim), Activation::kRelu,
                               Head::kGaussian, rng);
  pb.lat_enc = Mlp<T>::glorot(layer_sizes(state_dim, width, depth, 2 * dz), Activation::kRelu, Head::kGaussian,
                              rng);
  pb.params = params;
  return pb;
}

template <typename T>
void PolicyBundle<T>::validate() const {
  params.validate();
  if (cvae_enc.head() != Head::kGaussian || cvae_dec.head() != Head::kGaussian || lat_enc.head() != Head::kGaussian)
    throw UsageError("policy networks need gaussian heads");
  const int dz = params.latent_dim;
  if (cvae_enc.output_dim() != dz || lat_enc.output_dim() != dz)
    throw UsageError("latent dimension is inconsistent across policy networks");
  if (cvae_dec.input_dim() != state_dim() + dz || cvae_enc.input_dim() != state_dim() + action_dim())
    throw UsageError("policy network input dimensions are inconsistent");
}

template <typename T>
void PolicyBundle<T>::for_each(const std::function<void(std::string_view, Mlp<T>&)>& fn) {
  fn("cvae_enc", cvae_enc);
  fn("cvae_dec", cvae_dec);
  fn("lat_enc", lat_enc);
}

template <typename T>
void PolicyBundle<T>::for_each(const std::function<void(std::string_view, const Mlp<T>&)>& fn) const {
  const_cast<PolicyBundle*>(this)->for_each([&](std::string_view n, Mlp<T>& m) { fn(n, m); });
}

double cost_awr_weight(double cost_advantage, double lambda, double w_max, std::optional<double> c_zero_thresh,
                       double q_cost, double v_cost) {
  if (c_zero_thresh && (q_cost > *c_zero_thresh || v_cost > *c_zero_thresh)) return 0.0;
  if (lambda == 0.0) return std::min(1.0, w_max);
  return std::min(std::exp(-lambda * cost_advantage), w_max);
}

double reward_awr_weight(double reward_advantage, double zeta, double w_max) {
  if (zeta == 0.0) return std::min(1.0, w_max);
  return std::min(std::exp(zeta * reward_advantage), w_max);
}

template <typename T>
RowVec<T> cvae_weights(const PolicyBundle<T>& pb, const critics::CriticSet<T>& cs, const data::Batch<T>& b) {
  const auto& p = pb.params;
  RowVec<T> w(b.size());
  if (p.lambda == 0.0 && !p.c_zero_thresh) {
    w.setConstant(static_cast<T>(std::min(1.0, p.w_max)));
    return w;
  }
  const auto adv = critics::advantages(cs, b.states, b.actions);
  for (Eigen::Index j = 0; j < w.size(); ++j)
    w(j) = static_cast<T>(cost_awr_weight(adv.cost(j), p.lambda, p.w_max, p.c_zero_thresh, adv.q_cost(j),
                                          adv.v_cost(j)));
  return w;
}

template <typename T>
RowVec<T> encoder_weights(const PolicyBundle<T>& pb, const critics::CriticSet<T>& cs, const data::Batch<T>& b) {
  const auto& p = pb.params;
  RowVec<T> w(b.size());
  if (p.zeta == 0.0) {
    w.setConstant(static_cast<T>(std::min(1.0, p.w_max)));
    return w;
  }
  const RowVec<T> a = critics::reward_q(cs, b.states, b.actions) - RowVec<T>(cs.v.forward(b.states));
  for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = static_cast<T>(reward_awr_weight(a(j), p.zeta, p.w_max));
  return w;
}

namespace {

template <typename T>
Mat<T> stack(const Mat<T>& top, const Mat<T>& bottom) {
  Mat<T> x(top.rows() + bottom.rows(), top.cols());
  x.topRows(top.rows()) = top;
  x.bottomRows(bottom.rows()) = bottom;
  return x;
}

template <typename T>
Mat<T> standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat<T> n(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) n(i, j) = static_cast<T>(rng.normal());
  return n;
}

template <typename T>
void require_finite(T value, const std::string& what) {
  if (!std::isfinite(static_cast<double>(value))) throw NumericError("non-finite " + what);
}

/// d(-w * log p(a | mean, log_std)) / d(mean, log_std), stacked as a
/// gaussian-head upstream gradient.
template <typename T>
Mat<T> neg_log_prob_upstream(const Mat<T>& mean, const Mat<T>& log_std, const Mat<T>& a, const RowVec<T>& scale) {
  const Mat<T> inv_var = (T(-2) * log_std.array()).exp().matrix();
  const Mat<T> diff = a - mean;
  Mat<T> g(2 * mean.rows(), mean.cols());
  g.topRows(mean.rows()) = -(diff.array() * inv_var.array()).matrix() * scale.asDiagonal();
  g.bottomRows(mean.rows()) =
      -((diff.array().square() * inv_var.array()) - T(1)).matrix() * scale.asDiagonal();
  return g;
}

}  // namespace

template <typename T>
CvaeLoss<T> cvae_loss(const PolicyBundle<T>& pb, const RowVec<T>& weights, const data::Batch<T>& b,
                      const Mat<T>& noise) {
  const Eigen::Index n = b.size();
  const int dz = pb.latent_dim();
  if (n == 0) throw UsageError("cvae_loss: empty batch");
  if (weights.cols() != n || noise.rows() != dz || noise.cols() != n)
    throw UsageError("cvae_loss: weight or noise shape mismatch");

  ForwardCache<T> enc_cache, dec_cache;
  const Mat<T> enc_out = pb.cvae_enc.forward(stack(b.states, b.actions), &enc_cache);
  const Mat<T> mu = enc_out.topRows(dz);
  const Mat<T> ls = enc_out.bottomRows(dz);
  const Mat<T> sigma = ls.array().exp().matrix();
  const Mat<T> z = mu + sigma.cwiseProduct(noise);

  const Mat<T> dec_out = pb.cvae_dec.forward(stack(b.states, z), &dec_cache);
  const Eigen::Index ad = dec_out.rows() / 2;
  const Mat<T> am = dec_out.topRows(ad);
  const Mat<T> als = dec_out.bottomRows(ad);

  const RowVec<T> lp = nn::batch_log_prob<T>(am, als, b.actions);
  const RowVec<T> kl = nn::batch_kl_to_standard_normal<T>(mu, ls);
  const T k = static_cast<T>(pb.params.kl_coef);
  const T inv_n = T(1) / static_cast<T>(n);

  CvaeLoss<T> out;
  const T recon = (weights.array() * lp.array()).sum();
  const T prior = (weights.array() * kl.array()).sum();
  require_finite(recon, "cvae reconstruction term");
  require_finite(prior, "cvae kl term");
  out.loss = -(recon - k * prior) * inv_n;
  require_finite(out.loss, "cvae loss");
  out.mean_weight = static_cast<double>(weights.mean());

  const RowVec<T> scale = weights * inv_n;
  out.grad_dec = pb.cvae_dec.zero_grad();
  const Mat<T> g_dec_in = pb.cvae_dec.backward(dec_cache, neg_log_prob_upstream<T>(am, als, b.actions, scale),
                                               &out.grad_dec);
  const Mat<T> g_z = g_dec_in.bottomRows(dz);

  Mat<T> g_enc(2 * dz, n);
  const RowVec<T> kscale = scale * k;
  g_enc.topRows(dz) = g_z + mu * kscale.asDiagonal();
  g_enc.bottomRows(dz) = g_z.cwiseProduct(sigma).cwiseProduct(noise) +
                         ((sigma.array().square() - T(1)).matrix() * kscale.asDiagonal());
  out.grad_enc = pb.cvae_enc.zero_grad();
  pb.cvae_enc.backward(enc_cache, g_enc, &out.grad_enc);
  return out;
}

template <typename T>
CvaeLoss<T> cvae_loss(const PolicyBundle<T>& pb, const critics::CriticSet<T>& cs, const data::Batch<T>& b,
                      Rng& rng) {
  const RowVec<T> w = cvae_weights(pb, cs, b);
  const Mat<T> noise = standard_normal<T>(pb.latent_dim(), b.size(), rng);
  return cvae_loss(pb, w, b, noise);
}

template <typename T>
EncoderLoss<T> encoder_loss(const PolicyBundle<T>& pb, const RowVec<T>& weights, const data::Batch<T>& b,
                            const Mat<T>& noise) {
  const Eigen::Index n = b.size();
  const int dz = pb.latent_dim();
  if (n == 0) throw UsageError("encoder_loss: empty batch");
  if (weights.cols() != n || noise.rows() != dz || noise.cols() != n)
    throw UsageError("encoder_loss: weight or noise shape mismatch");

  ForwardCache<T> lat_cache, dec_cache;
  const Mat<T> lat_out = pb.lat_enc.forward(b.states, &lat_cache);
  const Mat<T> sigma = lat_out.bottomRows(dz).array().exp().matrix();
  const Mat<T> u = lat_out.topRows(dz) + sigma.cwiseProduct(noise);
  const Mat<T> th = u.array().tanh().matrix();
  const T eps = static_cast<T>(pb.params.epsilon);
  const Mat<T> z = eps * th;

  const Mat<T> dec_out = pb.cvae_dec.forward(stack(b.states, z), &dec_cache);
  const Eigen::Index ad = dec_out.rows() / 2;
  const Mat<T> am = dec_out.topRows(ad);
  const Mat<T> als = dec_out.bottomRows(ad);
  const RowVec<T> lp = nn::batch_log_prob<T>(am, als, b.actions);
  const T inv_n = T(1) / static_cast<T>(n);

  EncoderLoss<T> out;
  out.loss = -(weights.array() * lp.array()).sum() * inv_n;
  require_finite(out.loss, "encoder loss");
  out.mean_weight = static_cast<double>(weights.mean());

  const RowVec<T> scale = weights * inv_n;
  const Mat<T> g_dec_in =
      pb.cvae_dec.backward(dec_cache, neg_log_prob_upstream<T>(am, als, b.actions, scale), nullptr);
  const Mat<T> g_u = (g_dec_in.bottomRows(dz).array() * eps * (T(1) - th.array().square())).matrix();
  Mat<T> g_lat(2 * dz, n);
  g_lat.topRows(dz) = g_u;
  g_lat.bottomRows(dz) = g_u.cwiseProduct(sigma).cwiseProduct(noise);
  out.grad = pb.lat_enc.zero_grad();
  pb.lat_enc.backward(lat_cache, g_lat, &out.grad);
  return out;
}

template <typename T>
EncoderLoss<T> encoder_loss(const PolicyBundle<T>& pb, const critics::CriticSet<T>& cs,
                            const data::Batch<T>& b, Rng& rng) {
  const RowVec<T> w = encoder_weights(pb, cs, b);
  const Mat<T> noise = standard_normal<T>(pb.latent_dim(), b.size(), rng);
  return encoder_loss(pb, w, b, noise);
}

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "lspc-s" || name == "lspc_s") return PolicyKind::kLspcS;
  if (name == "lspc-o" || name == "lspc_o") return PolicyKind::kLspcO;
  if (name == "cvae") return PolicyKind::kCvae;
  throw UsageError("unknown policy '" + std::string(name) + "' (expected lspc-s, lspc-o or cvae)");
}

std::string policy_kind_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kLspcS: return "lspc-s";
    case PolicyKind::kLspcO: return "lspc-o";
    case PolicyKind::kCvae: return "cvae";
  }
  return "unknown";
}

VecD restricted_latent(int dim, double epsilon, bool truncated_normal, Rng& rng) {
  VecD z(dim);
  if (!truncated_normal) {
    for (int i = 0; i < dim; ++i) z(i) = std::clamp(rng.normal(), -epsilon, epsilon);
    return z;
  }
  if (epsilon == 0.0) return VecD::Zero(dim);
  for (int i = 0; i < dim; ++i) {
    if (epsilon >= 1.0) {
      double x;
      do x = rng.normal();
      while (std::abs(x) > epsilon);
      z(i) = x;
    } else {
      // uniform proposal, accept with the normal density ratio
      while (true) {
        const double x = rng.uniform(-epsilon, epsilon);
        if (rng.uniform() < std::exp(-0.5 * x * x)) {
          z(i) = x;
          break;
        }
      }
    }
  }
  return z;
}

template <typename T>
Mat<T> decode_actions(const PolicyBundle<T>& pb, const Mat<T>& states, const Mat<T>& latents,
                      const env::ActionBox& box) {
  const Mat<T> out = pb.cvae_dec.forward(stack(states, latents));
  const Eigen::Index ad = out.rows() / 2;
  if (box.low.size() != ad) throw UsageError("action box dimension does not match the decoder");
  Mat<T> a = out.topRows(ad);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < ad; ++i)
      a(i, j) = std::clamp(a(i, j), static_cast<T>(box.low(i)), static_cast<T>(box.high(i)));
  return a;
}

template <typename T>
Mat<T> optimized_latents(const PolicyBundle<T>& pb, const Mat<T>& states) {
  const Mat<T> out = pb.lat_enc.forward(states);
  return static_cast<T>(pb.params.epsilon) * out.topRows(pb.latent_dim()).array().tanh().matrix();
}

namespace {

template <typename T>
void check_state(const PolicyBundle<T>& pb, const VecD& s) {
  if (s.size() != pb.state_dim())
    throw UsageError("state has dimension " + std::to_string(s.size()) + ", policy expects " +
                     std::to_string(pb.state_dim()));
}

template <typename T>
VecD draw_latent(const PolicyBundle<T>& pb, PolicyKind kind, Rng& rng) {
  const int dz = pb.latent_dim();
  if (kind == PolicyKind::kLspcS) return restricted_latent(dz, pb.params.epsilon, pb.params.truncated_normal, rng);
  VecD z(dz);
  for (int i = 0; i < dz; ++i) z(i) = rng.normal();
  return z;
}

}  // namespace

template <typename T>
VecD act_lspc_s(const PolicyBundle<T>& pb, const VecD& s, const env::ActionBox& box, Rng& rng) {
  return act(pb, PolicyKind::kLspcS, s, box, rng);
}

template <typename T>
VecD act_lspc_o(const PolicyBundle<T>& pb, const VecD& s, const env::ActionBox& box) {
  check_state(pb, s);
  const Mat<T> st = s.cast<T>();
  return decode_actions(pb, st, optimized_latents(pb, st), box).col(0).template cast<double>();
}

template <typename T>
VecD act_cvae(const PolicyBundle<T>& pb, const VecD& s, const env::ActionBox& box, Rng& rng) {
  return act(pb, PolicyKind::kCvae, s, box, rng);
}

template <typename T>
VecD act(const PolicyBundle<T>& pb, PolicyKind kind, const VecD& s, const env::ActionBox& box, Rng& rng) {
  if (kind == PolicyKind::kLspcO) return act_lspc_o(pb, s, box);
  check_state(pb, s);
  const VecD z = draw_latent(pb, kind, rng);
  return decode_actions<T>(pb, s.cast<T>(), z.cast<T>(), box).col(0).template cast<double>();
}

template <typename T>
MatD act_many(const PolicyBundle<T>& pb, PolicyKind kind, const VecD& s, int n, const env::ActionBox& box,
              Rng& rng) {
  check_state(pb, s);
  if (n < 0) throw UsageError("act_many: negative sample count");
  const Mat<T> states = s.cast<T>().replicate(1, n);
  Mat<T> latents(pb.latent_dim(), n);
  if (kind == PolicyKind::kLspcO) {
    latents = optimized_latents(pb, states);
  } else {
    for (int j = 0; j < n; ++j) latents.col(j) = draw_latent(pb, kind, rng).template cast<T>();
  }
  return decode_actions(pb, states, latents, box).template cast<double>();
}

template <typename T>
std::vector<ScanPoint> action_scan(const PolicyBundle<T>& pb, const critics::CriticSet<T>& cs, const VecD& s,
                                   int n_samples, const env::ActionBox& box, Rng& rng) {
  if (n_samples < 0) throw UsageError("action_scan: negative sample count");
  std::vector<ScanPoint> points;
  auto add = [&](const MatD& actions, const char* source) {
    const Mat<T> states = s.cast<T>().replicate(1, actions.cols());
    const RowVec<T> q = critics::reward_q(cs, states, Mat<T>(actions.cast<T>()));
    for (Eigen::Index j = 0; j < actions.cols(); ++j)
      points.push_back({actions.col(j), static_cast<double>(q(j)), source});
  };
  add(act_many(pb, PolicyKind::kCvae, s, n_samples, box, rng), "cvae");
  add(act_many(pb, PolicyKind::kLspcS, s, n_samples, box, rng), "lspc_s");
  add(act_many(pb, PolicyKind::kLspcO, s, 1, box, rng), "lspc_o");
  return points;
}

#define LSPC_INSTANTIATE(T)                                                                                      \
  template struct PolicyBundle<T>;                                                                               \
  template RowVec<T> cvae_weights<T>(const PolicyBundle<T>&, const critics::CriticSet<T>&, const data::Batch<T>&); \
  template RowVec<T> encoder_weights<T>(const PolicyBundle<T>&, const critics::CriticSet<T>&,                    \
                                        const data::Batch<T>&);                                                  \
  template CvaeLoss<T> cvae_loss<T>(const PolicyBundle<T>&, const RowVec<T>&, const data::Batch<T>&,             \
                                    const Mat<T>&);                                                              \
  template CvaeLoss<T> cvae_loss<T>(const PolicyBundle<T>&, const critics::CriticSet<T>&, const data::Batch<T>&, \
                                    Rng&);                                                                       \
  template EncoderLoss<T> encoder_loss<T>(const PolicyBundle<T>&, const RowVec<T>&, const data::Batch<T>&,       \
                                          const Mat<T>&);                                                        \
  template EncoderLoss<T> encoder_loss<T>(const PolicyBundle<T>&, const critics::CriticSet<T>&,                  \
                                          const data::Batch<T>&, Rng&);                                          \
  template Mat<T> decode_actions<T>(const PolicyBundle<T>&, const Mat<T>&, const Mat<T>&, const env::ActionBox&); \
  template Mat<T> optimized_latents<T>(const PolicyBundle<T>&, const Mat<T>&);                                   \
  template VecD act_lspc_s<T>(const PolicyBundle<T>&, const VecD&, const env::ActionBox&, Rng&);                 \
  template VecD act_lspc_o<T>(const PolicyBundle<T>&, const VecD&, const env::ActionBox&);                       \
  template VecD act_cvae<T>(const PolicyBundle<T>&, const VecD&, const env::ActionBox&, Rng&);                   \
  template VecD act<T>(const PolicyBundle<T>&, PolicyKind, const VecD&, const env::ActionBox&, Rng&);            \
  template MatD act_many<T>(const PolicyBundle<T>&, PolicyKind, const VecD&, int, const env::ActionBox&, Rng&);  \
  template std::vector<ScanPoint> action_scan<T>(const PolicyBundle<T>&, const critics::CriticSet<T>&,           \
                                                 const VecD&, int, const env::ActionBox&, Rng&);

LSPC_INSTANTIATE(float)
LSPC_INSTANTIATE(double)

#undef LSPC_INSTANTIATE

}  // namespace lspc::policy
