#pragma once

#include <functional>
#include <string_view>
#include <utility>

#include "lspc/core/real.hpp"
#include "lspc/core/rng.hpp"
#include "lspc/dataset/dataset.hpp"
#include "lspc/nn/adam.hpp"
#include "lspc/nn/mlp.hpp"

namespace lspc::critics {

using nn::Mlp;
using nn::GradientBuffer;

/// Reward and cost IQL critics. Q networks read (s||a), V networks read s.
template <typename T>
struct CriticSet {
  Mlp<T> q1, q2, q1_target, q2_target, v;
  Mlp<T> qc1, qc2, qc1_target, qc2_target, vc;
  double xi = 0.7;
  double gamma = 0.99;
  double tau = 0.005;

  /// Glorot-initialised networks; targets start as copies of their online nets.
  static CriticSet init(int state_dim, int action_dim, int width, int depth, Rng& rng);

  /// Throws UsageError unless xi in (0.5, 1) (or [0.5, 1) with `ablation`),
  /// gamma in (0, 1), tau in [0, 1] and all architectures line up.
  void validate(bool ablation = false) const;

  int state_dim() const { return v.input_dim(); }
  int action_dim() const { return q1.input_dim() - v.input_dim(); }

  template <typename U>
  CriticSet<U> cast() const;

  /// Visits (name, net) for all ten networks in checkpoint order.
  void for_each(const std::function<void(std::string_view, Mlp<T>&)>& fn);
  void for_each(const std::function<void(std::string_view, const Mlp<T>&)>& fn) const;
};

/// Row-stacks states over actions: the Q-network input.
template <typename T>
Mat<T> state_action(const Mat<T>& states, const Mat<T>& actions);

template <typename T>
struct ValueLoss {
  T loss = T(0);
  GradientBuffer<T> grad;
};

template <typename T>
struct QLoss {
  T loss = T(0);
  GradientBuffer<T> grad1;
  GradientBuffer<T> grad2;
};

/// mean L_xi(min(Q1_target, Q2_target)(s, a) - V(s)); gradient for V.
template <typename T>
ValueLoss<T> reward_value_loss(const CriticSet<T>& cs, const data::Batch<T>& b);

/// sum_i mean (r + gamma (1 - done) V(s') - Q_i(s, a))^2; gradients for Q1, Q2.
template <typename T>
QLoss<T> reward_q_loss(const CriticSet<T>& cs, const data::Batch<T>& b);

/// mean L_xi(Vc(s) - max(Qc1_target, Qc2_target)(s, a)); gradient for Vc.
template <typename T>
ValueLoss<T> cost_value_loss(const CriticSet<T>& cs, const data::Batch<T>& b);

/// sum_i mean (c + gamma (1 - done) Vc(s') - Qc_i(s, a))^2.
template <typename T>
QLoss<T> cost_q_loss(const CriticSet<T>& cs, const data::Batch<T>& b);

template <typename T>
struct Advantages {
  RowVec<T> reward;  // min(Q1, Q2) - V
  RowVec<T> cost;    // max(Qc1, Qc2) - Vc
  RowVec<T> q_cost;  // max(Qc1, Qc2)
  RowVec<T> v_cost;  // Vc
};

/// Online-network advantages over a column batch.
template <typename T>
Advantages<T> advantages(const CriticSet<T>& cs, const Mat<T>& states, const Mat<T>& actions);

/// min(Q1, Q2)(s, a) on online networks.
template <typename T>
RowVec<T> reward_q(const CriticSet<T>& cs, const Mat<T>& states, const Mat<T>& actions);

/// max(Qc1, Qc2)(s, a) on online networks.
template <typename T>
RowVec<T> cost_q(const CriticSet<T>& cs, const Mat<T>& states, const Mat<T>& actions);

template <typename T>
struct CriticOptimizers {
  nn::AdamState<T> v, q1, q2, vc, qc1, qc2;
  static CriticOptimizers for_critics(const CriticSet<T>& cs);
};

struct CriticLosses {
  double reward_value = 0.0;
  double reward_q = 0.0;
  double cost_value = 0.0;
  double cost_q = 0.0;
};

/// Called with a parameter-group name each time one is mutated.
using MutationObserver = std::function<void(std::string_view)>;

/// One gradient step on V, then Q1/Q2, then Vc, then Qc1/Qc2 using the same
/// batch. Targets are left alone. Losses are checked for finiteness.
template <typename T>
CriticLosses critic_step(CriticSet<T>& cs, CriticOptimizers<T>& opt, const data::Batch<T>& b, double lr,
                         const MutationObserver& observer = {});

/// Soft-updates the four target networks with cs.tau.
template <typename T>
void soft_update_targets(CriticSet<T>& cs);

/// `critic_step` followed by `soft_update_targets`.
template <typename T>
CriticLosses update_critics(CriticSet<T>& cs, CriticOptimizers<T>& opt, const data::Batch<T>& b, double lr);

}  // namespace lspc::critics

namespace lspc::critics {

template <typename T>
template <typename U>
CriticSet<U> CriticSet<T>::cast() const {
  CriticSet<U> out;
  out.q1 = q1.template cast<U>();
  out.q2 = q2.template cast<U>();
  out.q1_target = q1_target.template cast<U>();
  out.q2_target = q2_target.template cast<U>();
  out.v = v.template cast<U>();
  out.qc1 = qc1.template cast<U>();
  out.qc2 = qc2.template cast<U>();
  out.qc1_target = qc1_target.template cast<U>();
  out.qc2_target = qc2_target.template cast<U>();
  out.vc = vc.template cast<U>();
  out.xi = xi;
  out.gamma = gamma;
  out.tau = tau;
  return out;
}

extern template struct CriticSet<float>;
extern template struct CriticSet<double>;

}  // namespace lspc::critics
