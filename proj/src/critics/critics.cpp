#include "lspc/critics/critics.hpp"

#include <cmath>
#include <string>

#include "lspc/core/error.hpp"
#include "lspc/nn/expectile.hpp"

namespace lspc::critics {

using nn::Activation;
using nn::ForwardCache;
using nn::Head;
using nn::layer_sizes;

template <typename T>
CriticSet<T> CriticSet<T>::init(int state_dim, int action_dim, int width, int depth, Rng& rng) {
  if (state_dim <= 0 || action_dim <= 0 || width <= 0 || depth < 0)
    throw UsageError("critic dimensions must be positive");
  const auto q_sizes = layer_sizes(state_dim + action_dim, width, depth, 1);
  const auto v_sizes = layer_sizes(state_dim, width, depth, 1);
  auto make = [&](const std::vector<int>& s) { return Mlp<T>::glorot(s, Activation::kRelu, Head::kLinear, rng); };
  CriticSet cs;
  cs.q1 = make(q_sizes);
  cs.q2 = make(q_sizes);
  cs.v = make(v_sizes);
  cs.qc1 = make(q_sizes);
  cs.qc2 = make(q_sizes);
  cs.vc = make(v_sizes);
  cs.q1_target = cs.q1;
  cs.q2_target = cs.q2;
  cs.qc1_target = cs.qc1;
  cs.qc2_target = cs.qc2;
  return cs;
}

template <typename T>
void CriticSet<T>::validate(bool ablation) const {
  const bool xi_ok = ablation ? (xi >= 0.5 && xi < 1.0) : (xi > 0.5 && xi < 1.0);
  if (!xi_ok) throw UsageError("expectile xi out of range: " + std::to_string(xi));
  if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("gamma must lie in (0, 1)");
  if (!(tau >= 0.0 && tau <= 1.0)) throw UsageError("tau must lie in [0, 1]");
  if (!q1.same_architecture(q1_target) || !q2.same_architecture(q2_target) ||
      !qc1.same_architecture(qc1_target) || !qc2.same_architecture(qc2_target))
    throw UsageError("target networks must match their online networks");
  if (q1.input_dim() != qc1.input_dim() || v.input_dim() != vc.input_dim() || q1.input_dim() <= v.input_dim())
    throw UsageError("critic input dimensions are inconsistent");
}

template <typename T>
void CriticSet<T>::for_each(const std::function<void(std::string_view, Mlp<T>&)>& fn) {
  fn("q1", q1);
  fn("q2", q2);
  fn("q1_target", q1_target);
  fn("q2_target", q2_target);
  fn("v", v);
  fn("qc1", qc1);
  fn("qc2", qc2);
  fn("qc1_target", qc1_target);
  fn("qc2_target", qc2_target);
  fn("vc", vc);
}

template <typename T>
void CriticSet<T>::for_each(const std::function<void(std::string_view, const Mlp<T>&)>& fn) const {
  const_cast<CriticSet*>(this)->for_each([&](std::string_view n, Mlp<T>& m) { fn(n, m); });
}

template <typename T>
Mat<T> state_action(const Mat<T>& states, const Mat<T>& actions) {
  if (states.cols() != actions.cols()) throw UsageError("state/action batch sizes differ");
  Mat<T> x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

namespace {

template <typename T>
void require_finite(T value, const char* name) {
  if (!std::isfinite(static_cast<double>(value))) throw NumericError(std::string("non-finite ") + name);
}

template <typename T>
ValueLoss<T> value_loss(const Mlp<T>& value_net, const RowVec<T>& q, const Mat<T>& states, double xi,
                        bool value_minus_q, const char* name) {
  ForwardCache<T> cache;
  const RowVec<T> v = value_net.forward(states, &cache);
  const Eigen::Index n = v.cols();
  if (n == 0) throw UsageError(std::string(name) + ": empty batch");
  const T x = static_cast<T>(xi);
  const T inv_n = T(1) / static_cast<T>(n);
  Mat<T> upstream(1, n);
  T total = T(0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const T u = value_minus_q ? v(j) - q(j) : q(j) - v(j);
    total += nn::expectile_loss(u, x);
    const T du = nn::expectile_grad(u, x) * inv_n;
    upstream(0, j) = value_minus_q ? du : -du;
  }
  ValueLoss<T> out;
  out.loss = total * inv_n;
  require_finite(out.loss, name);
  out.grad = value_net.zero_grad();
  value_net.backward(cache, upstream, &out.grad);
  return out;
}

template <typename T>
QLoss<T> q_loss(const Mlp<T>& qa, const Mlp<T>& qb, const Mlp<T>& value_net, const data::Batch<T>& b,
                const RowVec<T>& signal, double gamma, const char* name) {
  const Eigen::Index n = b.size();
  if (n == 0) throw UsageError(std::string(name) + ": empty batch");
  const RowVec<T> next_v = value_net.forward(b.next_states);
  const RowVec<T> y =
      signal.array() + static_cast<T>(gamma) * (T(1) - b.dones.array()) * next_v.array();
  const Mat<T> x = state_action(b.states, b.actions);
  const T inv_n = T(1) / static_cast<T>(n);
  QLoss<T> out;
  auto one = [&](const Mlp<T>& q, GradientBuffer<T>& grad) {
    ForwardCache<T> cache;
    const RowVec<T> pred = q.forward(x, &cache);
    const RowVec<T> diff = y - pred;
    out.loss += diff.squaredNorm() * inv_n;
    grad = q.zero_grad();
    q.backward(cache, Mat<T>(T(-2) * inv_n * diff), &grad);
  };
  one(qa, out.grad1);
  one(qb, out.grad2);
  require_finite(out.loss, name);
  return out;
}

}  // namespace

template <typename T>
ValueLoss<T> reward_value_loss(const CriticSet<T>& cs, const data::Batch<T>& b) {
  const Mat<T> x = state_action(b.states, b.actions);
  const RowVec<T> q = cs.q1_target.forward(x).cwiseMin(cs.q2_target.forward(x));
  return value_loss(cs.v, q, b.states, cs.xi, false, "reward value loss");
}

template <typename T>
QLoss<T> reward_q_loss(const CriticSet<T>& cs, const data::Batch<T>& b) {
  return q_loss(cs.q1, cs.q2, cs.v, b, b.rewards, cs.gamma, "reward q loss");
}

template <typename T>
ValueLoss<T> cost_value_loss(const CriticSet<T>& cs, const data::Batch<T>& b) {
  const Mat<T> x = state_action(b.states, b.actions);
  const RowVec<T> q = cs.qc1_target.forward(x).cwiseMax(cs.qc2_target.forward(x));
  return value_loss(cs.vc, q, b.states, cs.xi, true, "cost value loss");
}

template <typename T>
QLoss<T> cost_q_loss(const CriticSet<T>& cs, const data::Batch<T>& b) {
  return q_loss(cs.qc1, cs.qc2, cs.vc, b, b.costs, cs.gamma, "cost q loss");
}

template <typename T>
RowVec<T> reward_q(const CriticSet<T>& cs, const Mat<T>& states, const Mat<T>& actions) {
  const Mat<T> x = state_action(states, actions);
  return cs.q1.forward(x).cwiseMin(cs.q2.forward(x));
}

template <typename T>
RowVec<T> cost_q(const CriticSet<T>& cs, const Mat<T>& states, const Mat<T>& actions) {
  const Mat<T> x = state_action(states, actions);
  return cs.qc1.forward(x).cwiseMax(cs.qc2.forward(x));
}

template <typename T>
Advantages<T> advantages(const CriticSet<T>& cs, const Mat<T>& states, const Mat<T>& actions) {
  Advantages<T> a;
  a.q_cost = cost_q(cs, states, actions);
  a.v_cost = cs.vc.forward(states);
  a.reward = reward_q(cs, states, actions) - RowVec<T>(cs.v.forward(states));
  a.cost = a.q_cost - a.v_cost;
  return a;
}

template <typename T>
CriticOptimizers<T> CriticOptimizers<T>::for_critics(const CriticSet<T>& cs) {
  using A = nn::AdamState<T>;
  return {A::for_net(cs.v), A::for_net(cs.q1), A::for_net(cs.q2),
          A::for_net(cs.vc), A::for_net(cs.qc1), A::for_net(cs.qc2)};
}

template <typename T>
CriticLosses critic_step(CriticSet<T>& cs, CriticOptimizers<T>& opt, const data::Batch<T>& b, double lr,
                         const MutationObserver& observer) {
  auto notify = [&](std::string_view n) {
    if (observer) observer(n);
  };
  CriticLosses out;
  {
    auto l = reward_value_loss(cs, b);
    nn::adam_step(opt.v, cs.v, l.grad, lr, "v");
    out.reward_value = static_cast<double>(l.loss);
    notify("v");
  }
  {
    auto l = reward_q_loss(cs, b);
    nn::adam_step(opt.q1, cs.q1, l.grad1, lr, "q1");
    nn::adam_step(opt.q2, cs.q2, l.grad2, lr, "q2");
    out.reward_q = static_cast<double>(l.loss);
    notify("q");
  }
  {
    auto l = cost_value_loss(cs, b);
    nn::adam_step(opt.vc, cs.vc, l.grad, lr, "vc");
    out.cost_value = static_cast<double>(l.loss);
    notify("vc");
  }
  {
    auto l = cost_q_loss(cs, b);
    nn::adam_step(opt.qc1, cs.qc1, l.grad1, lr, "qc1");
    nn::adam_step(opt.qc2, cs.qc2, l.grad2, lr, "qc2");
    out.cost_q = static_cast<double>(l.loss);
    notify("qc");
  }
  return out;
}

template <typename T>
void soft_update_targets(CriticSet<T>& cs) {
  nn::soft_update(cs.q1_target, cs.q1, cs.tau);
  nn::soft_update(cs.q2_target, cs.q2, cs.tau);
  nn::soft_update(cs.qc1_target, cs.qc1, cs.tau);
  nn::soft_update(cs.qc2_target, cs.qc2, cs.tau);
}

template <typename T>
CriticLosses update_critics(CriticSet<T>& cs, CriticOptimizers<T>& opt, const data::Batch<T>& b, double lr) {
  auto losses = critic_step(cs, opt, b, lr);
  soft_update_targets(cs);
  return losses;
}

#define LSPC_INSTANTIATE(T)                                                                            \
  template struct CriticSet<T>;                                                                        \
  template struct CriticOptimizers<T>;                                                                 \
  template Mat<T> state_action<T>(const Mat<T>&, const Mat<T>&);                                       \
  template ValueLoss<T> reward_value_loss<T>(const CriticSet<T>&, const data::Batch<T>&);              \
  template QLoss<T> reward_q_loss<T>(const CriticSet<T>&, const data::Batch<T>&);                      \
  template ValueLoss<T> cost_value_loss<T>(const CriticSet<T>&, const data::Batch<T>&);                \
  template QLoss<T> cost_q_loss<T>(const CriticSet<T>&, const data::Batch<T>&);                        \
  template RowVec<T> reward_q<T>(const CriticSet<T>&, const Mat<T>&, const Mat<T>&);                   \
  template RowVec<T> cost_q<T>(const CriticSet<T>&, const Mat<T>&, const Mat<T>&);                     \
  template Advantages<T> advantages<T>(const CriticSet<T>&, const Mat<T>&, const Mat<T>&);             \
  template CriticLosses critic_step<T>(CriticSet<T>&, CriticOptimizers<T>&, const data::Batch<T>&,     \
                                       double, const MutationObserver&);                               \
  template void soft_update_targets<T>(CriticSet<T>&);                                                 \
  template CriticLosses update_critics<T>(CriticSet<T>&, CriticOptimizers<T>&, const data::Batch<T>&, double);

LSPC_INSTANTIATE(float)
LSPC_INSTANTIATE(double)

#undef LSPC_INSTANTIATE

}  // namespace lspc::critics
