#include "lspc/env/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lspc/core/error.hpp"

namespace lspc::env {

void TabularCmdp::validate() const {
  if (n_states <= 0 || n_actions <= 0) throw UsageError("TabularCmdp needs states and actions");
  if (static_cast<int>(transitions.size()) != n_actions)
    throw UsageError("TabularCmdp needs one transition matrix per action");
  for (int a = 0; a < n_actions; ++a) {
    const auto& p = transitions[static_cast<std::size_t>(a)];
    if (p.rows() != n_states || p.cols() != n_states)
      throw UsageError("TabularCmdp transition matrix has the wrong shape");
    if ((p.array() < 0.0).any()) throw UsageError("TabularCmdp has negative probabilities");
    for (int s = 0; s < n_states; ++s)
      if (std::abs(p.row(s).sum() - 1.0) > 1e-12)
        throw UsageError("TabularCmdp row P[" + std::to_string(s) + "," + std::to_string(a) +
                         ",:] does not sum to 1");
  }
  if (reward.rows() != n_states || reward.cols() != n_actions || cost.rows() != n_states ||
      cost.cols() != n_actions)
    throw UsageError("TabularCmdp reward/cost tables have the wrong shape");
  if ((cost.array() < 0.0).any()) throw UsageError("TabularCmdp costs must be non-negative");
  if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("TabularCmdp gamma must lie in (0, 1)");
  if (initial.size() != n_states || (initial.array() < 0.0).any() ||
      std::abs(initial.sum() - 1.0) > 1e-12)
    throw UsageError("TabularCmdp initial distribution is invalid");
  if (kappa < 0.0) throw UsageError("TabularCmdp kappa must be non-negative");
  if (static_cast<int>(terminal.size()) != n_states)
    throw UsageError("TabularCmdp terminal flags have the wrong length");
}

double TabularCmdp::max_reward() const { return reward.cwiseAbs().maxCoeff(); }
double TabularCmdp::max_cost() const { return cost.maxCoeff(); }

CategoricalPolicy CategoricalPolicy::uniform(int n_states, int n_actions) {
  return {MatD::Constant(n_states, n_actions, 1.0 / n_actions)};
}

CategoricalPolicy CategoricalPolicy::deterministic(const std::vector<int>& actions, int n_actions) {
  CategoricalPolicy p{MatD::Zero(static_cast<Eigen::Index>(actions.size()), n_actions)};
  for (std::size_t s = 0; s < actions.size(); ++s) p.probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  return p;
}

void CategoricalPolicy::validate(double tol) const {
  if ((probs.array() < 0.0).any()) throw UsageError("policy has negative probabilities");
  for (Eigen::Index s = 0; s < probs.rows(); ++s)
    if (std::abs(probs.row(s).sum() - 1.0) > tol)
      throw UsageError("policy row " + std::to_string(s) + " does not sum to 1");
}

namespace {

void check_policy(const TabularCmdp& m, const CategoricalPolicy& pol) {
  if (pol.probs.rows() != m.n_states || pol.probs.cols() != m.n_actions)
    throw UsageError("policy shape does not match the CMDP");
}

const MatD& signal_table(const TabularCmdp& m, Signal signal) {
  return signal == Signal::kReward ? m.reward : m.cost;
}

VecD policy_signal(const TabularCmdp& m, const CategoricalPolicy& pol, Signal signal) {
  return pol.probs.cwiseProduct(signal_table(m, signal)).rowwise().sum();
}

VecD solve_values(const TabularCmdp& m, const MatD& p_pi, const VecD& h) {
  const MatD a = MatD::Identity(m.n_states, m.n_states) - m.gamma * p_pi;
  Eigen::FullPivLU<MatD> lu(a);
  if (!lu.isInvertible()) throw Error("policy evaluation system is singular");
  return lu.solve(h);
}

}  // namespace

MatD policy_transitions(const TabularCmdp& m, const CategoricalPolicy& pol) {
  check_policy(m, pol);
  MatD p = MatD::Zero(m.n_states, m.n_states);
  for (int a = 0; a < m.n_actions; ++a)
    p += pol.probs.col(a).asDiagonal() * m.transitions[static_cast<std::size_t>(a)];
  return p;
}

VecD policy_eval(const TabularCmdp& m, const CategoricalPolicy& pol, Signal signal) {
  return solve_values(m, policy_transitions(m, pol), policy_signal(m, pol, signal));
}

double initial_value(const TabularCmdp& m, const VecD& values) { return m.initial.dot(values); }

MatD policy_q(const TabularCmdp& m, const CategoricalPolicy& pol, Signal signal) {
  const VecD v = policy_eval(m, pol, signal);
  MatD q = signal_table(m, signal);
  for (int a = 0; a < m.n_actions; ++a)
    q.col(a) += m.gamma * m.transitions[static_cast<std::size_t>(a)] * v;
  return q;
}

VecD policy_eval_iterative(const TabularCmdp& m, const CategoricalPolicy& pol, Signal signal,
                           double tol, int max_sweeps) {
  const MatD p = policy_transitions(m, pol);
  const VecD h = policy_signal(m, pol, signal);
  VecD v = VecD::Zero(m.n_states);
  for (int i = 0; i < max_sweeps; ++i) {
    VecD next = h + m.gamma * p * v;
    const double delta = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    if (delta < tol) break;
  }
  return v;
}

VecD stationary_distribution(const TabularCmdp& m, const CategoricalPolicy& pol) {
  const MatD p = policy_transitions(m, pol);
  const MatD a = MatD::Identity(m.n_states, m.n_states) - m.gamma * p.transpose();
  return Eigen::FullPivLU<MatD>(a).solve((1.0 - m.gamma) * m.initial);
}

MatD stationary_state_action(const TabularCmdp& m, const CategoricalPolicy& pol) {
  return stationary_distribution(m, pol).asDiagonal() * pol.probs;
}

std::vector<int> optimal_deterministic(const TabularCmdp& m, double reward_weight,
                                       double cost_weight) {
  const MatD h = reward_weight * m.reward - cost_weight * m.cost;
  std::vector<int> act(static_cast<std::size_t>(m.n_states), 0);
  // Policy iteration; a state switches only on a strict improvement so the
  // loop terminates and ties keep the lowest index reached first.
  for (int iter = 0; iter < 10000; ++iter) {
    const auto pol = CategoricalPolicy::deterministic(act, m.n_actions);
    const VecD hv = pol.probs.cwiseProduct(h).rowwise().sum();
    const VecD v = solve_values(m, policy_transitions(m, pol), hv);
    bool changed = false;
    for (int s = 0; s < m.n_states; ++s) {
      const auto cur = static_cast<std::size_t>(s);
      double best = -std::numeric_limits<double>::infinity();
      std::vector<double> q(static_cast<std::size_t>(m.n_actions));
      for (int a = 0; a < m.n_actions; ++a) {
        q[static_cast<std::size_t>(a)] =
            h(s, a) + m.gamma * m.transitions[static_cast<std::size_t>(a)].row(s).dot(v);
        best = std::max(best, q[static_cast<std::size_t>(a)]);
      }
      const double tol = 1e-11 * (1.0 + std::abs(best));
      if (q[static_cast<std::size_t>(act[cur])] >= best - tol) continue;
      for (int a = 0; a < m.n_actions; ++a)
        if (q[static_cast<std::size_t>(a)] >= best - tol) {
          act[cur] = a;
          changed = true;
          break;
        }
    }
    if (!changed) return act;
  }
  throw Error("policy iteration did not converge");
}

namespace {

struct Evaluated {
  double vr;
  double vc;
};

Evaluated evaluate_both(const TabularCmdp& m, const CategoricalPolicy& pol) {
  return {initial_value(m, policy_eval(m, pol, Signal::kReward)),
          initial_value(m, policy_eval(m, pol, Signal::kCost))};
}

CategoricalPolicy mix(const CategoricalPolicy& a, const CategoricalPolicy& b, double w) {
  return {w * a.probs + (1.0 - w) * b.probs};
}

}  // namespace

ConstrainedSolution constrained_optimal(const TabularCmdp& m) {
  m.validate();
  if (m.n_states > 30 || m.n_actions > 4)
    throw UsageError("constrained_optimal supports at most 30 states and 4 actions");
  constexpr double kFeasTol = 1e-9;
  const double kappa = m.kappa;

  auto solution = [&](const CategoricalPolicy& pol, double mu, double w) {
    const auto e = evaluate_both(m, pol);
    return ConstrainedSolution{pol, e.vr, e.vc, mu, w};
  };

  // Unconstrained optimum first.
  const auto free_pol = CategoricalPolicy::deterministic(optimal_deterministic(m, 1.0, 0.0), m.n_actions);
  if (evaluate_both(m, free_pol).vc <= kappa + kFeasTol) return solution(free_pol, 0.0, 0.0);

  // Cost-minimal policy decides feasibility.
  const auto safe_pol = CategoricalPolicy::deterministic(optimal_deterministic(m, 0.0, 1.0), m.n_actions);
  const auto safe_eval = evaluate_both(m, safe_pol);
  if (safe_eval.vc > kappa + kFeasTol)
    throw InfeasibleError("no policy satisfies the cost threshold: minimum V_c(rho0) = " +
                          std::to_string(safe_eval.vc) + " > kappa = " + std::to_string(kappa));

  // Bracket the multiplier at which the Lagrangian optimum becomes feasible.
  double mu_lo = 0.0;
  double mu_hi = 1.0;
  auto lagrangian = [&](double mu) {
    return CategoricalPolicy::deterministic(optimal_deterministic(m, 1.0, mu), m.n_actions);
  };
  CategoricalPolicy pol_lo = free_pol;
  CategoricalPolicy pol_hi = lagrangian(mu_hi);
  while (evaluate_both(m, pol_hi).vc > kappa + kFeasTol) {
    mu_lo = mu_hi;
    pol_lo = pol_hi;
    mu_hi *= 2.0;
    if (mu_hi > 1e12) return solution(safe_pol, mu_hi, 0.0);
    pol_hi = lagrangian(mu_hi);
  }
  for (int i = 0; i < 200 && mu_hi - mu_lo > 1e-13 * std::max(1.0, mu_hi); ++i) {
    const double mid = 0.5 * (mu_lo + mu_hi);
    auto pol = lagrangian(mid);
    if (evaluate_both(m, pol).vc > kappa + kFeasTol) {
      mu_lo = mid;
      pol_lo = std::move(pol);
    } else {
      mu_hi = mid;
      pol_hi = std::move(pol);
    }
  }

  // Mixture weight on the boundary: V_c(w) is continuous with V_c(0) <= kappa < V_c(1).
  double w_lo = 0.0;
  double w_hi = 1.0;
  for (int i = 0; i < 200 && w_hi - w_lo > 1e-15; ++i) {
    const double mid = 0.5 * (w_lo + w_hi);
    if (evaluate_both(m, mix(pol_lo, pol_hi, mid)).vc <= kappa) w_lo = mid;
    else w_hi = mid;
  }
  auto pure = solution(pol_hi, mu_hi, 0.0);
  auto mixed = solution(mix(pol_lo, pol_hi, w_lo), mu_hi, w_lo);
  return mixed.value_reward >= pure.value_reward ? mixed : pure;
}

double kl_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& p,
                      const Eigen::Ref<const Eigen::RowVectorXd>& q) {
  double kl = 0.0;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    if (p(a) <= 0.0) continue;
    if (q(a) <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p(a) * std::log(p(a) / q(a));
  }
  return std::max(kl, 0.0);
}

double tv_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& p,
                      const Eigen::Ref<const Eigen::RowVectorXd>& q) {
  return 0.5 * (p - q).cwiseAbs().sum();
}

Divergences policy_divergences(const CategoricalPolicy& p, const CategoricalPolicy& q,
                               const VecD& weighting) {
  if (p.probs.rows() != q.probs.rows() || p.probs.cols() != q.probs.cols() ||
      weighting.size() != p.probs.rows())
    throw UsageError("policy_divergences: shape mismatch");
  Divergences d;
  for (Eigen::Index s = 0; s < weighting.size(); ++s) {
    if (weighting(s) <= 0.0) continue;
    d.tv += weighting(s) * tv_categorical(p.probs.row(s), q.probs.row(s));
    const double kl = kl_categorical(p.probs.row(s), q.probs.row(s));
    d.kl = std::isinf(kl) ? kl : d.kl + weighting(s) * kl;
    if (std::isinf(d.kl)) {
      // keep accumulating TV; KL stays infinite
      for (Eigen::Index t = s + 1; t < weighting.size(); ++t)
        if (weighting(t) > 0.0) d.tv += weighting(t) * tv_categorical(p.probs.row(t), q.probs.row(t));
      return d;
    }
  }
  return d;
}

double sup_kl(const CategoricalPolicy& p, const CategoricalPolicy& q, const VecD& weighting) {
  double m = 0.0;
  for (Eigen::Index s = 0; s < weighting.size(); ++s)
    if (weighting(s) > 0.0) m = std::max(m, kl_categorical(p.probs.row(s), q.probs.row(s)));
  return m;
}

}  // namespace lspc::env
