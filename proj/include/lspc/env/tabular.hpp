#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "lspc/core/real.hpp"

namespace lspc::env {

/// Finite constrained MDP. transitions[a](s, s') = P(s' | s, a).
struct TabularCmdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<MatD> transitions;  // one S x S row-stochastic matrix per action
  MatD reward;                    // S x A
  MatD cost;                      // S x A, entries in [0, C_m]
  double gamma = 0.99;
  double kappa = std::numeric_limits<double>::infinity();
  VecD initial;                   // rho_0
  std::vector<bool> terminal;     // absorbing states

  /// Throws UsageError unless every invariant holds (row sums within 1e-12,
  /// rho_0 a distribution, costs non-negative, gamma in (0, 1)).
  void validate() const;

  double max_reward() const;  // R_m = max |r|
  double max_cost() const;    // C_m = max c
};

/// Row-stochastic S x A action probabilities.
struct CategoricalPolicy {
  MatD probs;

  static CategoricalPolicy uniform(int n_states, int n_actions);
  static CategoricalPolicy deterministic(const std::vector<int>& actions, int n_actions);
  void validate(double tol = 1e-9) const;
};

enum class Signal { kReward, kCost };

/// State transition matrix under `pol`.
MatD policy_transitions(const TabularCmdp& m, const CategoricalPolicy& pol);

/// Exact V^pi from (I - gamma P_pi) V = h_pi.
VecD policy_eval(const TabularCmdp& m, const CategoricalPolicy& pol, Signal signal);

/// rho_0-weighted value.
double initial_value(const TabularCmdp& m, const VecD& values);

/// Q^pi(s, a) = h(s, a) + gamma * sum_s' P(s'|s,a) V^pi(s').
MatD policy_q(const TabularCmdp& m, const CategoricalPolicy& pol, Signal signal);

/// Value iteration reference for policy evaluation; stops when the sup-norm
/// change drops below `tol`.
VecD policy_eval_iterative(const TabularCmdp& m, const CategoricalPolicy& pol, Signal signal,
                           double tol = 1e-12, int max_sweeps = 1000000);

/// Discounted state visitation d(s) = (1 - gamma) sum_t gamma^t p(s_t = s),
/// solved from d = (1 - gamma) rho_0 + gamma P_pi^T d.
VecD stationary_distribution(const TabularCmdp& m, const CategoricalPolicy& pol);

/// d(s, a) = d(s) pi(a | s).
MatD stationary_state_action(const TabularCmdp& m, const CategoricalPolicy& pol);

/// Deterministic policy maximising sum_t gamma^t (w_r r - w_c c) from every
/// state, by policy iteration with ties broken toward the lowest action index.
std::vector<int> optimal_deterministic(const TabularCmdp& m, double reward_weight,
                                       double cost_weight);

/// Result of the constrained search.
struct ConstrainedSolution {
  CategoricalPolicy policy;
  double value_reward = 0.0;  // V_r(rho_0)
  double value_cost = 0.0;    // V_c(rho_0)
  double multiplier = 0.0;    // Lagrange multiplier at the switch point
  double mixture_weight = 0.0;  // weight of the infeasible vertex (0 = pure)
};

/// Reward-maximal policy subject to V_c(rho_0) <= kappa. Finds the two
/// deterministic Lagrangian vertices adjacent to the constraint boundary and
/// mixes them; the result satisfies V_c(rho_0) <= kappa + 1e-9. Throws
/// InfeasibleError when even the cost-minimal policy violates the threshold.
/// Requires S <= 30 and A <= 4.
ConstrainedSolution constrained_optimal(const TabularCmdp& m);

/// Expected KL(p || q) and TV(p, q) under a state weighting. KL is +inf when
/// p puts mass where q has none on a weighted state.
struct Divergences {
  double kl = 0.0;
  double tv = 0.0;
};

Divergences policy_divergences(const CategoricalPolicy& p, const CategoricalPolicy& q,
                               const VecD& weighting);

double kl_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& p,
                      const Eigen::Ref<const Eigen::RowVectorXd>& q);
double tv_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& p,
                      const Eigen::Ref<const Eigen::RowVectorXd>& q);

/// Largest per-state KL over states with positive weight.
double sup_kl(const CategoricalPolicy& p, const CategoricalPolicy& q, const VecD& weighting);

}  // namespace lspc::env
