#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lspc/env/grid_hazard.hpp"
#include "lspc/env/tabular.hpp"
#include "lspc/policy/lspc.hpp"

namespace lspc::eval {

struct InequalityCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool vacuous = false;  // rhs is +inf because a KL is infinite
  bool pass = false;
};

/// Divergence-bound verification of a policy pair against a reference policy
/// (the constrained optimum unless given explicitly).
struct TheoryReport {
  double gamma = 0.0;
  double kappa = 0.0;
  double r_max = 0.0;  // R_m
  double c_max = 0.0;  // C_m
  double eps1 = 0.0;   // E_{d*}[KL(pi || pi_s)]
  double eps2 = 0.0;   // E_{d*}[KL(pi_s || pi*)]
  double eps1_sup = 0.0;
  double eps2_sup = 0.0;
  double expected_tv = 0.0;      // E_{d*}[TV(pi, pi*)]
  double expected_tv_1 = 0.0;    // E_{d*}[TV(pi, pi_s)]
  double expected_tv_2 = 0.0;    // E_{d*}[TV(pi_s, pi*)]
  double stationary_tv = 0.0;    // TV(d^pi, d^pi*)
  double v_reward_pi = 0.0, v_reward_ref = 0.0;
  double v_cost_pi = 0.0, v_cost_ref = 0.0;
  bool reference_is_optimum = true;
  double tolerance = 1e-9;
  std::vector<InequalityCheck> checks;

  bool all_pass() const;
  nlohmann::json to_json() const;
};

/// Checks against the constrained optimum of `m` (InfeasibleError propagates).
TheoryReport theory_check(const env::TabularCmdp& m, const env::CategoricalPolicy& pi,
                          const env::CategoricalPolicy& pi_s, double tolerance = 1e-9);

/// Same inequalities with an arbitrary reference in place of the optimum. The
/// constraint check then bounds V_c(pi) - V_c(ref) instead of V_c(pi) - kappa.
TheoryReport theory_check_against(const env::TabularCmdp& m, const env::CategoricalPolicy& pi,
                                  const env::CategoricalPolicy& pi_s, const env::CategoricalPolicy& reference,
                                  double tolerance = 1e-9);

/// Row-wise Dirichlet(alpha) draw.
env::CategoricalPolicy dirichlet_policy(int n_states, int n_actions, double alpha, Rng& rng);

/// Empirical action frequencies of a trained agent on the grid: each state's
/// one-hot vector is fed to the policy `n_action_samples` times and every
/// action is mapped to its nearest grid move.
template <typename T>
env::CategoricalPolicy discretize_policy(const policy::PolicyBundle<T>& pb, policy::PolicyKind kind,
                                         const env::GridHazard& grid, int n_action_samples, std::uint64_t seed);

}  // namespace lspc::eval
