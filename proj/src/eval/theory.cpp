#include "lspc/eval/theory.hpp"

#include <cmath>
#include <limits>

#include "lspc/core/error.hpp"

namespace lspc::eval {

using env::CategoricalPolicy;
using env::Signal;
using env::TabularCmdp;

bool TheoryReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return !checks.empty();
}

namespace {

nlohmann::json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

InequalityCheck make_check(std::string name, double lhs, double rhs, double tol) {
  InequalityCheck c{std::move(name), lhs, rhs, std::isinf(rhs) && rhs > 0, false};
  c.pass = c.vacuous || lhs <= rhs + tol;
  return c;
}

TheoryReport check(const TabularCmdp& m, const CategoricalPolicy& pi, const CategoricalPolicy& pi_s,
                   const CategoricalPolicy& ref, bool ref_is_optimum, double tol) {
  m.validate();
  pi.validate();
  pi_s.validate();
  ref.validate();
  if (pi.probs.rows() != m.n_states || pi.probs.cols() != m.n_actions || pi_s.probs.rows() != m.n_states ||
      pi_s.probs.cols() != m.n_actions)
    throw UsageError("policy shapes do not match the CMDP");

  TheoryReport r;
  r.gamma = m.gamma;
  r.kappa = m.kappa;
  r.r_max = m.max_reward();
  r.c_max = m.max_cost();
  r.tolerance = tol;
  r.reference_is_optimum = ref_is_optimum;

  const VecD d_ref = env::stationary_distribution(m, ref);
  const VecD d_pi = env::stationary_distribution(m, pi);
  const auto div1 = env::policy_divergences(pi, pi_s, d_ref);
  const auto div2 = env::policy_divergences(pi_s, ref, d_ref);
  const auto div = env::policy_divergences(pi, ref, d_ref);
  r.eps1 = div1.kl;
  r.eps2 = div2.kl;
  r.eps1_sup = env::sup_kl(pi, pi_s, d_ref);
  r.eps2_sup = env::sup_kl(pi_s, ref, d_ref);
  r.expected_tv = div.tv;
  r.expected_tv_1 = div1.tv;
  r.expected_tv_2 = div2.tv;
  r.stationary_tv = 0.5 * (d_pi - d_ref).cwiseAbs().sum();

  r.v_reward_pi = env::initial_value(m, env::policy_eval(m, pi, Signal::kReward));
  r.v_reward_ref = env::initial_value(m, env::policy_eval(m, ref, Signal::kReward));
  r.v_cost_pi = env::initial_value(m, env::policy_eval(m, pi, Signal::kCost));
  r.v_cost_ref = env::initial_value(m, env::policy_eval(m, ref, Signal::kCost));

  const double g = m.gamma;
  const double horizon2 = 1.0 / ((1.0 - g) * (1.0 - g));
  const double kl_term = std::sqrt(r.eps1 / 2.0) + std::sqrt(r.eps2 / 2.0);

  r.checks.push_back(make_check("stationary_tv", r.stationary_tv, g / (1.0 - g) * r.expected_tv, tol));
  r.checks.push_back(
      make_check("reward_gap_tv", std::abs(r.v_reward_ref - r.v_reward_pi), 2.0 * r.r_max * horizon2 * r.expected_tv, tol));
  r.checks.push_back(make_check("tv_chain", r.expected_tv, kl_term, tol));
  r.checks.push_back(make_check("performance_gap", r.v_reward_ref - r.v_reward_pi,
                                2.0 * r.r_max * horizon2 * kl_term, tol));
  const double violation = ref_is_optimum ? r.v_cost_pi - m.kappa : r.v_cost_pi - r.v_cost_ref;
  r.checks.push_back(make_check("constraint_violation", violation, 2.0 * r.c_max * horizon2 * kl_term, tol));
  return r;
}

}  // namespace

nlohmann::json TheoryReport::to_json() const {
  nlohmann::json j;
  j["gamma"] = gamma;
  j["kappa"] = number(kappa);
  j["r_max"] = r_max;
  j["c_max"] = c_max;
  j["eps1"] = number(eps1);
  j["eps2"] = number(eps2);
  j["eps1_sup"] = number(eps1_sup);
  j["eps2_sup"] = number(eps2_sup);
  j["expected_tv"] = expected_tv;
  j["expected_tv_pi_pis"] = expected_tv_1;
  j["expected_tv_pis_ref"] = expected_tv_2;
  j["stationary_tv"] = stationary_tv;
  j["v_reward_pi"] = v_reward_pi;
  j["v_reward_ref"] = v_reward_ref;
  j["v_cost_pi"] = v_cost_pi;
  j["v_cost_ref"] = v_cost_ref;
  j["reference"] = reference_is_optimum ? "constrained_optimum" : "given";
  j["tolerance"] = tolerance;
  auto& cs = j["checks"] = nlohmann::json::array();
  for (const auto& c : checks)
    cs.push_back({{"name", c.name}, {"lhs", number(c.lhs)}, {"rhs", number(c.rhs)}, {"vacuous", c.vacuous},
                  {"pass", c.pass}});
  j["all_pass"] = all_pass();
  return j;
}

TheoryReport theory_check(const TabularCmdp& m, const CategoricalPolicy& pi, const CategoricalPolicy& pi_s,
                          double tolerance) {
  const auto opt = env::constrained_optimal(m);
  return check(m, pi, pi_s, opt.policy, true, tolerance);
}

TheoryReport theory_check_against(const TabularCmdp& m, const CategoricalPolicy& pi, const CategoricalPolicy& pi_s,
                                  const CategoricalPolicy& reference, double tolerance) {
  return check(m, pi, pi_s, reference, false, tolerance);
}

CategoricalPolicy dirichlet_policy(int n_states, int n_actions, double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw UsageError("dirichlet alpha must be positive");
  CategoricalPolicy p;
  p.probs.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      // Marsaglia-Tsang gamma(alpha) sampler, boosted for alpha < 1.
      const double shape = alpha < 1.0 ? alpha + 1.0 : alpha;
      const double d = shape - 1.0 / 3.0;
      const double c = 1.0 / std::sqrt(9.0 * d);
      double x;
      while (true) {
        double z, v;
        do {
          z = rng.normal();
          v = 1.0 + c * z;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * z * z * z * z || std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) {
          x = d * v;
          break;
        }
      }
      if (alpha < 1.0) x *= std::pow(rng.uniform(), 1.0 / alpha);
      p.probs(s, a) = std::max(x, std::numeric_limits<double>::min());
    }
    p.probs.row(s) /= p.probs.row(s).sum();
  }
  return p;
}

template <typename T>
CategoricalPolicy discretize_policy(const policy::PolicyBundle<T>& pb, policy::PolicyKind kind,
                                    const env::GridHazard& grid, int n_action_samples, std::uint64_t seed) {
  if (n_action_samples < 1) throw UsageError("discretize_policy needs at least one sample per state");
  const int S = grid.model().n_states;
  const int A = grid.model().n_actions;
  CategoricalPolicy p;
  p.probs = MatD::Zero(S, A);
  const auto& box = grid.action_box();
  for (int s = 0; s < S; ++s) {
    Rng rng(derive_seed(seed, "discretize", static_cast<std::uint64_t>(s)));
    const int n = kind == policy::PolicyKind::kLspcO ? 1 : n_action_samples;
    const MatD actions = policy::act_many(pb, kind, grid.one_hot(s), n, box, rng);
    for (Eigen::Index j = 0; j < actions.cols(); ++j) p.probs(s, env::nearest_grid_action(actions.col(j))) += 1.0;
    p.probs.row(s) /= static_cast<double>(n);
  }
  return p;
}

template CategoricalPolicy discretize_policy<float>(const policy::PolicyBundle<float>&, policy::PolicyKind,
                                                    const env::GridHazard&, int, std::uint64_t);
template CategoricalPolicy discretize_policy<double>(const policy::PolicyBundle<double>&, policy::PolicyKind,
                                                     const env::GridHazard&, int, std::uint64_t);

}  // namespace lspc::eval
