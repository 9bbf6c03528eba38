#include <gtest/gtest.h>

#include <cmath>

#include "lspc/core/error.hpp"
#include "lspc/env/grid_hazard.hpp"
#include "lspc/env/point_hazard.hpp"
#include "lspc/env/tabular.hpp"

using namespace lspc;
using namespace lspc::env;

namespace {

TabularCmdp absorbing(double gamma) {
  TabularCmdp m;
  m.n_states = 1;
  m.n_actions = 1;
  m.transitions = {MatD::Ones(1, 1)};
  m.reward = MatD::Ones(1, 1);
  m.cost = MatD::Zero(1, 1);
  m.gamma = gamma;
  m.initial = VecD::Ones(1);
  m.terminal = {false};
  return m;
}

// Two states, two actions: action 1 earns more reward but costs.
TabularCmdp two_state() {
  TabularCmdp m;
  m.n_states = 2;
  m.n_actions = 2;
  MatD p0(2, 2), p1(2, 2);
  p0 << 0.9, 0.1, 0.5, 0.5;
  p1 << 0.2, 0.8, 0.1, 0.9;
  m.transitions = {p0, p1};
  m.reward = MatD(2, 2);
  m.reward << 0.0, 1.0, 0.2, 0.6;
  m.cost = MatD(2, 2);
  m.cost << 0.0, 1.0, 0.0, 0.5;
  m.gamma = 0.9;
  m.kappa = 2.0;
  m.initial = VecD(2);
  m.initial << 1.0, 0.0;
  m.terminal = {false, false};
  return m;
}

CategoricalPolicy random_policy(int s, int a, Rng& rng) {
  CategoricalPolicy p{MatD(s, a)};
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < a; ++j) p.probs(i, j) = rng.uniform(0.01, 1.0);
    p.probs.row(i) /= p.probs.row(i).sum();
  }
  return p;
}

}  // namespace

TEST(GridHazard, DeterministicWithoutSlip) {
  GridHazardSpec spec;
  spec.slip = 0.0;
  const auto m = grid_hazard(spec);
  for (const auto& p : m.transitions)
    for (int s = 0; s < m.n_states; ++s) {
      EXPECT_DOUBLE_EQ(p.row(s).maxCoeff(), 1.0);
      EXPECT_DOUBLE_EQ(p.row(s).sum(), 1.0);
    }
}

TEST(GridHazard, HazardCellsCost) {
  const GridHazardSpec spec;
  const auto m = grid_hazard(spec);
  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < 4; ++a) EXPECT_EQ(m.cost(s, a), spec.is_hazard(s) ? 1.0 : 0.0);
  EXPECT_TRUE(spec.is_hazard(spec.index({2, 2})));
}

TEST(GridHazard, RowStochastic) {
  const auto m = grid_hazard(GridHazardSpec{});
  EXPECT_NO_THROW(m.validate());
  for (const auto& p : m.transitions) EXPECT_LT((p.rowwise().sum() - VecD::Ones(m.n_states)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GridHazard, UnknownOverrideRejected) {
  EXPECT_THROW(make_environment("grid-hazard", {{"size", 3}}), UsageError);
  EXPECT_THROW(make_environment("maze"), UsageError);
}

TEST(GridHazard, OneHotRoundTrip) {
  GridHazard g;
  for (int s = 0; s < g.state_dim(); ++s) EXPECT_EQ(g.state_index(g.one_hot(s)), s);
  for (int a = 0; a < 4; ++a) EXPECT_EQ(nearest_grid_action(g.embedding(a)), a);
}

TEST(PolicyEval, ZeroRewardGivesZero) {
  auto m = grid_hazard(GridHazardSpec{});
  m.reward.setZero();
  const auto v = policy_eval(m, CategoricalPolicy::uniform(m.n_states, 4), Signal::kReward);
  EXPECT_EQ(v.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PolicyEval, AbsorbingGeometricSeries) {
  const auto m = absorbing(0.99);
  const auto v = policy_eval(m, CategoricalPolicy::uniform(1, 1), Signal::kReward);
  EXPECT_NEAR(v(0), 100.0, 1e-9);
}

TEST(PolicyEval, AgreesWithValueIteration) {
  const auto m = grid_hazard(GridHazardSpec{});
  Rng rng(2);
  const auto pol = random_policy(m.n_states, 4, rng);
  for (auto sig : {Signal::kReward, Signal::kCost}) {
    const VecD a = policy_eval(m, pol, sig), b = policy_eval_iterative(m, pol, sig);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(PolicyEval, MatchesMonteCarloOnGrid) {
  const auto m = grid_hazard(GridHazardSpec{});
  const auto pol = CategoricalPolicy::uniform(m.n_states, 4);
  const double exact_r = initial_value(m, policy_eval(m, pol, Signal::kReward));
  const double exact_c = initial_value(m, policy_eval(m, pol, Signal::kCost));
  Rng rng(11);
  const int episodes = 100000;
  double sr = 0, sr2 = 0, sc = 0, sc2 = 0;
  auto pick = [&](const auto& row) {
    double u = rng.uniform();
    for (Eigen::Index k = 0; k + 1 < row.size(); ++k) {
      if (u < row(k)) return static_cast<int>(k);
      u -= row(k);
    }
    return static_cast<int>(row.size() - 1);
  };
  for (int e = 0; e < episodes; ++e) {
    int s = pick(m.initial);
    double disc = 1.0, r = 0.0, c = 0.0;
    for (int t = 0; t < 3000 && !m.terminal[s]; ++t) {
      const int a = pick(pol.probs.row(s));
      r += disc * m.reward(s, a);
      c += disc * m.cost(s, a);
      s = pick(m.transitions[a].row(s));
      disc *= m.gamma;
    }
    sr += r, sr2 += r * r, sc += c, sc2 += c * c;
  }
  const double mr = sr / episodes, mc = sc / episodes;
  const double se_r = std::sqrt((sr2 / episodes - mr * mr) / episodes);
  const double se_c = std::sqrt((sc2 / episodes - mc * mc) / episodes);
  EXPECT_NEAR(mr, exact_r, 3 * se_r);
  EXPECT_NEAR(mc, exact_c, 3 * se_c);
}

TEST(Stationary, AbsorbingStateHoldsAllMass) {
  const auto m = absorbing(0.99);
  EXPECT_NEAR(stationary_distribution(m, CategoricalPolicy::uniform(1, 1))(0), 1.0, 1e-12);
}

TEST(Stationary, SmallDiscountStaysNearInitial) {
  auto m = grid_hazard(GridHazardSpec{});
  m.gamma = 0.01;
  const auto d = stationary_distribution(m, CategoricalPolicy::uniform(m.n_states, 4));
  EXPECT_LT((d - m.initial).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Stationary, NormalisedFixedPoint) {
  const auto m = grid_hazard(GridHazardSpec{});
  Rng rng(3);
  for (int k = 0; k < 5; ++k) {
    const auto pol = random_policy(m.n_states, 4, rng);
    const VecD d = stationary_distribution(m, pol);
    EXPECT_NEAR(d.sum(), 1.0, 1e-9);
    const VecD fixed = (1 - m.gamma) * m.initial + m.gamma * policy_transitions(m, pol).transpose() * d;
    EXPECT_LT((fixed - d).cwiseAbs().maxCoeff(), 1e-9);
    const MatD sa = stationary_state_action(m, pol);
    EXPECT_NEAR(sa(4, 1), d(4) * pol.probs(4, 1), 1e-15);
  }
}

TEST(ConstrainedOptimal, UnconstrainedMatchesValueIterationOptimum) {
  auto m = grid_hazard(GridHazardSpec{});
  m.kappa = std::numeric_limits<double>::infinity();
  const auto sol = constrained_optimal(m);
  const auto best = CategoricalPolicy::deterministic(optimal_deterministic(m, 1.0, 0.0), 4);
  EXPECT_NEAR(sol.value_reward, initial_value(m, policy_eval(m, best, Signal::kReward)), 1e-9);
}

TEST(ConstrainedOptimal, ZeroBudgetAvoidsHazards) {
  GridHazardSpec spec;
  spec.slip = 0.0;
  spec.kappa = 0.0;
  const auto m = grid_hazard(spec);
  const auto sol = constrained_optimal(m);
  EXPECT_LE(sol.value_cost, 1e-12);
  EXPECT_NEAR(initial_value(m, policy_eval(m, sol.policy, Signal::kCost)), 0.0, 1e-12);
  EXPECT_GT(sol.value_reward, 0.0);
}

TEST(ConstrainedOptimal, MatchesSimplexGridOnTwoStates) {
  const auto m = two_state();
  const auto sol = constrained_optimal(m);
  EXPECT_LE(sol.value_cost, m.kappa + 1e-9);
  double best = -INFINITY;
  const int k = 200;
  for (int i = 0; i <= k; ++i)
    for (int j = 0; j <= k; ++j) {
      CategoricalPolicy p{MatD(2, 2)};
      p.probs << 1.0 - i / double(k), i / double(k), 1.0 - j / double(k), j / double(k);
      if (initial_value(m, policy_eval(m, p, Signal::kCost)) > m.kappa) continue;
      best = std::max(best, initial_value(m, policy_eval(m, p, Signal::kReward)));
    }
  EXPECT_GE(sol.value_reward, best - 1e-9);
  EXPECT_NEAR(sol.value_reward, best, 1e-2);
}

TEST(ConstrainedOptimal, DominatesFeasibleDeterministicPolicies) {
  const auto m = two_state();
  const auto sol = constrained_optimal(m);
  for (int a0 = 0; a0 < 2; ++a0)
    for (int a1 = 0; a1 < 2; ++a1) {
      const auto p = CategoricalPolicy::deterministic({a0, a1}, 2);
      if (initial_value(m, policy_eval(m, p, Signal::kCost)) <= m.kappa)
        EXPECT_GE(sol.value_reward, initial_value(m, policy_eval(m, p, Signal::kReward)) - 1e-12);
    }
}

TEST(ConstrainedOptimal, InfeasibleBudget) {
  auto m = two_state();
  m.cost.setConstant(1.0);
  m.kappa = 1.0;
  EXPECT_THROW(constrained_optimal(m), InfeasibleError);
}

TEST(Divergences, IdenticalIsZero) {
  const auto p = CategoricalPolicy::uniform(3, 4);
  const auto d = policy_divergences(p, p, VecD::Constant(3, 1.0 / 3));
  EXPECT_EQ(d.kl, 0.0);
  EXPECT_EQ(d.tv, 0.0);
}

TEST(Divergences, ClosedForm) {
  CategoricalPolicy p{MatD(1, 2)}, q{MatD(1, 2)};
  p.probs << 1.0, 0.0;
  q.probs << 0.5, 0.5;
  const auto d = policy_divergences(p, q, VecD::Ones(1));
  EXPECT_DOUBLE_EQ(d.tv, 0.5);
  EXPECT_NEAR(d.kl, std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isinf(policy_divergences(q, p, VecD::Ones(1)).kl));
}

TEST(Divergences, Pinsker) {
  Rng rng(8);
  for (int k = 0; k < 1000; ++k) {
    const auto p = random_policy(1, 4, rng), q = random_policy(1, 4, rng);
    const auto d = policy_divergences(p, q, VecD::Ones(1));
    EXPECT_LE(d.tv, std::sqrt(d.kl / 2.0) + 1e-15);
  }
}

TEST(PointHazard, GoalTerminatesWithBonusOnce) {
  PointHazard env;
  Rng rng(0);
  VecD s(2), a(2);
  s << 0.9, 0.9;
  a << -0.1, -0.1;
  const auto st = env.step(s, a, rng);
  EXPECT_TRUE(st.done);
  EXPECT_GT(st.reward, env.spec().goal_bonus - 1.0);
}

TEST(PointHazard, HazardInteriorCosts) {
  PointHazard env;
  Rng rng(0);
  VecD s(2);
  s << 0.0, 0.25;
  EXPECT_EQ(env.step(s, VecD::Zero(2), rng).cost, 1.0);
}

TEST(PointHazard, DiagonalRolloutHitsHazard) {
  PointHazard env;
  Rng rng(0);
  VecD s(2), a(2);
  s << -0.8, -0.8;
  a << 0.2, 0.2;
  double cost = 0;
  for (int t = 0; t < env.horizon(); ++t) {
    const auto st = env.step(s, a, rng);
    cost += st.cost;
    s = st.next_state;
    if (st.done) break;
  }
  EXPECT_GE(cost, 1.0);
}

TEST(PointHazard, StaysInBoxAndCountsHazardVisits) {
  PointHazard env(PointHazardSpec::from_json({{"dynamics_noise", 0.05}}));
  Rng rng(4);
  for (int e = 0; e < 50; ++e) {
    VecD s = env.reset(rng);
    double cost = 0;
    int visits = 0;
    for (int t = 0; t < env.horizon(); ++t) {
      VecD a(2);
      a << rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3);
      const auto st = env.step(s, a, rng);
      EXPECT_LE(st.next_state.cwiseAbs().maxCoeff(), env.spec().box);
      cost += st.cost;
      visits += env.in_hazard(st.next_state) ? 1 : 0;
      s = st.next_state;
      if (st.done) break;
    }
    EXPECT_EQ(cost, visits);
  }
}

TEST(PointHazard, RejectsNonFiniteInput) {
  PointHazard env;
  Rng rng(0);
  VecD s(2);
  s << NAN, 0.0;
  EXPECT_THROW(env.step(s, VecD::Zero(2), rng), UsageError);
}

TEST(PointHazard, SpecRoundTrip) {
  const auto e = make_environment("point-hazard", {{"hazard_radius", 0.25}});
  const auto again = make_environment("point-hazard", e->spec_json());
  EXPECT_EQ(e->spec_json(), again->spec_json());
  EXPECT_EQ(e->spec_json()["hazard_radius"], 0.25);
}
