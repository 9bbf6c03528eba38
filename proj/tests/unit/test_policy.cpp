#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "lspc/core/error.hpp"
#include "lspc/critics/critics.hpp"
#include "lspc/env/point_hazard.hpp"
#include "lspc/nn/gaussian.hpp"
#include "lspc/policy/lspc.hpp"

using namespace lspc;
using namespace lspc::policy;

namespace {

struct Fixture {
  PolicyBundle<double> pb;
  critics::CriticSet<double> cs;
  data::Batch<double> batch;
  env::ActionBox box{VecD::Constant(2, -0.2), VecD::Constant(2, 0.2)};
};

Fixture make(PolicyParams p = {}, std::uint64_t seed = 0) {
  Rng rng(seed);
  Fixture f;
  p.latent_dim = 3;
  f.pb = PolicyBundle<double>::init(2, 2, p, 16, 2, rng);
  f.cs = critics::CriticSet<double>::init(2, 2, 16, 2, rng);
  const int n = 12;
  f.batch.states = MatD(2, n);
  f.batch.actions = MatD(2, n);
  f.batch.next_states = MatD(2, n);
  f.batch.rewards = RowVecD(n);
  f.batch.costs = RowVecD(n);
  f.batch.dones = RowVecD::Zero(n);
  for (int j = 0; j < n; ++j) {
    f.batch.indices.push_back(j);
    for (int i = 0; i < 2; ++i) {
      f.batch.states(i, j) = rng.uniform(-1, 1);
      f.batch.actions(i, j) = rng.uniform(-0.2, 0.2);
      f.batch.next_states(i, j) = rng.uniform(-1, 1);
    }
    f.batch.rewards(j) = rng.normal();
    f.batch.costs(j) = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  return f;
}

MatD noise(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

template <typename Net>
bool same_params(const Net& a, const Net& b) {
  for (std::size_t k = 0; k < a.layers().size(); ++k)
    if (a.layers()[k].weight != b.layers()[k].weight || a.layers()[k].bias != b.layers()[k].bias) return false;
  return true;
}

}  // namespace

TEST(CostWeight, Examples) {
  EXPECT_EQ(cost_awr_weight(3.7, 0.0, 200.0), 1.0);
  EXPECT_EQ(cost_awr_weight(-3.7, 0.0, 200.0), 1.0);
  EXPECT_DOUBLE_EQ(cost_awr_weight(-std::log(200.0) / 2.0, 2.0, 200.0), 200.0);
  EXPECT_EQ(cost_awr_weight(-5.0, 2.0, 200.0), 200.0);
  EXPECT_EQ(cost_awr_weight(-1.0, 2.0, 200.0, 0.02, 0.05, 0.0), 0.0);
  EXPECT_EQ(cost_awr_weight(-1.0, 2.0, 200.0, 0.02, 0.0, 0.03), 0.0);
  EXPECT_DOUBLE_EQ(cost_awr_weight(0.5, 2.0, 200.0, 0.02, 0.01, 0.01), std::exp(-1.0));
}

TEST(CostWeight, RangeAndClipBoundary) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.normal(0, 5), lam = rng.uniform(0, 3);
    const double w = cost_awr_weight(a, lam, 200.0);
    EXPECT_GE(w, 0.0);
    EXPECT_LE(w, 200.0);
    if (-a * lam < std::log(200.0) - 1e-9) {
      EXPECT_LT(w, 200.0);
    }
  }
}

TEST(RewardWeight, Examples) {
  EXPECT_EQ(reward_awr_weight(9.0, 0.0, 200.0), 1.0);
  EXPECT_DOUBLE_EQ(reward_awr_weight(0.5, 2.0, 200.0), std::exp(1.0));
  EXPECT_EQ(reward_awr_weight(10.0, 2.0, 200.0), 200.0);
}

TEST(CvaeLoss, ZeroWeightsGiveZero) {
  auto f = make();
  const auto l = cvae_loss(f.pb, RowVecD(RowVecD::Zero(12)), f.batch, noise(3, 12, 1));
  EXPECT_EQ(l.loss, 0.0);
  EXPECT_EQ(l.grad_enc.max_abs(), 0.0);
  EXPECT_EQ(l.grad_dec.max_abs(), 0.0);
}

TEST(CvaeLoss, LambdaZeroIsPlainElbo) {
  PolicyParams p;
  p.lambda = 0.0;
  auto f = make(p);
  const MatD eps = noise(3, 12, 2);
  const RowVecD w = cvae_weights(f.pb, f.cs, f.batch);
  EXPECT_EQ(w, RowVecD::Ones(12));
  const auto weighted = cvae_loss(f.pb, w, f.batch, eps);
  const auto plain = cvae_loss(f.pb, RowVecD(RowVecD::Ones(12)), f.batch, eps);
  EXPECT_EQ(weighted.loss, plain.loss);
  EXPECT_EQ(weighted.grad_dec.layers[0].weight, plain.grad_dec.layers[0].weight);

  // Direct negative ELBO.
  double ref = 0;
  for (int j = 0; j < 12; ++j) {
    const MatD sa = critics::state_action<double>(f.batch.states.col(j), f.batch.actions.col(j));
    const auto q = nn::DiagGaussian<double>::from_head(f.pb.cvae_enc.forward(sa).col(0));
    const VecD z = nn::gaussian_sample(q, VecD(eps.col(j)));
    const MatD sz = critics::state_action<double>(f.batch.states.col(j), z);
    const auto pa = nn::DiagGaussian<double>::from_head(f.pb.cvae_dec.forward(sz).col(0));
    ref += -(nn::gaussian_log_prob(pa, VecD(f.batch.actions.col(j))) - 0.5 * nn::kl_to_standard_normal(q));
  }
  EXPECT_NEAR(plain.loss, ref / 12.0, 1e-12);
}

TEST(CvaeLoss, CriticWeightsClipAndZero) {
  PolicyParams p;
  p.c_zero_thresh = -1e9;
  auto f = make(p);
  EXPECT_EQ(cvae_weights(f.pb, f.cs, f.batch), RowVecD::Zero(12));
}

TEST(EncoderLoss, ZetaZeroIsMeanNegativeLogProb) {
  PolicyParams p;
  p.zeta = 0.0;
  auto f = make(p);
  const RowVecD w = encoder_weights(f.pb, f.cs, f.batch);
  EXPECT_EQ(w, RowVecD::Ones(12));
  const MatD eps = noise(3, 12, 4);
  const auto l = encoder_loss(f.pb, w, f.batch, eps);
  double ref = 0;
  for (int j = 0; j < 12; ++j) {
    const auto m = nn::DiagGaussian<double>::from_head(f.pb.lat_enc.forward(f.batch.states.col(j)).col(0));
    const VecD z = p.epsilon * nn::gaussian_sample(m, VecD(eps.col(j))).array().tanh();
    const MatD sz = critics::state_action<double>(f.batch.states.col(j), z);
    const auto pa = nn::DiagGaussian<double>::from_head(f.pb.cvae_dec.forward(sz).col(0));
    ref -= nn::gaussian_log_prob(pa, VecD(f.batch.actions.col(j)));
  }
  EXPECT_NEAR(l.loss, ref / 12.0, 1e-12);
}

TEST(EncoderLoss, GradientOnlyForLatentEncoder) {
  auto f = make();
  const auto l = encoder_loss(f.pb, RowVecD(RowVecD::Ones(12)), f.batch, noise(3, 12, 5));
  EXPECT_EQ(l.grad.layers.size(), f.pb.lat_enc.layers().size());
  EXPECT_GT(l.grad.max_abs(), 0.0);
}

TEST(Acting, LatentContainment) {
  Rng rng(0);
  for (bool trunc : {false, true})
    for (double eps : {0.1, 0.25, 2.0}) {
      for (int k = 0; k < 2000; ++k) {
        const VecD z = restricted_latent(4, eps, trunc, rng);
        EXPECT_LE(z.cwiseAbs().maxCoeff(), eps);
      }
    }
  EXPECT_EQ(restricted_latent(3, 0.0, false, rng), VecD::Zero(3));
}

TEST(Acting, ZeroEpsilonIsDeterministicPriorMode) {
  PolicyParams p;
  p.epsilon = 0.0;
  auto f = make(p);
  VecD s(2);
  s << 0.1, -0.4;
  Rng a(1), b(2);
  const VecD x = act_lspc_s(f.pb, s, f.box, a);
  EXPECT_EQ(x, act_lspc_s(f.pb, s, f.box, b));
  const VecD mode = decode_actions<double>(f.pb, s, VecD::Zero(3), f.box).col(0);
  EXPECT_EQ(x, mode);
}

TEST(Acting, ZeroLatentHeadMatchesPriorMode) {
  auto f = make();
  for (auto& l : f.pb.lat_enc.layers()) {
    l.weight.setZero();
    l.bias.setZero();
  }
  VecD s(2);
  s << -0.3, 0.2;
  EXPECT_EQ(act_lspc_o(f.pb, s, f.box), VecD(decode_actions<double>(f.pb, s, VecD::Zero(3), f.box).col(0)));
}

TEST(Acting, SaturatedLatentStaysWithinEpsilon) {
  auto f = make();
  f.pb.lat_enc.layers().back().bias(0) = 1e6;
  VecD s(2);
  s << 0.0, 0.0;
  const MatD z = optimized_latents<double>(f.pb, s);
  EXPECT_NEAR(z(0, 0), f.pb.params.epsilon, 1e-12);
  EXPECT_LE(z.cwiseAbs().maxCoeff(), f.pb.params.epsilon);
}

TEST(Acting, InfiniteEpsilonMatchesCvae) {
  PolicyParams p;
  p.epsilon = std::numeric_limits<double>::infinity();
  auto f = make(p);
  VecD s(2);
  s << 0.5, 0.5;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng a(seed), b(seed);
    EXPECT_EQ(act_lspc_s(f.pb, s, f.box, a), act_cvae(f.pb, s, f.box, b));
  }
}

TEST(Acting, SeedsReproduceAndActionsClipped) {
  auto f = make();
  f.pb.cvae_dec.layers().back().bias.head(2).setConstant(5.0);
  VecD s(2);
  s << 0.2, 0.2;
  Rng a(4), b(4);
  const VecD x = act_cvae(f.pb, s, f.box, a);
  EXPECT_EQ(x, act_cvae(f.pb, s, f.box, b));
  EXPECT_TRUE(f.box.contains(x));
  EXPECT_DOUBLE_EQ(x(0), 0.2);
}

TEST(Acting, ActManyMatchesRepeatedAct) {
  auto f = make();
  VecD s(2);
  s << -0.1, 0.7;
  Rng a(6), b(6);
  const MatD many = act_many(f.pb, PolicyKind::kLspcS, s, 5, f.box, a);
  for (int j = 0; j < 5; ++j)
    EXPECT_LT((VecD(many.col(j)) - act(f.pb, PolicyKind::kLspcS, s, f.box, b)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Acting, WrongStateDimension) {
  auto f = make();
  Rng rng(0);
  EXPECT_THROW(act_cvae(f.pb, VecD::Zero(3), f.box, rng), UsageError);
}

TEST(ActionScan, RowCountsAndSources) {
  auto f = make();
  VecD s(2);
  s << 0.0, 0.1;
  Rng rng(0);
  EXPECT_EQ(action_scan(f.pb, f.cs, s, 0, f.box, rng).size(), 1u);
  const auto pts = action_scan(f.pb, f.cs, s, 7, f.box, rng);
  ASSERT_EQ(pts.size(), 15u);
  EXPECT_EQ(pts[0].source, "cvae");
  EXPECT_EQ(pts[7].source, "lspc_s");
  EXPECT_EQ(pts[14].source, "lspc_o");
  const RowVecD q = critics::reward_q<double>(f.cs, s, pts[14].action);
  EXPECT_EQ(pts[14].q, q(0));
}

TEST(PolicyKind, Names) {
  for (auto k : {PolicyKind::kLspcS, PolicyKind::kLspcO, PolicyKind::kCvae})
    EXPECT_EQ(parse_policy_kind(policy_kind_name(k)), k);
  EXPECT_THROW(parse_policy_kind("greedy"), UsageError);
}

TEST(Params, Validation) {
  PolicyParams p;
  p.epsilon = -0.1;
  EXPECT_THROW(p.validate(), UsageError);
  p = {};
  p.w_max = 0.0;
  EXPECT_THROW(p.validate(), UsageError);
}

TEST(EncoderLoss, StepLeavesDecoderAndCvaeEncoderBitwise) {
  auto f = make();
  const auto before = f.pb;
  Rng rng(3);
  const auto l = encoder_loss(f.pb, f.cs, f.batch, rng);
  auto opt = nn::AdamState<double>::for_net(f.pb.lat_enc);
  nn::adam_step(opt, f.pb.lat_enc, l.grad, 1e-2);
  EXPECT_TRUE(same_params(f.pb.cvae_dec, before.cvae_dec));
  EXPECT_TRUE(same_params(f.pb.cvae_enc, before.cvae_enc));
  EXPECT_FALSE(same_params(f.pb.lat_enc, before.lat_enc));
}
