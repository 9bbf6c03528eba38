#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "lspc/nn/adam.hpp"
#include "lspc/nn/expectile.hpp"
#include "lspc/nn/gaussian.hpp"
#include "lspc/nn/gradcheck.hpp"
#include "lspc/nn/mlp.hpp"

using namespace lspc;
using namespace lspc::nn;

TEST(Mlp, IdentityLinearLayer) {
  Mlp<double> net({2, 2}, Activation::kRelu, Head::kLinear);
  net.layers()[0].weight = MatD::Identity(2, 2);
  VecD x(2);
  x << 1, 2;
  EXPECT_EQ(net.apply(x), x);
}

TEST(Mlp, ReluKillLeavesLastBias) {
  Mlp<double> net({2, 3, 1}, Activation::kRelu, Head::kLinear);
  net.layers()[0].weight.setConstant(-1.0);
  net.layers()[1].weight.setConstant(5.0);
  net.layers()[1].bias << 0.75;
  VecD x(2);
  x << 1, 2;
  EXPECT_DOUBLE_EQ(net.apply(x)(0), 0.75);
}

TEST(Mlp, MatchesStraightLineReimplementation) {
  Rng rng(3);
  auto net = Mlp<double>::glorot({2, 16, 1}, Activation::kTanh, Head::kLinear, rng);
  for (auto& l : net.layers())
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = rng.normal();
  VecD x(2);
  x << 0.3, -1.2;
  const auto& L = net.layers();
  double out = L[1].bias(0);
  for (int j = 0; j < 16; ++j) {
    double h = L[0].bias(j);
    for (int i = 0; i < 2; ++i) h += L[0].weight(j, i) * x(i);
    out += L[1].weight(0, j) * std::tanh(h);
  }
  EXPECT_NEAR(net.apply(x)(0), out, 1e-12);
}

TEST(Mlp, DimensionMismatchRejected) {
  Mlp<double> net({3, 2}, Activation::kRelu, Head::kLinear);
  EXPECT_THROW(net.forward(MatD::Zero(2, 1)), UsageError);
}

TEST(Mlp, GaussianHeadClampsLogStd) {
  Mlp<double> net({1, 2}, Activation::kRelu, Head::kGaussian);
  net.layers()[0].bias << 0.5, 9.0;
  const VecD y = net.apply(VecD::Zero(1));
  EXPECT_DOUBLE_EQ(y(0), 0.5);
  EXPECT_DOUBLE_EQ(y(1), kLogStdMax);
  net.layers()[0].bias(1) = -9.0;
  EXPECT_DOUBLE_EQ(net.apply(VecD::Zero(1))(1), kLogStdMin);
}

TEST(MlpBackward, LinearLayerGradients) {
  Mlp<double> net({2, 3}, Activation::kRelu, Head::kLinear);
  Rng rng(1);
  for (Eigen::Index i = 0; i < net.layers()[0].weight.size(); ++i) net.layers()[0].weight(i) = rng.normal();
  MatD x(2, 1);
  x << 0.5, -2.0;
  ForwardCache<double> cache;
  net.forward(x, &cache);
  auto g = net.zero_grad();
  net.backward(cache, MatD::Ones(3, 1), &g);
  EXPECT_EQ(g.layers[0].bias, VecD::Ones(3));
  EXPECT_EQ(g.layers[0].weight, (VecD::Ones(3) * x.transpose()).eval());
}

TEST(MlpBackward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(2);
  auto net = Mlp<double>::glorot({3, 8, 2}, Activation::kRelu, Head::kLinear, rng);
  ForwardCache<double> cache;
  net.forward(MatD::Random(3, 4), &cache);
  auto g = net.zero_grad();
  net.backward(cache, MatD::Zero(2, 4), &g);
  EXPECT_EQ(g.max_abs(), 0.0);
}

TEST(MlpBackward, MissingCacheIsUsageError) {
  Mlp<double> net({2, 2}, Activation::kRelu, Head::kLinear);
  ForwardCache<double> cache;
  auto g = net.zero_grad();
  EXPECT_THROW(net.backward(cache, MatD::Zero(2, 1), &g), UsageError);
}

TEST(GradCheck, EveryLossMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const auto lin = Mlp<double>::glorot({2, 8, 2}, Activation::kTanh, Head::kLinear, rng);
    const auto gauss = Mlp<double>::glorot({2, 8, 4}, Activation::kTanh, Head::kGaussian, rng);
    EXPECT_LT(grad_check(lin, LossKind::kMse, seed).max_rel_error, 1e-4);
    EXPECT_LT(grad_check(lin, LossKind::kExpectile, seed).max_rel_error, 1e-4);
    EXPECT_LT(grad_check(gauss, LossKind::kGaussianNll, seed).max_rel_error, 1e-4);
    EXPECT_LT(grad_check(gauss, LossKind::kKlStandardNormal, seed).max_rel_error, 1e-4);
  }
}

TEST(GradCheck, ZeroLossReportsZero) {
  Rng rng(0);
  const auto net = Mlp<double>::glorot({2, 8, 2}, Activation::kRelu, Head::kLinear, rng);
  const auto r = grad_check(net, LossKind::kZero, 1);
  EXPECT_EQ(r.max_rel_error, 0.0);
}

TEST(GradCheck, KinkPointsAreSkipped) {
  Rng rng(0);
  const auto net = Mlp<double>::glorot({2, 8, 2}, Activation::kRelu, Head::kLinear, rng);
  const auto r = grad_check(net, LossKind::kExpectile, 4, 8, 0.25);
  EXPECT_GE(r.skipped_points, 2u);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Rng rng(0);
  auto net = Mlp<double>::glorot({2, 4, 1}, Activation::kRelu, Head::kLinear, rng);
  const auto before = net;
  auto st = AdamState<double>::for_net(net);
  adam_step(st, net, net.zero_grad(), 0.1);
  EXPECT_EQ(net.layers()[0].weight, before.layers()[0].weight);
  EXPECT_EQ(st.t, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Mlp<double> net({1, 1}, Activation::kRelu, Head::kLinear);
  auto st = AdamState<double>::for_net(net);
  auto g = net.zero_grad();
  g.layers[0].weight(0, 0) = 1.0;
  adam_step(st, net, g, 0.1);
  EXPECT_NEAR(net.layers()[0].weight(0, 0), -0.1, 1e-8);
}

TEST(Adam, ScalarDescentOnSquare) {
  Mlp<double> net({1, 1}, Activation::kRelu, Head::kLinear);
  net.layers()[0].weight(0, 0) = 1.0;
  auto st = AdamState<double>::for_net(net);
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    auto g = net.zero_grad();
    g.layers[0].weight(0, 0) = 2.0 * net.layers()[0].weight(0, 0);
    adam_step(st, net, g, 3e-4);
    const double w = std::abs(net.layers()[0].weight(0, 0));
    EXPECT_LT(w, prev);
    prev = w;
  }
}

TEST(Adam, NonFiniteGradientNamesTensor) {
  Mlp<double> net({1, 1}, Activation::kRelu, Head::kLinear);
  auto st = AdamState<double>::for_net(net);
  auto g = net.zero_grad();
  g.layers[0].bias(0) = NAN;
  try {
    adam_step(st, net, g, 0.1, "q1");
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("q1.L0.b"), std::string::npos);
  }
  EXPECT_EQ(st.t, 0);
}

TEST(Expectile, Formula) {
  EXPECT_DOUBLE_EQ(expectile_loss(2.0, 0.7), 2.8);
  EXPECT_DOUBLE_EQ(expectile_loss(-2.0, 0.7), 1.2);
  EXPECT_DOUBLE_EQ(expectile_loss(1.5, 0.5), 1.125);
}

TEST(Expectile, Symmetries) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.normal(0, 3), xi = rng.uniform();
    EXPECT_NEAR(expectile_loss(u, xi) + expectile_loss(u, 1.0 - xi), u * u, 1e-12);
    EXPECT_DOUBLE_EQ(expectile_loss(u, xi), expectile_loss(-u, 1.0 - xi));
  }
}

TEST(Expectile, MinimizerMatchesGridSearch) {
  Rng rng(4);
  std::vector<double> u(200);
  for (auto& x : u) x = rng.normal();
  for (double xi : {0.5, 0.7, 0.9}) {
    const double v = expectile_of(u, xi);
    double best = 0, best_loss = INFINITY;
    for (double c = -3; c <= 3; c += 1e-3) {
      double l = 0;
      for (double x : u) l += expectile_loss(x - c, xi);
      if (l < best_loss) best_loss = l, best = c;
    }
    EXPECT_NEAR(v, best, 1e-3);
  }
  EXPECT_NEAR(expectile_of(u, 0.5), std::accumulate(u.begin(), u.end(), 0.0) / 200.0, 1e-12);
}

TEST(Gaussian, KlClosedForm) {
  DiagGaussian<double> g{VecD::Zero(1), VecD::Zero(1)};
  EXPECT_EQ(kl_to_standard_normal(g), 0.0);
  g.mean(0) = 1.0;
  EXPECT_DOUBLE_EQ(kl_to_standard_normal(g), 0.5);
}

TEST(Gaussian, KlMatchesMonteCarlo) {
  Rng rng(5);
  DiagGaussian<double> g{VecD(8), VecD(8)};
  for (int i = 0; i < 8; ++i) {
    g.mean(i) = rng.normal(0, 0.5);
    g.log_std(i) = rng.uniform(-0.5, 0.3);
  }
  const DiagGaussian<double> prior{VecD::Zero(8), VecD::Zero(8)};
  const int n = 200000;
  double sum = 0, sq = 0;
  VecD noise(8);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < 8; ++i) noise(i) = rng.normal();
    const VecD z = gaussian_sample(g, noise);
    const double d = gaussian_log_prob(g, z) - gaussian_log_prob(prior, z);
    sum += d;
    sq += d * d;
  }
  const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_NEAR(mean, kl_to_standard_normal(g), 3 * se);
}

TEST(Gaussian, SampleIdentities) {
  VecD mu(2), n(2);
  mu << 1, -2;
  n << 0.3, 0.7;
  EXPECT_EQ(gaussian_sample(DiagGaussian<double>{mu, VecD::Zero(2)}, VecD(VecD::Zero(2))), mu);
  EXPECT_EQ(gaussian_sample(DiagGaussian<double>{VecD::Zero(2), VecD::Zero(2)}, n), n);
}

TEST(Gaussian, SampleGradientWrtLogStd) {
  VecD mu = VecD::Zero(3), ls(3), n(3);
  ls << -0.2, 0.1, 0.4;
  n << 0.5, -1.0, 2.0;
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i) {
    VecD up = ls, dn = ls;
    up(i) += h;
    dn(i) -= h;
    const double fd = (gaussian_sample(DiagGaussian<double>{mu, up}, n)(i) -
                       gaussian_sample(DiagGaussian<double>{mu, dn}, n)(i)) /
                      (2 * h);
    EXPECT_NEAR(fd, std::exp(ls(i)) * n(i), 1e-8);
  }
}

TEST(Gaussian, LogProb) {
  DiagGaussian<double> g{VecD::Zero(1), VecD::Zero(1)};
  EXPECT_NEAR(gaussian_log_prob(g, VecD(VecD::Zero(1))), -0.9189385, 1e-7);
  EXPECT_NEAR(gaussian_log_prob(g, VecD(VecD::Ones(1))), -1.4189385, 1e-7);
  Rng rng(2);
  DiagGaussian<double> h{VecD(4), VecD(4)};
  VecD x(4);
  double sum = 0;
  for (int i = 0; i < 4; ++i) {
    h.mean(i) = rng.normal();
    h.log_std(i) = rng.uniform(-1, 1);
    x(i) = rng.normal();
    sum += gaussian_log_prob(DiagGaussian<double>{h.mean.segment(i, 1), h.log_std.segment(i, 1)}, VecD(x.segment(i, 1)));
  }
  EXPECT_NEAR(gaussian_log_prob(h, x), sum, 1e-12);
}

TEST(SoftUpdate, Rates) {
  Mlp<double> target({1, 1}, Activation::kRelu, Head::kLinear), online = target;
  online.layers()[0].weight(0, 0) = 2.0;
  auto t = target;
  soft_update(t, online, 0.0);
  EXPECT_EQ(t.layers()[0].weight(0, 0), 0.0);
  soft_update(t, online, 0.5);
  EXPECT_EQ(t.layers()[0].weight(0, 0), 1.0);
  soft_update(t, online, 1.0);
  EXPECT_EQ(t.layers()[0].weight, online.layers()[0].weight);
  Mlp<double> other({2, 1}, Activation::kRelu, Head::kLinear);
  EXPECT_THROW(soft_update(other, online, 0.5), UsageError);
}

TEST(Rng, StreamsAreIndependentOfConsumers) {
  Rng a(derive_seed(1, "batch", 3)), b(derive_seed(1, "batch", 3));
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(derive_seed(1, "batch", 3), derive_seed(1, "batch", 4));
  EXPECT_NE(derive_seed(1, "batch", 3), derive_seed(1, "cvae", 3));
}
