#include "lspc/eval/gradsuite.hpp"

#include <algorithm>
#include <cmath>

#include "lspc/critics/critics.hpp"
#include "lspc/policy/lspc.hpp"

namespace lspc::eval {

using nn::GradCheckReport;
using nn::Mlp;

double GradSuiteReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.report.max_rel_error);
  return m;
}

bool GradSuiteReport::passed() const { return !entries.empty() && max_rel_error() < tolerance; }

nlohmann::json GradSuiteReport::to_json() const {
  nlohmann::json j;
  j["tolerance"] = tolerance;
  j["max_rel_error"] = max_rel_error();
  j["passed"] = passed();
  auto& rows = j["entries"] = nlohmann::json::array();
  for (const auto& e : entries)
    rows.push_back({{"loss", e.loss},
                    {"seed", e.seed},
                    {"max_rel_error", e.report.max_rel_error},
                    {"checked", e.report.checked},
                    {"skipped_points", e.report.skipped_points},
                    {"worst", e.report.worst}});
  return j;
}

namespace {

constexpr int kStateDim = 2;
constexpr int kActionDim = 2;
constexpr int kWidth = 8;
constexpr int kBatch = 8;

data::Batch<double> random_batch(Rng& rng, int n) {
  data::Batch<double> b;
  b.states = MatD(kStateDim, n);
  b.actions = MatD(kActionDim, n);
  b.next_states = MatD(kStateDim, n);
  b.rewards.resize(n);
  b.costs.resize(n);
  b.dones.resize(n);
  for (Eigen::Index i = 0; i < b.states.size(); ++i) b.states(i) = rng.normal();
  for (Eigen::Index i = 0; i < b.actions.size(); ++i) b.actions(i) = rng.uniform(-1.0, 1.0);
  for (Eigen::Index i = 0; i < b.next_states.size(); ++i) b.next_states(i) = rng.normal();
  for (int j = 0; j < n; ++j) {
    b.rewards(j) = rng.normal();
    b.costs(j) = rng.uniform() < 0.5 ? 1.0 : 0.0;
    b.dones(j) = rng.uniform() < 0.2 ? 1.0 : 0.0;
    b.indices.push_back(static_cast<std::size_t>(j));
  }
  return b;
}

data::Batch<double> keep_columns(const data::Batch<double>& b, const std::vector<Eigen::Index>& keep) {
  data::Batch<double> out;
  const auto n = static_cast<Eigen::Index>(keep.size());
  out.states = MatD(b.states.rows(), n);
  out.actions = MatD(b.actions.rows(), n);
  out.next_states = MatD(b.next_states.rows(), n);
  out.rewards.resize(n);
  out.costs.resize(n);
  out.dones.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto c = keep[static_cast<std::size_t>(j)];
    out.states.col(j) = b.states.col(c);
    out.actions.col(j) = b.actions.col(c);
    out.next_states.col(j) = b.next_states.col(c);
    out.rewards(j) = b.rewards(c);
    out.costs(j) = b.costs(c);
    out.dones(j) = b.dones(c);
    out.indices.push_back(b.indices[static_cast<std::size_t>(c)]);
  }
  return out;
}

/// Drops samples whose expectile residual sits within the kink margin.
std::size_t filter_kinks(data::Batch<double>& b, const RowVecD& residual) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < residual.size(); ++j)
    if (std::abs(residual(j)) > nn::kKinkMargin) keep.push_back(j);
  const std::size_t skipped = static_cast<std::size_t>(residual.size()) - keep.size();
  if (skipped) b = keep_columns(b, keep);
  return skipped;
}

}  // namespace

GradSuiteReport gradient_suite(int n_seeds, std::uint64_t base_seed, double tolerance) {
  GradSuiteReport suite;
  suite.tolerance = tolerance;
  for (int k = 0; k < n_seeds; ++k) {
    const std::uint64_t seed = derive_seed(base_seed, "gradcheck", static_cast<std::uint64_t>(k));
    auto add = [&](const std::string& name, GradCheckReport r) { suite.entries.push_back({name, seed, std::move(r)}); };

    // Network-level losses on 2-8-2 nets.
    {
      Rng rng(derive_seed(seed, "nets"));
      const auto lin = Mlp<double>::glorot({2, 8, 2}, nn::Activation::kRelu, nn::Head::kLinear, rng);
      const auto gauss = Mlp<double>::glorot({2, 8, 4}, nn::Activation::kTanh, nn::Head::kGaussian, rng);
      add("mse", nn::grad_check(lin, nn::LossKind::kMse, seed));
      add("expectile", nn::grad_check(lin, nn::LossKind::kExpectile, seed, kBatch, 0.25));
      add("gaussian_nll", nn::grad_check(gauss, nn::LossKind::kGaussianNll, seed));
      add("kl_standard_normal", nn::grad_check(gauss, nn::LossKind::kKlStandardNormal, seed));
      add("zero", nn::grad_check(lin, nn::LossKind::kZero, seed));
    }

    Rng rng(derive_seed(seed, "critics"));
    auto cs = critics::CriticSet<double>::init(kStateDim, kActionDim, kWidth, 2, rng);
    // Distinct targets so min/max selection is exercised.
    cs.q1_target = Mlp<double>::glorot(cs.q1.sizes(), nn::Activation::kRelu, nn::Head::kLinear, rng);
    cs.qc2_target = Mlp<double>::glorot(cs.qc2.sizes(), nn::Activation::kRelu, nn::Head::kLinear, rng);
    Rng data_rng(derive_seed(seed, "batch"));
    const auto batch = random_batch(data_rng, kBatch);

    {
      auto b = batch;
      const MatD x = critics::state_action(b.states, b.actions);
      const RowVecD u = RowVecD(cs.q1_target.forward(x).cwiseMin(cs.q2_target.forward(x))) -
                        RowVecD(cs.v.forward(b.states));
      const std::size_t skipped = filter_kinks(b, u);
      const auto l = critics::reward_value_loss(cs, b);
      auto r = nn::compare_gradients(cs.v, l.grad, [&] { return critics::reward_value_loss(cs, b).loss; }, "v");
      r.skipped_points = skipped;
      add("reward_value", r);
    }
    {
      const auto l = critics::reward_q_loss(cs, batch);
      auto r = nn::compare_gradients(cs.q1, l.grad1, [&] { return critics::reward_q_loss(cs, batch).loss; }, "q1");
      r.merge(nn::compare_gradients(cs.q2, l.grad2, [&] { return critics::reward_q_loss(cs, batch).loss; }, "q2"));
      add("reward_q", r);
    }
    {
      auto b = batch;
      const MatD x = critics::state_action(b.states, b.actions);
      const RowVecD u = RowVecD(cs.vc.forward(b.states)) -
                        RowVecD(cs.qc1_target.forward(x).cwiseMax(cs.qc2_target.forward(x)));
      const std::size_t skipped = filter_kinks(b, u);
      const auto l = critics::cost_value_loss(cs, b);
      auto r = nn::compare_gradients(cs.vc, l.grad, [&] { return critics::cost_value_loss(cs, b).loss; }, "vc");
      r.skipped_points = skipped;
      add("cost_value", r);
    }
    {
      const auto l = critics::cost_q_loss(cs, batch);
      auto r = nn::compare_gradients(cs.qc1, l.grad1, [&] { return critics::cost_q_loss(cs, batch).loss; }, "qc1");
      r.merge(nn::compare_gradients(cs.qc2, l.grad2, [&] { return critics::cost_q_loss(cs, batch).loss; }, "qc2"));
      add("cost_q", r);
    }

    policy::PolicyParams params;
    params.latent_dim = 2;
    params.epsilon = 0.7;
    params.lambda = 0.5;  // moderate weights keep the loss well scaled
    params.zeta = 0.5;
    Rng prng(derive_seed(seed, "policy"));
    auto pb = policy::PolicyBundle<double>::init(kStateDim, kActionDim, params, kWidth, 2, prng);
    Rng noise_rng(derive_seed(seed, "noise"));
    MatD noise(params.latent_dim, kBatch);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = noise_rng.normal();
    {
      const RowVecD w = policy::cvae_weights(pb, cs, batch);
      const auto l = policy::cvae_loss(pb, w, batch, noise);
      auto loss = [&] { return policy::cvae_loss(pb, w, batch, noise).loss; };
      auto r = nn::compare_gradients(pb.cvae_enc, l.grad_enc, loss, "cvae_enc");
      r.merge(nn::compare_gradients(pb.cvae_dec, l.grad_dec, loss, "cvae_dec"));
      add("cvae", r);
    }
    {
      const RowVecD w = policy::encoder_weights(pb, cs, batch);
      const auto l = policy::encoder_loss(pb, w, batch, noise);
      auto r = nn::compare_gradients(pb.lat_enc, l.grad,
                                     [&] { return policy::encoder_loss(pb, w, batch, noise).loss; }, "lat_enc");
      add("encoder", r);
    }
  }
  return suite;
}

}  // namespace lspc::eval
