#include "lspc/trainer/trainer.hpp"

#include <cmath>
#include <string>

#include "lspc/core/error.hpp"

namespace lspc::trainer {

PolicyOptimizers PolicyOptimizers::for_bundle(const Bundle& pb) {
  using A = nn::AdamState<Real>;
  return {A::for_net(pb.cvae_enc), A::for_net(pb.cvae_dec), A::for_net(pb.lat_enc)};
}

nlohmann::json LogRecord::to_json() const {
  nlohmann::json j;
  j["step"] = step;
  j["reward_value_loss"] = reward_value;
  j["reward_q_loss"] = reward_q;
  j["cost_value_loss"] = cost_value;
  j["cost_q_loss"] = cost_q;
  j["cvae_loss"] = cvae;
  j["encoder_loss"] = encoder;
  j["mean_cost_weight"] = mean_cost_weight;
  j["mean_reward_weight"] = mean_reward_weight;
  if (!eval.is_null()) j["eval"] = eval;
  return j;
}

std::string TrainLog::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    out += r.to_json().dump();
    out.push_back('\n');
  }
  return out;
}

TrainState initial_state(const TrainConfig& cfg, int state_dim, int action_dim) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "init"));
  TrainState s;
  s.critics = Critics::init(state_dim, action_dim, cfg.width, cfg.depth, rng);
  s.critics.xi = cfg.xi;
  s.critics.gamma = cfg.gamma;
  s.critics.tau = cfg.tau;
  s.critics.validate(cfg.ablation);
  s.bundle = Bundle::init(state_dim, action_dim, cfg.policy_params(), cfg.width, cfg.depth, rng);
  s.critic_opt = critics::CriticOptimizers<Real>::for_critics(s.critics);
  s.policy_opt = PolicyOptimizers::for_bundle(s.bundle);
  return s;
}

namespace {

void check_loss(double v, const char* name, std::int64_t step) {
  if (!std::isfinite(v))
    throw NumericError("non-finite " + std::string(name) + " at step " + std::to_string(step));
}

}  // namespace

namespace {

/// Shared loop: `members` are extra states whose latent encoders train on the
/// main state's critics and decoder.
TrainLog run(const TrainConfig& cfg, const data::OfflineDataset& ds, TrainState& state,
             std::vector<TrainState*> members, const TrainOptions& options) {
  cfg.validate();
  if (ds.n == 0) throw UsageError("cannot train on an empty dataset");
  if (state.critics.state_dim() != ds.state_dim || state.critics.action_dim() != ds.action_dim)
    throw UsageError("dataset dimensions do not match the networks");
  auto notify = [&](std::string_view n) {
    if (options.observer) options.observer(n);
  };

  TrainLog log;
  auto& cs = state.critics;
  auto& pb = state.bundle;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (std::int64_t t = state.step; t < cfg.steps; ++t) {
    const auto ut = static_cast<std::uint64_t>(t);
    Rng batch_rng(derive_seed(cfg.seed, "batch", ut));
    const auto batch = data::sample_batch<Real>(ds, bs, batch_rng);

    LogRecord rec;
    rec.step = t + 1;
    const double lr = cfg.lr;
    try {
      const auto cl = critics::critic_step(cs, state.critic_opt, batch, lr, options.observer);
      rec.reward_value = cl.reward_value;
      rec.reward_q = cl.reward_q;
      rec.cost_value = cl.cost_value;
      rec.cost_q = cl.cost_q;

      if (t >= cfg.critic_warmup_steps) {
        Rng cvae_rng(derive_seed(cfg.seed, "cvae", ut));
        const auto l = policy::cvae_loss(pb, cs, batch, cvae_rng);
        nn::adam_step(state.policy_opt.cvae_enc, pb.cvae_enc, l.grad_enc, lr, "cvae_enc");
        nn::adam_step(state.policy_opt.cvae_dec, pb.cvae_dec, l.grad_dec, lr, "cvae_dec");
        rec.cvae = static_cast<double>(l.loss);
        rec.mean_cost_weight = l.mean_weight;
        notify("cvae");

        const RowVec<Real> w = policy::encoder_weights(pb, cs, batch);
        Rng enc_rng(derive_seed(cfg.seed, "enc", ut));
        Mat<Real> noise(pb.latent_dim(), batch.size());
        for (Eigen::Index j = 0; j < noise.cols(); ++j)
          for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, j) = static_cast<Real>(enc_rng.normal());
        const auto e = policy::encoder_loss(pb, w, batch, noise);
        nn::adam_step(state.policy_opt.lat_enc, pb.lat_enc, e.grad, lr, "lat_enc");
        rec.encoder = static_cast<double>(e.loss);
        rec.mean_reward_weight = e.mean_weight;
        for (TrainState* m : members) {
          const Bundle view{{}, pb.cvae_dec, m->bundle.lat_enc, m->bundle.params};
          const auto me = policy::encoder_loss(view, w, batch, noise);
          nn::adam_step(m->policy_opt.lat_enc, m->bundle.lat_enc, me.grad, lr, "lat_enc");
        }
        notify("lat_enc");
      }
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(t));
    }
    critics::soft_update_targets(cs);
    notify("targets");
    state.step = t + 1;

    check_loss(rec.reward_value, "reward value loss", t);
    check_loss(rec.reward_q, "reward q loss", t);
    check_loss(rec.cost_value, "cost value loss", t);
    check_loss(rec.cost_q, "cost q loss", t);
    check_loss(rec.cvae, "cvae loss", t);
    check_loss(rec.encoder, "encoder loss", t);

    if (cfg.eval_every > 0 && state.step % cfg.eval_every == 0) {
      if (options.evaluator) rec.eval = options.evaluator(state);
      if (options.on_record) options.on_record(rec);
      log.records.push_back(std::move(rec));
    }
  }
  return log;
}

}  // namespace

TrainLog train(const TrainConfig& cfg, const data::OfflineDataset& ds, TrainState& state,
               const TrainOptions& options) {
  return run(cfg, ds, state, {}, options);
}

std::vector<TrainState> train_family(const TrainConfig& cfg, const data::OfflineDataset& ds,
                                     const std::vector<double>& eps_list) {
  if (eps_list.empty()) throw UsageError("train_family needs at least one epsilon");
  if (ds.n == 0) throw UsageError("cannot train on an empty dataset");
  std::vector<TrainState> states;
  for (double eps : eps_list) {
    TrainConfig c = cfg;
    c.epsilon = eps;
    states.push_back(initial_state(c, ds.state_dim, ds.action_dim));
  }
  std::vector<TrainState*> members;
  for (std::size_t i = 1; i < states.size(); ++i) members.push_back(&states[i]);
  TrainConfig c0 = cfg;
  c0.epsilon = eps_list.front();
  run(c0, ds, states.front(), members, {});
  for (std::size_t i = 1; i < states.size(); ++i) {
    auto& s = states[i];
    s.step = states.front().step;
    s.critics = states.front().critics;
    s.critic_opt = states.front().critic_opt;
    s.bundle.cvae_enc = states.front().bundle.cvae_enc;
    s.bundle.cvae_dec = states.front().bundle.cvae_dec;
    s.policy_opt.cvae_enc = states.front().policy_opt.cvae_enc;
    s.policy_opt.cvae_dec = states.front().policy_opt.cvae_dec;
  }
  return states;
}

TrainResult train(const TrainConfig& cfg, const data::OfflineDataset& ds, const TrainOptions& options) {
  if (ds.n == 0) throw UsageError("cannot train on an empty dataset");
  TrainResult r{initial_state(cfg, ds.state_dim, ds.action_dim), {}};
  r.log = train(cfg, ds, r.state, options);
  return r;
}

}  // namespace lspc::trainer
