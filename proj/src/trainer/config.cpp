#include <fstream>
#include <sstream>

#include "lspc/core/binary.hpp"
#include "lspc/core/error.hpp"
#include "lspc/trainer/trainer.hpp"

namespace lspc::trainer {

void apply_profile(TrainConfig& cfg, std::string_view profile) {
  if (profile == "desk") {
    cfg.batch_size = 256;
    cfg.width = 64;
    cfg.latent_dim = 8;
  } else if (profile == "paper") {
    cfg.batch_size = 1024;
    cfg.width = 256;
    cfg.latent_dim = 32;
  } else {
    throw ParseError("unknown profile '" + std::string(profile) + "' (expected desk or paper)");
  }
  cfg.profile = std::string(profile);
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  TrainConfig c;
  try {
    if (j.contains("profile")) apply_profile(c, j.at("profile").get<std::string>());
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      if (k == "profile") continue;
      else if (k == "steps") c.steps = v.get<std::int64_t>();
      else if (k == "batch_size") c.batch_size = v.get<int>();
      else if (k == "width") c.width = v.get<int>();
      else if (k == "depth") c.depth = v.get<int>();
      else if (k == "gamma") c.gamma = v.get<double>();
      else if (k == "tau") c.tau = v.get<double>();
      else if (k == "xi") c.xi = v.get<double>();
      else if (k == "lambda") c.lambda = v.get<double>();
      else if (k == "zeta") c.zeta = v.get<double>();
      else if (k == "lr") c.lr = v.get<double>();
      else if (k == "w_max") c.w_max = v.get<double>();
      else if (k == "kl_coef") c.kl_coef = v.get<double>();
      else if (k == "latent_dim") c.latent_dim = v.get<int>();
      else if (k == "epsilon") c.epsilon = v.get<double>();
      else if (k == "c_zero_thresh") c.c_zero_thresh = v.is_null() ? std::nullopt : std::optional(v.get<double>());
      else if (k == "truncated_normal") c.truncated_normal = v.get<bool>();
      else if (k == "ablation") c.ablation = v.get<bool>();
      else if (k == "critic_warmup_steps") c.critic_warmup_steps = v.get<std::int64_t>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "eval_every") c.eval_every = v.get<std::int64_t>();
      else if (k == "eval_episodes") c.eval_episodes = v.get<int>();
      else if (k == "kappa") c.kappa = v.get<double>();
      else if (k == "env") c.env = v.get<std::string>();
      else if (k == "env_overrides") {
        if (!v.is_object()) throw ParseError("env_overrides must be an object");
        c.env_overrides = v;
      }
      else if (k == "behavior") c.behavior = v.get<std::string>();
      else if (k == "n_transitions") c.n_transitions = v.get<std::int64_t>();
      else if (k == "data_seed") c.data_seed = v.get<std::uint64_t>();
      else throw ParseError("unknown config key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad config value: ") + e.what());
  }
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  const std::string text = read_file(path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["profile"] = profile;
  j["steps"] = steps;
  j["batch_size"] = batch_size;
  j["width"] = width;
  j["depth"] = depth;
  j["gamma"] = gamma;
  j["tau"] = tau;
  j["xi"] = xi;
  j["lambda"] = lambda;
  j["zeta"] = zeta;
  j["lr"] = lr;
  j["w_max"] = w_max;
  j["kl_coef"] = kl_coef;
  j["latent_dim"] = latent_dim;
  j["epsilon"] = epsilon;
  j["c_zero_thresh"] = c_zero_thresh ? nlohmann::json(*c_zero_thresh) : nlohmann::json(nullptr);
  j["truncated_normal"] = truncated_normal;
  j["ablation"] = ablation;
  j["critic_warmup_steps"] = critic_warmup_steps;
  j["seed"] = seed;
  j["eval_every"] = eval_every;
  j["eval_episodes"] = eval_episodes;
  j["kappa"] = kappa;
  j["env"] = env;
  j["env_overrides"] = env_overrides;
  j["behavior"] = behavior;
  j["n_transitions"] = n_transitions;
  j["data_seed"] = data_seed;
  return j;
}

void TrainConfig::validate() const {
  if (steps < 0) throw UsageError("steps must be non-negative");
  if (batch_size < 1) throw UsageError("batch_size must be at least 1");
  if (width < 1 || depth < 0) throw UsageError("network width must be positive");
  if (!(lr > 0.0)) throw UsageError("lr must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("gamma must lie in (0, 1)");
  if (!(tau >= 0.0 && tau <= 1.0)) throw UsageError("tau must lie in [0, 1]");
  const bool xi_ok = ablation ? (xi >= 0.5 && xi < 1.0) : (xi > 0.5 && xi < 1.0);
  if (!xi_ok) throw UsageError("xi must lie in (0.5, 1) unless ablation is set");
  if (critic_warmup_steps < 0) throw UsageError("critic_warmup_steps must be non-negative");
  if (eval_every < 0) throw UsageError("eval_every must be non-negative");
  if (eval_episodes < 1) throw UsageError("eval_episodes must be at least 1");
  if (!(kappa > 0.0)) throw UsageError("kappa must be positive");
  if (n_transitions < 1) throw UsageError("n_transitions must be positive");
  policy_params().validate();
}

policy::PolicyParams TrainConfig::policy_params() const {
  policy::PolicyParams p;
  p.latent_dim = latent_dim;
  p.epsilon = epsilon;
  p.lambda = lambda;
  p.zeta = zeta;
  p.kl_coef = kl_coef;
  p.w_max = w_max;
  p.c_zero_thresh = c_zero_thresh;
  p.truncated_normal = truncated_normal;
  return p;
}

}  // namespace lspc::trainer
