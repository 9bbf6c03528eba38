#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lspc/core/real.hpp"
#include "lspc/critics/critics.hpp"
#include "lspc/dataset/dataset.hpp"
#include "lspc/policy/lspc.hpp"

namespace lspc::trainer {

/// Flat training configuration. `profile` ("desk" or "paper") seeds the
/// scale-dependent defaults before the remaining keys are applied.
struct TrainConfig {
  std::string profile = "desk";
  std::int64_t steps = 50000;
  int batch_size = 256;
  int width = 64;
  int depth = 2;
  double gamma = 0.99;
  double tau = 0.005;
  double xi = 0.7;
  double lambda = 2.0;
  double zeta = 2.0;
  double lr = 3e-4;
  double w_max = 200.0;
  double kl_coef = 0.5;
  int latent_dim = 8;
  double epsilon = 0.25;
  std::optional<double> c_zero_thresh;
  bool truncated_normal = false;
  bool ablation = false;  // permits xi = 0.5
  std::int64_t critic_warmup_steps = 0;
  std::uint64_t seed = 0;
  std::int64_t eval_every = 0;
  int eval_episodes = 20;
  double kappa = 5.0;
  std::string env = "point-hazard";
  nlohmann::json env_overrides = nlohmann::json::object();
  // Data generation, used when a command builds its own dataset.
  std::string behavior = "mixture:0.5";
  std::int64_t n_transitions = 50000;
  std::uint64_t data_seed = 0;

  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;

  policy::PolicyParams policy_params() const;
};

/// Applies the named profile's batch/width/latent defaults.
void apply_profile(TrainConfig& cfg, std::string_view profile);

using Critics = critics::CriticSet<Real>;
using Bundle = policy::PolicyBundle<Real>;

struct PolicyOptimizers {
  nn::AdamState<Real> cvae_enc, cvae_dec, lat_enc;
  static PolicyOptimizers for_bundle(const Bundle& pb);
};

/// Everything needed to continue training exactly where it stopped.
struct TrainState {
  std::int64_t step = 0;
  Critics critics;
  Bundle bundle;
  critics::CriticOptimizers<Real> critic_opt;
  PolicyOptimizers policy_opt;
};

struct LogRecord {
  std::int64_t step = 0;  // iterations completed
  double reward_value = 0.0, reward_q = 0.0, cost_value = 0.0, cost_q = 0.0;
  double cvae = 0.0, encoder = 0.0;
  double mean_cost_weight = 0.0, mean_reward_weight = 0.0;
  nlohmann::json eval;  // null unless an evaluator ran

  nlohmann::json to_json() const;
};

struct TrainLog {
  std::vector<LogRecord> records;
  /// One JSON object per line.
  std::string to_jsonl() const;
};

struct TrainOptions {
  /// Receives a parameter-group name at every mutation:
  /// v, q, vc, qc, cvae, lat_enc, targets.
  critics::MutationObserver observer;
  /// Runs at each logging interval; its result is stored in the record.
  std::function<nlohmann::json(const TrainState&)> evaluator;
  /// Streams each record as it is produced.
  std::function<void(const LogRecord&)> on_record;
};

/// Freshly initialised networks and optimizers for the dataset's dimensions.
TrainState initial_state(const TrainConfig& cfg, int state_dim, int action_dim);

/// Runs iterations state.step .. cfg.steps - 1 on `state`. Iteration t draws
/// its batch and noise from the streams ("batch", t), ("cvae", t) and
/// ("enc", t) of cfg.seed, so a resumed run replays the same tape.
TrainLog train(const TrainConfig& cfg, const data::OfflineDataset& ds, TrainState& state,
               const TrainOptions& options = {});

struct TrainResult {
  TrainState state;
  TrainLog log;
};

TrainResult train(const TrainConfig& cfg, const data::OfflineDataset& ds, const TrainOptions& options = {});

// ---- checkpoints ------------------------------------------------------------

/// Named tensor view used by the LSPC-CKPT writer.
struct TensorEntry {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> values;
};

/// LSPC-CKPT v1 encoder/decoder over an ordered tensor list.
std::string encode_checkpoint(const std::vector<TensorEntry>& tensors);
std::vector<TensorEntry> decode_checkpoint(const std::string& bytes);

/// Extra metadata stored next to the tensors.
struct CheckpointMeta {
  TrainConfig config;
  std::string env_id;
  nlohmann::json env_spec = nlohmann::json::object();
  double r_min = 0.0;
  double r_max = 1.0;
};

/// Writes DIR/model.ckpt, DIR/policy.json and DIR/state.json.
void save_checkpoint(const std::filesystem::path& dir, const TrainState& state, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  TrainState state;
  CheckpointMeta meta;
};

/// Inverse of `save_checkpoint`. Missing tensors, shape or size mismatches
/// raise ParseError.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace lspc::trainer

namespace lspc::trainer {

/// Trains one run per epsilon in `eps_list`. Critics and the CVAE do not
/// depend on epsilon, so they are trained once and shared; each member gets
/// its own latent encoder driven by the same noise tape. Member i is bitwise
/// identical to `train` with cfg.epsilon = eps_list[i].
std::vector<TrainState> train_family(const TrainConfig& cfg, const data::OfflineDataset& ds,
                                     const std::vector<double>& eps_list);

}  // namespace lspc::trainer
