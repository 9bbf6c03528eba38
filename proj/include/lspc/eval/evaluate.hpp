#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lspc/dataset/metrics.hpp"
#include "lspc/env/environment.hpp"
#include "lspc/policy/lspc.hpp"

namespace lspc::eval {

struct EpisodeRecord {
  int index = 0;
  int length = 0;
  double episode_return = 0.0;  // undiscounted
  double episode_cost = 0.0;    // undiscounted
  double normalized_reward = 0.0;
  double normalized_cost = 0.0;
};

struct EvalReport {
  std::string policy;
  int n_episodes = 0;
  double kappa = 0.0;
  double mean_normalized_reward = 0.0, std_normalized_reward = 0.0;
  double mean_normalized_cost = 0.0, std_normalized_cost = 0.0;
  double mean_return = 0.0, mean_cost = 0.0;
  data::MetricDef metric;
  std::vector<EpisodeRecord> episodes;

  nlohmann::json to_json() const;
};

using ActFn = std::function<VecD(const VecD& state, Rng& rng)>;

/// Rolls `n_episodes` episodes; episode k uses the stream ("eval", k) of
/// `seed` for both the environment and the policy.
EvalReport evaluate(const std::string& policy_id, const ActFn& act, const env::Environment& e, int n_episodes,
                    const data::MetricDef& metric, std::uint64_t seed);

template <typename T>
EvalReport evaluate(const policy::PolicyBundle<T>& pb, policy::PolicyKind kind, const env::Environment& e,
                    int n_episodes, const data::MetricDef& metric, std::uint64_t seed);

/// Population standard deviation; 0 for fewer than two values.
double stddev(const std::vector<double>& v);

/// Spearman rank correlation with average ranks for ties; NaN when either
/// side is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace lspc::eval
