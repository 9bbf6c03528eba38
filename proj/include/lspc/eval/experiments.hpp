#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "lspc/dataset/behavior.hpp"
#include "lspc/dataset/metrics.hpp"
#include "lspc/env/grid_hazard.hpp"
#include "lspc/eval/evaluate.hpp"
#include "lspc/trainer/trainer.hpp"

namespace lspc::eval {

struct SweepRow {
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::string policy;
  double mean_normalized_reward = 0.0;
  double mean_normalized_cost = 0.0;
  double mean_return = 0.0;
  double mean_cost = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double spearman_lspc_o = 0.0;  // over pooled (epsilon, LSPC-O mean cost) pairs
  std::vector<double> spearman_per_seed;

  nlohmann::json to_json() const;
};

/// Trains one run per (epsilon, seed) and evaluates LSPC-O and LSPC-S.
/// Training seed i is cfg.seed + i.
SweepResult sweep_epsilon(const trainer::TrainConfig& cfg, const data::OfflineDataset& ds,
                          const env::Environment& e, const std::vector<double>& eps_list, int n_seeds,
                          int n_episodes, const data::MetricDef& metric);

struct TrendPoint {
  std::int64_t size = 0;
  std::vector<double> gaps;  // one per seed
  double median_gap = 0.0;
};

struct TrendResult {
  double optimum_reward = 0.0;
  std::vector<TrendPoint> points;
  double loglog_slope = 0.0;  // least squares of log(median gap) on log(size)
  bool non_increasing = false;

  nlohmann::json to_json() const;
};

/// Gap V_r(pi*) - V_r(pi) of the discretised LSPC-O policy trained on grid
/// datasets of each size. Gaps are floored at `gap_floor` before the log.
TrendResult sample_size_trend(const trainer::TrainConfig& cfg, const env::GridHazard& grid,
                              const data::BehaviorSpec& behavior, const std::vector<std::int64_t>& sizes,
                              int n_seeds, double gap_floor = 1e-6);

double median(std::vector<double> v);

}  // namespace lspc::eval
