#pragma once

#include "lspc/dataset/dataset.hpp"

namespace lspc::data {

/// Normalisation constants for episode returns and costs.
struct MetricDef {
  double r_min = 0.0;
  double r_max = 1.0;
  double kappa = 1.0;
  double sigma = 1e-8;

  void validate() const;
};

/// (R - r_min) / (r_max - r_min)
double normalized_reward(double episode_return, const MetricDef& m);
/// (C + sigma) / (kappa + sigma)
double normalized_cost(double episode_cost, const MetricDef& m);

/// r_min / r_max from the dataset's episode returns.
MetricDef metric_from_dataset(const OfflineDataset& ds, double kappa, double sigma = 1e-8);

/// Like `metric_from_dataset`, but when every episode has the same return
/// the range is widened down to 0 (or to r_max - 1 if r_max <= 0).
MetricDef metric_or_fallback(const OfflineDataset& ds, double kappa, double sigma = 1e-8);

}  // namespace lspc::data
