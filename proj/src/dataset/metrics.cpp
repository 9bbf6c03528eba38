#include "lspc/dataset/metrics.hpp"

#include <algorithm>

#include "lspc/core/error.hpp"

namespace lspc::data {

void MetricDef::validate() const {
  if (!(r_max > r_min)) throw UsageError("metric needs r_max > r_min");
  if (!(kappa > 0.0)) throw UsageError("metric needs kappa > 0");
  if (sigma < 0.0) throw UsageError("metric sigma must be non-negative");
}

double normalized_reward(double episode_return, const MetricDef& m) {
  if (m.r_max == m.r_min) throw UsageError("metric needs r_max != r_min");
  return (episode_return - m.r_min) / (m.r_max - m.r_min);
}

double normalized_cost(double episode_cost, const MetricDef& m) {
  return (episode_cost + m.sigma) / (m.kappa + m.sigma);
}

MetricDef metric_from_dataset(const OfflineDataset& ds, double kappa, double sigma) {
  const auto returns = ds.episode_returns();
  if (returns.empty()) throw UsageError("metric_from_dataset: dataset has no episodes");
  const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
  MetricDef m{*lo, *hi, kappa, sigma};
  m.validate();
  return m;
}

MetricDef metric_or_fallback(const OfflineDataset& ds, double kappa, double sigma) {
  const auto returns = ds.episode_returns();
  if (returns.empty()) throw UsageError("metric_or_fallback: dataset has no episodes");
  const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
  MetricDef m{*lo, *hi, kappa, sigma};
  if (!(m.r_max > m.r_min)) {
    m.r_min = std::min(m.r_min, 0.0);
    if (!(m.r_max > m.r_min)) m.r_max = m.r_min + 1.0;
  }
  m.validate();
  return m;
}

}  // namespace lspc::data
