#include "lspc/eval/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "lspc/core/error.hpp"
#include "lspc/eval/theory.hpp"

namespace lspc::eval {

nlohmann::json SweepResult::to_json() const {
  nlohmann::json j;
  auto& r = j["rows"] = nlohmann::json::array();
  for (const auto& row : rows)
    r.push_back({{"epsilon", row.epsilon},
                 {"seed", row.seed},
                 {"policy", row.policy},
                 {"mean_normalized_reward", row.mean_normalized_reward},
                 {"mean_normalized_cost", row.mean_normalized_cost},
                 {"mean_return", row.mean_return},
                 {"mean_cost", row.mean_cost}});
  j["spearman_lspc_o_cost"] = std::isnan(spearman_lspc_o) ? nlohmann::json(nullptr) : nlohmann::json(spearman_lspc_o);
  auto& ps = j["spearman_per_seed"] = nlohmann::json::array();
  for (double v : spearman_per_seed) ps.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  return j;
}

SweepResult sweep_epsilon(const trainer::TrainConfig& cfg, const data::OfflineDataset& ds, const env::Environment& e,
                          const std::vector<double>& eps_list, int n_seeds, int n_episodes,
                          const data::MetricDef& metric) {
  if (eps_list.empty()) throw UsageError("sweep needs at least one epsilon");
  if (n_seeds < 1) throw UsageError("sweep needs at least one seed");
  SweepResult out;
  std::vector<double> xs, ys;
  for (int i = 0; i < n_seeds; ++i) {
    trainer::TrainConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(i);
    const auto states = trainer::train_family(c, ds, eps_list);
    std::vector<double> sx, sy;
    for (std::size_t k = 0; k < eps_list.size(); ++k) {
      const std::uint64_t eval_seed = derive_seed(c.seed, "eval");
      for (auto kind : {policy::PolicyKind::kLspcO, policy::PolicyKind::kLspcS}) {
        const auto rep = evaluate(states[k].bundle, kind, e, n_episodes, metric, eval_seed);
        out.rows.push_back({eps_list[k], c.seed, rep.policy, rep.mean_normalized_reward, rep.mean_normalized_cost,
                            rep.mean_return, rep.mean_cost});
        if (kind == policy::PolicyKind::kLspcO) {
          sx.push_back(eps_list[k]);
          sy.push_back(rep.mean_cost);
        }
      }
    }
    out.spearman_per_seed.push_back(sx.size() > 1 ? spearman(sx, sy) : std::nan(""));
    xs.insert(xs.end(), sx.begin(), sx.end());
    ys.insert(ys.end(), sy.begin(), sy.end());
  }
  out.spearman_lspc_o = xs.size() > 1 ? spearman(xs, ys) : std::nan("");
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) throw UsageError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

nlohmann::json TrendResult::to_json() const {
  nlohmann::json j;
  j["optimum_reward"] = optimum_reward;
  auto& pts = j["points"] = nlohmann::json::array();
  for (const auto& p : points) pts.push_back({{"size", p.size}, {"gaps", p.gaps}, {"median_gap", p.median_gap}});
  j["loglog_slope"] = loglog_slope;
  j["non_increasing"] = non_increasing;
  return j;
}

TrendResult sample_size_trend(const trainer::TrainConfig& cfg, const env::GridHazard& grid,
                              const data::BehaviorSpec& behavior, const std::vector<std::int64_t>& sizes,
                              int n_seeds, double gap_floor) {
  if (sizes.size() < 2) throw UsageError("trend needs at least two dataset sizes");
  TrendResult out;
  const auto& m = grid.model();
  const auto opt = env::constrained_optimal(m);
  out.optimum_reward = opt.value_reward;
  for (auto n : sizes) {
    TrendPoint p;
    p.size = n;
    for (int i = 0; i < n_seeds; ++i) {
      trainer::TrainConfig c = cfg;
      c.seed = cfg.seed + static_cast<std::uint64_t>(i);
      const auto ds = data::collect(grid, behavior, static_cast<std::size_t>(n),
                                    derive_seed(c.seed, "data", static_cast<std::uint64_t>(n)));
      const auto result = trainer::train(c, ds);
      const auto pi = discretize_policy(result.state.bundle, policy::PolicyKind::kLspcO, grid, 1, c.seed);
      const double v = env::initial_value(m, env::policy_eval(m, pi, env::Signal::kReward));
      p.gaps.push_back(opt.value_reward - v);
    }
    p.median_gap = median(p.gaps);
    out.points.push_back(std::move(p));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = static_cast<double>(out.points.size());
  for (const auto& p : out.points) {
    const double x = std::log(static_cast<double>(p.size));
    const double y = std::log(std::max(p.median_gap, gap_floor));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  out.loglog_slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  out.non_increasing = true;
  for (std::size_t i = 1; i < out.points.size(); ++i)
    if (out.points[i].median_gap > out.points[i - 1].median_gap) out.non_increasing = false;
  return out;
}

}  // namespace lspc::eval
