#include "lspc/eval/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lspc/core/error.hpp"

namespace lspc::eval {

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["policy"] = policy;
  j["n_episodes"] = n_episodes;
  j["kappa"] = kappa;
  j["metric"] = {{"r_min", metric.r_min}, {"r_max", metric.r_max}, {"kappa", metric.kappa}, {"sigma", metric.sigma}};
  j["mean_normalized_reward"] = mean_normalized_reward;
  j["std_normalized_reward"] = std_normalized_reward;
  j["mean_normalized_cost"] = mean_normalized_cost;
  j["std_normalized_cost"] = std_normalized_cost;
  j["mean_return"] = mean_return;
  j["mean_cost"] = mean_cost;
  auto& eps = j["episodes"] = nlohmann::json::array();
  for (const auto& e : episodes)
    eps.push_back({{"index", e.index},
                   {"length", e.length},
                   {"return", e.episode_return},
                   {"cost", e.episode_cost},
                   {"normalized_reward", e.normalized_reward},
                   {"normalized_cost", e.normalized_cost}});
  return j;
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

EvalReport evaluate(const std::string& policy_id, const ActFn& act, const env::Environment& e, int n_episodes,
                    const data::MetricDef& metric, std::uint64_t seed) {
  if (n_episodes < 1) throw UsageError("evaluate needs at least one episode");
  metric.validate();
  EvalReport r;
  r.policy = policy_id;
  r.n_episodes = n_episodes;
  r.kappa = metric.kappa;
  r.metric = metric;
  std::vector<double> nr, nc;
  for (int k = 0; k < n_episodes; ++k) {
    Rng rng(derive_seed(seed, "eval", static_cast<std::uint64_t>(k)));
    EpisodeRecord ep;
    ep.index = k;
    VecD s = e.reset(rng);
    for (int t = 0; t < e.horizon(); ++t) {
      const VecD a = act(s, rng);
      if (a.size() != e.action_dim()) throw UsageError("policy action dimension does not match the environment");
      auto step = e.step(s, a, rng);
      ep.episode_return += step.reward;
      ep.episode_cost += step.cost;
      ++ep.length;
      if (step.done) break;
      s = std::move(step.next_state);
    }
    ep.normalized_reward = data::normalized_reward(ep.episode_return, metric);
    ep.normalized_cost = data::normalized_cost(ep.episode_cost, metric);
    nr.push_back(ep.normalized_reward);
    nc.push_back(ep.normalized_cost);
    r.mean_return += ep.episode_return;
    r.mean_cost += ep.episode_cost;
    r.episodes.push_back(ep);
  }
  const double n = static_cast<double>(n_episodes);
  r.mean_return /= n;
  r.mean_cost /= n;
  r.mean_normalized_reward = std::accumulate(nr.begin(), nr.end(), 0.0) / n;
  r.mean_normalized_cost = std::accumulate(nc.begin(), nc.end(), 0.0) / n;
  r.std_normalized_reward = stddev(nr);
  r.std_normalized_cost = stddev(nc);
  return r;
}

template <typename T>
EvalReport evaluate(const policy::PolicyBundle<T>& pb, policy::PolicyKind kind, const env::Environment& e,
                    int n_episodes, const data::MetricDef& metric, std::uint64_t seed) {
  if (pb.state_dim() != e.state_dim() || pb.action_dim() != e.action_dim())
    throw UsageError("policy and environment dimensions differ");
  const auto& box = e.action_box();
  return evaluate(
      policy::policy_kind_name(kind), [&](const VecD& s, Rng& rng) { return policy::act(pb, kind, s, box, rng); },
      e, n_episodes, metric, seed);
}

template EvalReport evaluate<float>(const policy::PolicyBundle<float>&, policy::PolicyKind, const env::Environment&,
                                    int, const data::MetricDef&, std::uint64_t);
template EvalReport evaluate<double>(const policy::PolicyBundle<double>&, policy::PolicyKind,
                                     const env::Environment&, int, const data::MetricDef&, std::uint64_t);

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("spearman needs two equal-length samples");
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace lspc::eval
