#include "lspc/dataset/behavior.hpp"

#include <charconv>
#include <cmath>
#include <vector>

#include "lspc/core/error.hpp"
#include "lspc/env/point_hazard.hpp"

namespace lspc::data {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_number(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw UsageError("bad " + std::string(what) + " in behavior spec: '" + std::string(s) + "'");
  return v;
}

VecD toward(const VecD& from, const VecD& target, double speed) {
  VecD d = target - from;
  const double norm = d.norm();
  if (norm <= speed) return d;
  return d * (speed / norm);
}

class PointBehavior final : public BehaviorPolicy {
 public:
  PointBehavior(const env::PointHazard& env, bool safe, double noise) : env_(env), safe_(safe), noise_(noise) {}

  void set_safe(bool safe) { safe_ = safe; }

  VecD act(const VecD& s, Rng& rng) override {
    VecD target = env_.goal();
    if (safe_ && s(0) < 0.35) target = (VecD(2) << 0.4, -0.4).finished();
    VecD a = toward(s, target, kPointBehaviorSpeed);
    if (noise_ > 0.0)
      for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += noise_ * rng.normal();
    return env_.action_box().clip(a);
  }

 private:
  const env::PointHazard& env_;
  bool safe_;
  double noise_;
};

class UniformBehavior final : public BehaviorPolicy {
 public:
  explicit UniformBehavior(const env::Environment& env) : env_(env) {}
  VecD act(const VecD&, Rng& rng) override {
    const auto& box = env_.action_box();
    VecD a(box.low.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.uniform(box.low(i), box.high(i));
    return a;
  }

 private:
  const env::Environment& env_;
};

int grid_straight_action(const env::GridHazardSpec& g, env::Cell c) {
  if (c.second < g.goal.second) return env::kRight;
  if (c.second > g.goal.second) return env::kLeft;
  return c.first < g.goal.first ? env::kUp : env::kDown;
}

int grid_detour_action(const env::GridHazardSpec& g, env::Cell c) {
  if (c.first == g.rows - 1) {
    if (c.second < g.goal.second) return env::kRight;
    if (c.second > g.goal.second) return env::kLeft;
    return env::kUp;
  }
  if (c.second == 0) return env::kUp;
  return env::kLeft;
}

class GridBehavior final : public BehaviorPolicy {
 public:
  GridBehavior(const env::GridHazard& env, bool safe, double noise) : env_(env), safe_(safe), noise_(noise) {}

  void set_safe(bool safe) { safe_ = safe; }

  VecD act(const VecD& s, Rng& rng) override {
    const auto cell = env_.spec().cell(env_.state_index(s));
    int a = safe_ ? grid_detour_action(env_.spec(), cell) : grid_straight_action(env_.spec(), cell);
    if (noise_ > 0.0 && rng.uniform() < noise_) a = static_cast<int>(rng.below(4));
    return env_.embedding(a);
  }

 private:
  const env::GridHazard& env_;
  bool safe_;
  double noise_;
};

template <typename Inner>
class MixtureBehavior final : public BehaviorPolicy {
 public:
  MixtureBehavior(Inner inner, double w_safe) : inner_(std::move(inner)), w_safe_(w_safe) {}
  void begin_episode(Rng& rng) override { inner_.set_safe(rng.uniform() < w_safe_); }
  VecD act(const VecD& s, Rng& rng) override { return inner_.act(s, rng); }

 private:
  Inner inner_;
  double w_safe_;
};

}  // namespace

BehaviorSpec BehaviorSpec::parse(std::string_view text, std::string_view env_id) {
  const double default_noise = env_id == "grid-hazard" ? kGridDefaultNoise : kPointDefaultNoise;
  const auto parts = split(text, ':');
  const auto head = parts.front();
  BehaviorSpec spec;
  auto noise_at = [&](std::size_t i) {
    if (parts.size() <= i) return default_noise;
    const double v = parse_number(parts[i], "noise");
    if (v < 0.0) throw UsageError("behavior noise must be non-negative");
    return v;
  };
  if (head == "straight" || head == "detour" || head == "uniform") {
    if (parts.size() != 1) throw UsageError("behavior '" + std::string(head) + "' takes no parameters");
    spec.kind = head == "straight" ? Kind::kStraight : head == "detour" ? Kind::kDetour : Kind::kUniform;
  } else if (head == "noisy-straight" || head == "noisy-detour") {
    if (parts.size() > 2) throw UsageError("too many parameters in behavior spec");
    spec.kind = head == "noisy-straight" ? Kind::kStraight : Kind::kDetour;
    spec.noise = noise_at(1);
  } else if (head == "mixture") {
    if (parts.size() < 2 || parts.size() > 3) throw UsageError("mixture behavior needs mixture:<w_safe>[:noise]");
    spec.kind = Kind::kMixture;
    spec.w_safe = parse_number(parts[1], "w_safe");
    if (spec.w_safe < 0.0 || spec.w_safe > 1.0) throw UsageError("w_safe must lie in [0, 1]");
    spec.noise = noise_at(2);
  } else {
    throw UsageError("unknown behavior '" + std::string(text) + "'");
  }
  if (env_id == "grid-hazard" && spec.noise > 1.0) throw UsageError("grid behavior noise is a probability");
  return spec;
}

std::unique_ptr<BehaviorPolicy> make_behavior(const env::Environment& e, const BehaviorSpec& spec) {
  using Kind = BehaviorSpec::Kind;
  if (spec.kind == Kind::kUniform) return std::make_unique<UniformBehavior>(e);
  const bool safe = spec.kind == Kind::kDetour;
  if (const auto* p = dynamic_cast<const env::PointHazard*>(&e)) {
    PointBehavior inner(*p, safe, spec.noise);
    if (spec.kind == Kind::kMixture) return std::make_unique<MixtureBehavior<PointBehavior>>(inner, spec.w_safe);
    return std::make_unique<PointBehavior>(inner);
  }
  if (const auto* g = dynamic_cast<const env::GridHazard*>(&e)) {
    GridBehavior inner(*g, safe, spec.noise);
    if (spec.kind == Kind::kMixture) return std::make_unique<MixtureBehavior<GridBehavior>>(inner, spec.w_safe);
    return std::make_unique<GridBehavior>(inner);
  }
  throw UsageError("no scripted behavior for environment " + e.id());
}

env::CategoricalPolicy tabular_behavior(const env::GridHazard& grid, const BehaviorSpec& spec) {
  using Kind = BehaviorSpec::Kind;
  if (spec.kind == Kind::kMixture) throw UsageError("mixture behaviors are not stationary");
  const int S = grid.model().n_states;
  env::CategoricalPolicy pol;
  pol.probs = MatD::Zero(S, 4);
  for (int s = 0; s < S; ++s) {
    if (spec.kind == Kind::kUniform) {
      pol.probs.row(s).setConstant(0.25);
      continue;
    }
    const auto cell = grid.spec().cell(s);
    const int a = spec.kind == Kind::kDetour ? grid_detour_action(grid.spec(), cell)
                                             : grid_straight_action(grid.spec(), cell);
    pol.probs.row(s).setConstant(spec.noise / 4.0);
    pol.probs(s, a) += 1.0 - spec.noise;
  }
  return pol;
}

OfflineDataset collect(const env::Environment& e, const BehaviorSpec& behavior, std::size_t n_transitions,
                       std::uint64_t seed) {
  if (n_transitions == 0) throw UsageError("collect needs n_transitions > 0");
  auto policy = make_behavior(e, behavior);
  OfflineDataset ds;
  ds.state_dim = e.state_dim();
  ds.action_dim = e.action_dim();
  auto push = [](std::vector<float>& dst, const VecD& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) dst.push_back(static_cast<float>(v(i)));
  };
  for (std::uint64_t k = 0; ds.n < n_transitions; ++k) {
    Rng rng(derive_seed(seed, "collect", k));
    policy->begin_episode(rng);
    ds.episode_starts.push_back(ds.n);
    VecD s = e.reset(rng);
    for (int t = 0; t < e.horizon(); ++t) {
      const VecD a = policy->act(s, rng);
      auto step = e.step(s, a, rng);
      const bool last = step.done || t + 1 == e.horizon();
      push(ds.states, s);
      push(ds.actions, a);
      ds.rewards.push_back(static_cast<float>(step.reward));
      ds.costs.push_back(static_cast<float>(step.cost));
      push(ds.next_states, step.next_state);
      ds.dones.push_back(last ? 1.0f : 0.0f);
      ++ds.n;
      if (last) break;
      s = std::move(step.next_state);
    }
  }
  return ds;
}

}  // namespace lspc::data
