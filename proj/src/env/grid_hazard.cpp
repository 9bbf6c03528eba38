#include "lspc/env/grid_hazard.hpp"

#include <algorithm>

#include "lspc/core/error.hpp"

namespace lspc::env {

namespace {

Cell cell_from_json(const nlohmann::json& v) {
  if (!v.is_array() || v.size() != 2) throw UsageError("grid cells are [row, col] pairs");
  return {v[0].get<int>(), v[1].get<int>()};
}

}  // namespace

GridHazardSpec GridHazardSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("environment overrides must be a JSON object");
  GridHazardSpec s;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    const auto& v = it.value();
    if (k == "rows") s.rows = v.get<int>();
    else if (k == "cols") s.cols = v.get<int>();
    else if (k == "slip") s.slip = v.get<double>();
    else if (k == "gamma") s.gamma = v.get<double>();
    else if (k == "kappa") s.kappa = v.get<double>();
    else if (k == "start") s.start = cell_from_json(v);
    else if (k == "goal") s.goal = cell_from_json(v);
    else if (k == "horizon") s.horizon = v.get<int>();
    else if (k == "hazards") {
      s.hazards.clear();
      for (const auto& c : v) s.hazards.push_back(cell_from_json(c));
    } else {
      throw UsageError("unknown grid-hazard field: " + k);
    }
  }
  if (s.rows <= 0 || s.cols <= 0) throw UsageError("grid-hazard needs a positive size");
  if (s.slip < 0.0 || s.slip > 1.0) throw UsageError("grid-hazard slip must lie in [0, 1]");
  if (s.horizon <= 0) throw UsageError("grid-hazard horizon must be positive");
  auto inside = [&](Cell c) {
    return c.first >= 0 && c.first < s.rows && c.second >= 0 && c.second < s.cols;
  };
  if (!inside(s.start) || !inside(s.goal)) throw UsageError("grid-hazard start/goal outside the grid");
  for (const auto& h : s.hazards)
    if (!inside(h)) throw UsageError("grid-hazard hazard cell outside the grid");
  return s;
}

nlohmann::json GridHazardSpec::to_json() const {
  nlohmann::json hz = nlohmann::json::array();
  for (const auto& h : hazards) hz.push_back({h.first, h.second});
  return {{"rows", rows},
          {"cols", cols},
          {"slip", slip},
          {"gamma", gamma},
          {"kappa", kappa},
          {"start", {start.first, start.second}},
          {"goal", {goal.first, goal.second}},
          {"hazards", hz},
          {"horizon", horizon}};
}

bool GridHazardSpec::is_hazard(int s) const {
  return std::find(hazards.begin(), hazards.end(), cell(s)) != hazards.end();
}

TabularCmdp grid_hazard(const GridHazardSpec& spec) {
  const int n = spec.rows * spec.cols;
  TabularCmdp m;
  m.n_states = n;
  m.n_actions = 4;
  m.gamma = spec.gamma;
  m.kappa = spec.kappa;
  m.transitions.assign(4, MatD::Zero(n, n));
  m.reward = MatD::Zero(n, 4);
  m.cost = MatD::Zero(n, 4);
  m.initial = VecD::Zero(n);
  m.initial(spec.index(spec.start)) = 1.0;
  m.terminal.assign(static_cast<std::size_t>(n), false);
  const int goal = spec.index(spec.goal);
  m.terminal[static_cast<std::size_t>(goal)] = true;

  constexpr int dr[4] = {1, -1, 0, 0};
  constexpr int dc[4] = {0, 0, -1, 1};
  auto move = [&](int s, int dir) {
    const auto [r, c] = spec.cell(s);
    const int nr = r + dr[dir];
    const int nc = c + dc[dir];
    if (nr < 0 || nr >= spec.rows || nc < 0 || nc >= spec.cols) return s;
    return spec.index({nr, nc});
  };

  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < 4; ++a) {
      auto& p = m.transitions[static_cast<std::size_t>(a)];
      if (s == goal) {
        p(s, s) = 1.0;
        continue;
      }
      for (int dir = 0; dir < 4; ++dir) {
        const double prob = dir == a ? 1.0 - spec.slip : spec.slip / 3.0;
        if (prob > 0.0) p(s, move(s, dir)) += prob;
      }
      m.reward(s, a) = p(s, goal);
      if (spec.is_hazard(s)) m.cost(s, a) = 1.0;
    }
  }
  m.validate();
  return m;
}

const std::array<std::array<double, 2>, 4>& grid_action_embeddings() {
  static const std::array<std::array<double, 2>, 4> kEmbeddings{
      {{0.0, 1.0}, {0.0, -1.0}, {-1.0, 0.0}, {1.0, 0.0}}};
  return kEmbeddings;
}

int nearest_grid_action(const VecD& a) {
  if (a.size() != 2) throw UsageError("grid actions are 2-d");
  int best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  const auto& e = grid_action_embeddings();
  for (int k = 0; k < 4; ++k) {
    const double d = a(0) * e[static_cast<std::size_t>(k)][0] + a(1) * e[static_cast<std::size_t>(k)][1];
    if (d > best_dot) {
      best_dot = d;
      best = k;
    }
  }
  return best;
}

GridHazard::GridHazard(GridHazardSpec spec) : spec_(std::move(spec)), model_(grid_hazard(spec_)) {
  action_box_.low = VecD::Constant(2, -1.0);
  action_box_.high = VecD::Constant(2, 1.0);
}

VecD GridHazard::one_hot(int s) const {
  VecD v = VecD::Zero(model_.n_states);
  v(s) = 1.0;
  return v;
}

int GridHazard::state_index(const VecD& state) const {
  if (state.size() != model_.n_states) throw UsageError("grid state has the wrong dimension");
  Eigen::Index idx = 0;
  state.maxCoeff(&idx);
  if (state(idx) != 1.0) throw UsageError("grid state is not one-hot");
  return static_cast<int>(idx);
}

VecD GridHazard::embedding(int action) const {
  const auto& e = grid_action_embeddings()[static_cast<std::size_t>(action)];
  return (VecD(2) << e[0], e[1]).finished();
}

VecD GridHazard::reset(Rng& rng) const {
  double u = rng.uniform();
  for (int s = 0; s < model_.n_states; ++s) {
    u -= model_.initial(s);
    if (u < 0.0) return one_hot(s);
  }
  return one_hot(spec_.index(spec_.start));
}

CmdpStep GridHazard::step(const VecD& state, const VecD& action, Rng& rng) const {
  if (!state.allFinite() || !action.allFinite())
    throw UsageError("grid-hazard rejects non-finite states or actions");
  const int s = state_index(state);
  const int a = nearest_grid_action(action);
  const auto& row = model_.transitions[static_cast<std::size_t>(a)].row(s);
  double u = rng.uniform();
  int next = s;
  for (int t = 0; t < model_.n_states; ++t) {
    if (row(t) <= 0.0) continue;
    next = t;
    u -= row(t);
    if (u < 0.0) break;
  }
  CmdpStep out;
  const int goal = spec_.index(spec_.goal);
  out.reward = (next == goal && s != goal) ? 1.0 : 0.0;
  out.cost = model_.cost(s, a);
  out.done = model_.terminal[static_cast<std::size_t>(next)];
  out.next_state = one_hot(next);
  return out;
}

}  // namespace lspc::env
