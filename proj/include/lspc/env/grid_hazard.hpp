#pragma once

#include <array>
#include <utility>
#include <vector>

#include "lspc/env/environment.hpp"
#include "lspc/env/tabular.hpp"

namespace lspc::env {

/// Grid cell as (row, col); row 0 is the bottom edge.
using Cell = std::pair<int, int>;

/// Actions: 0 up, 1 down, 2 left, 3 right.
enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

struct GridHazardSpec {
  int rows = 5;
  int cols = 5;
  double slip = 0.1;  // probability of moving in a uniformly random other direction
  double gamma = 0.99;
  double kappa = 0.3;  // threshold on the discounted cost V_c(rho_0)
  Cell start{0, 2};
  Cell goal{4, 2};
  std::vector<Cell> hazards{{2, 1}, {2, 2}, {2, 3}};
  int horizon = 200;

  static GridHazardSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  int index(Cell c) const { return c.first * cols + c.second; }
  Cell cell(int s) const { return {s / cols, s % cols}; }
  bool is_hazard(int s) const;
};

/// Builds the tabular model. The goal is absorbing with zero reward and cost;
/// r(s, a) is the probability of entering the goal, c(s, a) = 1 on hazard cells.
TabularCmdp grid_hazard(const GridHazardSpec& spec);

/// Unit-vector embedding of each discrete action in the 2-D action box.
const std::array<std::array<double, 2>, 4>& grid_action_embeddings();

/// Index of the embedding closest to `a` (largest dot product, lowest index on ties).
int nearest_grid_action(const VecD& a);

/// The grid as an episodic environment over one-hot states and embedded actions.
class GridHazard final : public Environment {
 public:
  explicit GridHazard(GridHazardSpec spec = {});

  const GridHazardSpec& spec() const { return spec_; }
  const TabularCmdp& model() const { return model_; }

  std::string id() const override { return "grid-hazard"; }
  int state_dim() const override { return model_.n_states; }
  int action_dim() const override { return 2; }
  const ActionBox& action_box() const override { return action_box_; }
  int horizon() const override { return spec_.horizon; }
  double max_cost() const override { return 1.0; }
  VecD reset(Rng& rng) const override;
  CmdpStep step(const VecD& state, const VecD& action, Rng& rng) const override;
  nlohmann::json spec_json() const override { return spec_.to_json(); }

  VecD one_hot(int s) const;
  /// Index of the hot coordinate; throws on malformed input.
  int state_index(const VecD& state) const;
  VecD embedding(int action) const;

 private:
  GridHazardSpec spec_;
  TabularCmdp model_;
  ActionBox action_box_;
};

}  // namespace lspc::env
