#pragma once

#include "lspc/env/environment.hpp"

namespace lspc::env {

/// Continuous 2-D navigation task: reach the goal corner while a hazard disk
/// sits on the straight line from the start region.
struct PointHazardSpec {
  double box = 1.0;  // state box [-box, box]^2
  double max_action = 0.2;
  double goal_x = 0.8, goal_y = 0.8;
  double goal_radius = 0.1;
  double goal_bonus = 10.0;
  double hazard_x = 0.0, hazard_y = 0.0;
  double hazard_radius = 0.3;
  double start_x = -0.8, start_y = -0.8;
  double start_jitter = 0.05;
  int horizon = 100;
  double dynamics_noise = 0.0;

  static PointHazardSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

class PointHazard final : public Environment {
 public:
  explicit PointHazard(PointHazardSpec spec = {});

  const PointHazardSpec& spec() const { return spec_; }

  std::string id() const override { return "point-hazard"; }
  int state_dim() const override { return 2; }
  int action_dim() const override { return 2; }
  const ActionBox& action_box() const override { return action_box_; }
  int horizon() const override { return spec_.horizon; }
  double max_cost() const override { return 1.0; }
  VecD reset(Rng& rng) const override;
  CmdpStep step(const VecD& state, const VecD& action, Rng& rng) const override;
  nlohmann::json spec_json() const override { return spec_.to_json(); }

  bool in_hazard(const VecD& s) const;
  double goal_distance(const VecD& s) const;
  VecD goal() const;

 private:
  PointHazardSpec spec_;
  ActionBox action_box_;
};

}  // namespace lspc::env
