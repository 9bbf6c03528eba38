#include "lspc/env/point_hazard.hpp"

#include <cmath>

#include "lspc/core/error.hpp"

namespace lspc::env {

namespace {

template <typename F>
void read_fields(const nlohmann::json& j, F&& field) {
  if (!j.is_object()) throw UsageError("environment overrides must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!field(it.key(), it.value())) throw UsageError("unknown point-hazard field: " + it.key());
}

}  // namespace

PointHazardSpec PointHazardSpec::from_json(const nlohmann::json& j) {
  PointHazardSpec s;
  read_fields(j, [&](const std::string& k, const nlohmann::json& v) {
    if (k == "box") s.box = v.get<double>();
    else if (k == "max_action") s.max_action = v.get<double>();
    else if (k == "goal_x") s.goal_x = v.get<double>();
    else if (k == "goal_y") s.goal_y = v.get<double>();
    else if (k == "goal_radius") s.goal_radius = v.get<double>();
    else if (k == "goal_bonus") s.goal_bonus = v.get<double>();
    else if (k == "hazard_x") s.hazard_x = v.get<double>();
    else if (k == "hazard_y") s.hazard_y = v.get<double>();
    else if (k == "hazard_radius") s.hazard_radius = v.get<double>();
    else if (k == "start_x") s.start_x = v.get<double>();
    else if (k == "start_y") s.start_y = v.get<double>();
    else if (k == "start_jitter") s.start_jitter = v.get<double>();
    else if (k == "horizon") s.horizon = v.get<int>();
    else if (k == "dynamics_noise") s.dynamics_noise = v.get<double>();
    else return false;
    return true;
  });
  if (s.horizon <= 0) throw UsageError("point-hazard horizon must be positive");
  if (s.max_action <= 0.0 || s.box <= 0.0) throw UsageError("point-hazard box sizes must be positive");
  return s;
}

nlohmann::json PointHazardSpec::to_json() const {
  return {{"box", box},
          {"max_action", max_action},
          {"goal_x", goal_x},
          {"goal_y", goal_y},
          {"goal_radius", goal_radius},
          {"goal_bonus", goal_bonus},
          {"hazard_x", hazard_x},
          {"hazard_y", hazard_y},
          {"hazard_radius", hazard_radius},
          {"start_x", start_x},
          {"start_y", start_y},
          {"start_jitter", start_jitter},
          {"horizon", horizon},
          {"dynamics_noise", dynamics_noise}};
}

PointHazard::PointHazard(PointHazardSpec spec) : spec_(spec) {
  action_box_.low = VecD::Constant(2, -spec_.max_action);
  action_box_.high = VecD::Constant(2, spec_.max_action);
}

VecD PointHazard::goal() const { return (VecD(2) << spec_.goal_x, spec_.goal_y).finished(); }

bool PointHazard::in_hazard(const VecD& s) const {
  return std::hypot(s(0) - spec_.hazard_x, s(1) - spec_.hazard_y) < spec_.hazard_radius;
}

double PointHazard::goal_distance(const VecD& s) const {
  return std::hypot(s(0) - spec_.goal_x, s(1) - spec_.goal_y);
}

VecD PointHazard::reset(Rng& rng) const {
  VecD s(2);
  s(0) = spec_.start_x + rng.uniform(-spec_.start_jitter, spec_.start_jitter);
  s(1) = spec_.start_y + rng.uniform(-spec_.start_jitter, spec_.start_jitter);
  return s;
}

CmdpStep PointHazard::step(const VecD& state, const VecD& action, Rng& rng) const {
  if (state.size() != 2 || action.size() != 2)
    throw UsageError("point-hazard expects 2-d states and actions");
  if (!state.allFinite() || !action.allFinite())
    throw UsageError("point-hazard rejects non-finite states or actions");
  VecD next = state + action_box_.clip(action);
  if (spec_.dynamics_noise > 0.0) {
    next(0) += spec_.dynamics_noise * rng.normal();
    next(1) += spec_.dynamics_noise * rng.normal();
  }
  next = next.cwiseMax(-spec_.box).cwiseMin(spec_.box);

  CmdpStep out;
  const double dist = goal_distance(next);
  out.reward = -dist;
  if (dist < spec_.goal_radius) {
    out.reward += spec_.goal_bonus;
    out.done = true;
  }
  out.cost = in_hazard(next) ? 1.0 : 0.0;
  out.next_state = std::move(next);
  return out;
}

}  // namespace lspc::env
