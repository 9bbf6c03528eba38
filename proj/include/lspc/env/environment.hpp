#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lspc/core/real.hpp"
#include "lspc/core/rng.hpp"

namespace lspc::env {

struct ActionBox {
  VecD low;
  VecD high;

  VecD clip(const VecD& a) const { return a.cwiseMax(low).cwiseMin(high); }
  bool contains(const VecD& a, double slack = 0.0) const {
    return ((a.array() >= low.array() - slack) && (a.array() <= high.array() + slack)).all();
  }
};

/// Outcome of one transition.
struct CmdpStep {
  VecD next_state;
  double reward = 0.0;
  double cost = 0.0;
  bool done = false;  // environment termination (horizon is handled by the caller)
};

/// Episodic constrained environment with vector states and actions. All
/// methods are const: an environment is an immutable description and the
/// per-episode state lives with the caller.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual const ActionBox& action_box() const = 0;
  virtual int horizon() const = 0;
  /// Largest immediate cost (C_m).
  virtual double max_cost() const = 0;
  virtual VecD reset(Rng& rng) const = 0;
  virtual CmdpStep step(const VecD& state, const VecD& action, Rng& rng) const = 0;
  /// Spec fields as JSON (round-trips through `make_environment`).
  virtual nlohmann::json spec_json() const = 0;
};

/// "point-hazard" or "grid-hazard"; `overrides` replaces spec fields by name.
/// Unknown ids or keys are usage errors.
std::unique_ptr<Environment> make_environment(std::string_view id,
                                              const nlohmann::json& overrides = nlohmann::json::object());

}  // namespace lspc::env
