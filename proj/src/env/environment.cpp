#include "lspc/env/environment.hpp"

#include "lspc/core/error.hpp"
#include "lspc/env/grid_hazard.hpp"
#include "lspc/env/point_hazard.hpp"

namespace lspc::env {

std::unique_ptr<Environment> make_environment(std::string_view id, const nlohmann::json& overrides) {
  const nlohmann::json o = overrides.is_null() ? nlohmann::json::object() : overrides;
  if (id == "point-hazard") return std::make_unique<PointHazard>(PointHazardSpec::from_json(o));
  if (id == "grid-hazard") return std::make_unique<GridHazard>(GridHazardSpec::from_json(o));
  throw UsageError("unknown environment id: " + std::string(id));
}

}  // namespace lspc::env
