#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "lspc/dataset/dataset.hpp"
#include "lspc/env/environment.hpp"
#include "lspc/env/grid_hazard.hpp"
#include "lspc/env/tabular.hpp"

namespace lspc::data {

/// Scripted data-collection policy. `begin_episode` is called before each
/// episode so mixtures can commit to one component per episode.
class BehaviorPolicy {
 public:
  virtual ~BehaviorPolicy() = default;
  virtual void begin_episode(Rng& rng) { (void)rng; }
  virtual VecD act(const VecD& state, Rng& rng) = 0;
};

/// Parsed form of a behavior string:
///   straight | detour | uniform
///   noisy-straight[:noise] | noisy-detour[:noise]
///   mixture:<w_safe>[:noise]   (per-episode choice between the noisy variants)
/// `noise` is a Gaussian action std on point-hazard and a uniform-random
/// action probability on grid-hazard.
struct BehaviorSpec {
  enum class Kind { kStraight, kDetour, kUniform, kMixture };
  Kind kind = Kind::kStraight;
  double noise = 0.0;
  double w_safe = 0.0;

  static BehaviorSpec parse(std::string_view text, std::string_view env_id);
};

/// Nominal point-hazard behavior speed (Euclidean step length).
inline constexpr double kPointBehaviorSpeed = 0.04;
inline constexpr double kPointDefaultNoise = 0.02;
inline constexpr double kGridDefaultNoise = 0.2;

std::unique_ptr<BehaviorPolicy> make_behavior(const env::Environment& e, const BehaviorSpec& spec);

/// Stationary grid behaviors as exact categorical policies. Mixtures are not
/// stationary and are rejected.
env::CategoricalPolicy tabular_behavior(const env::GridHazard& grid, const BehaviorSpec& spec);

/// Rolls whole episodes until at least `n_transitions` are stored. Episode k
/// draws from the child stream ("collect", k) of `seed`.
OfflineDataset collect(const env::Environment& e, const BehaviorSpec& behavior,
                       std::size_t n_transitions, std::uint64_t seed);

}  // namespace lspc::data
