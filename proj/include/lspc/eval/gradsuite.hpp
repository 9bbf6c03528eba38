#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lspc/nn/gradcheck.hpp"

namespace lspc::eval {

struct GradSuiteEntry {
  std::string loss;
  std::uint64_t seed = 0;
  nn::GradCheckReport report;
};

struct GradSuiteReport {
  std::vector<GradSuiteEntry> entries;
  double tolerance = 1e-4;

  double max_rel_error() const;
  bool passed() const;
  nlohmann::json to_json() const;
};

/// Analytic vs central-difference gradients, in double precision, for the
/// network-level losses and every critic and policy loss, over `n_seeds` seeds.
GradSuiteReport gradient_suite(int n_seeds, std::uint64_t base_seed = 0, double tolerance = 1e-4);

}  // namespace lspc::eval
