#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lspc/core/real.hpp"
#include "lspc/core/rng.hpp"

namespace lspc::data {

/// Flat transition arrays, row-major float32. Episode k spans
/// [episode_starts[k], episode_starts[k+1]) and its last transition has done = 1.
struct OfflineDataset {
  std::size_t n = 0;
  int state_dim = 0;
  int action_dim = 0;
  std::vector<float> states;       // n x state_dim
  std::vector<float> actions;      // n x action_dim
  std::vector<float> rewards;      // n
  std::vector<float> costs;        // n
  std::vector<float> next_states;  // n x state_dim
  std::vector<float> dones;        // n, 0 or 1
  std::vector<std::size_t> episode_starts;

  /// Throws UsageError on any broken invariant.
  void validate() const;

  std::size_t episode_count() const { return episode_starts.size(); }
  std::size_t episode_end(std::size_t k) const {
    return k + 1 < episode_starts.size() ? episode_starts[k + 1] : n;
  }
  /// Undiscounted per-episode sums.
  std::vector<double> episode_returns() const;
  std::vector<double> episode_costs() const;
  /// Fraction of episodes whose undiscounted cost is <= kappa.
  double safe_fraction(double kappa) const;

  bool operator==(const OfflineDataset&) const = default;
};

/// Mini-batch gathered into column-major matrices (one column per sample).
template <typename T>
struct Batch {
  std::vector<std::size_t> indices;
  Mat<T> states;       // S x B
  Mat<T> actions;      // A x B
  RowVec<T> rewards;   // 1 x B
  RowVec<T> costs;
  Mat<T> next_states;
  RowVec<T> dones;

  Eigen::Index size() const { return states.cols(); }
};

template <typename T>
Batch<T> gather(const OfflineDataset& ds, std::vector<std::size_t> indices);

/// Uniform with replacement.
template <typename T>
Batch<T> sample_batch(const OfflineDataset& ds, std::size_t batch_size, Rng& rng);

std::vector<std::size_t> sample_indices(const OfflineDataset& ds, std::size_t batch_size, Rng& rng);

/// LSPC-DS v1 writer/reader. `load` distinguishes bad magic, unsupported
/// version, truncated blob and length mismatch via ParseError messages.
void save(const OfflineDataset& ds, const std::filesystem::path& path);
OfflineDataset load(const std::filesystem::path& path);

/// In-memory forms of the same format.
std::string serialize(const OfflineDataset& ds);
OfflineDataset deserialize(const std::string& bytes);

extern template Batch<float> gather<float>(const OfflineDataset&, std::vector<std::size_t>);
extern template Batch<double> gather<double>(const OfflineDataset&, std::vector<std::size_t>);
extern template Batch<float> sample_batch<float>(const OfflineDataset&, std::size_t, Rng&);
extern template Batch<double> sample_batch<double>(const OfflineDataset&, std::size_t, Rng&);

}  // namespace lspc::data
