#include "lspc/dataset/dataset.hpp"

#include <cmath>
#include <iostream>

#include <json.hpp>

#include "lspc/core/binary.hpp"
#include "lspc/core/error.hpp"

namespace lspc::data {

void OfflineDataset::validate() const {
  const auto sd = static_cast<std::size_t>(state_dim);
  const auto ad = static_cast<std::size_t>(action_dim);
  if (state_dim <= 0 || action_dim <= 0) throw UsageError("dataset dimensions must be positive");
  if (states.size() != n * sd || next_states.size() != n * sd || actions.size() != n * ad ||
      rewards.size() != n || costs.size() != n || dones.size() != n)
    throw UsageError("dataset array lengths are inconsistent with n");
  if (n == 0) {
    if (!episode_starts.empty()) throw UsageError("empty dataset cannot have episodes");
    return;
  }
  if (episode_starts.empty() || episode_starts.front() != 0)
    throw UsageError("episode_starts must begin with 0");
  for (std::size_t k = 1; k < episode_starts.size(); ++k)
    if (episode_starts[k] <= episode_starts[k - 1] || episode_starts[k] >= n)
      throw UsageError("episode_starts must be strictly increasing and below n");
  for (float c : costs)
    if (!(c >= 0.0f)) throw UsageError("dataset costs must be non-negative");
  for (std::size_t k = 0; k < episode_starts.size(); ++k) {
    const std::size_t end = episode_end(k);
    for (std::size_t i = episode_starts[k]; i < end; ++i) {
      const bool last = i + 1 == end;
      if (dones[i] != (last ? 1.0f : 0.0f))
        throw UsageError("dones must mark exactly the last transition of each episode");
    }
  }
}

std::vector<double> OfflineDataset::episode_returns() const {
  std::vector<double> out;
  for (std::size_t k = 0; k < episode_count(); ++k) {
    double sum = 0.0;
    for (std::size_t i = episode_starts[k]; i < episode_end(k); ++i) sum += rewards[i];
    out.push_back(sum);
  }
  return out;
}

std::vector<double> OfflineDataset::episode_costs() const {
  std::vector<double> out;
  for (std::size_t k = 0; k < episode_count(); ++k) {
    double sum = 0.0;
    for (std::size_t i = episode_starts[k]; i < episode_end(k); ++i) sum += costs[i];
    out.push_back(sum);
  }
  return out;
}

double OfflineDataset::safe_fraction(double kappa) const {
  const auto c = episode_costs();
  if (c.empty()) return 0.0;
  std::size_t safe = 0;
  for (double v : c) safe += v <= kappa ? 1 : 0;
  return static_cast<double>(safe) / static_cast<double>(c.size());
}

template <typename T>
Batch<T> gather(const OfflineDataset& ds, std::vector<std::size_t> indices) {
  const auto b = static_cast<Eigen::Index>(indices.size());
  const Eigen::Index sd = ds.state_dim;
  const Eigen::Index ad = ds.action_dim;
  Batch<T> out;
  out.states.resize(sd, b);
  out.next_states.resize(sd, b);
  out.actions.resize(ad, b);
  out.rewards.resize(b);
  out.costs.resize(b);
  out.dones.resize(b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const std::size_t i = indices[static_cast<std::size_t>(j)];
    if (i >= ds.n) throw UsageError("batch index out of range");
    for (Eigen::Index d = 0; d < sd; ++d) {
      out.states(d, j) = static_cast<T>(ds.states[i * static_cast<std::size_t>(sd) + static_cast<std::size_t>(d)]);
      out.next_states(d, j) =
          static_cast<T>(ds.next_states[i * static_cast<std::size_t>(sd) + static_cast<std::size_t>(d)]);
    }
    for (Eigen::Index d = 0; d < ad; ++d)
      out.actions(d, j) = static_cast<T>(ds.actions[i * static_cast<std::size_t>(ad) + static_cast<std::size_t>(d)]);
    out.rewards(j) = static_cast<T>(ds.rewards[i]);
    out.costs(j) = static_cast<T>(ds.costs[i]);
    out.dones(j) = static_cast<T>(ds.dones[i]);
  }
  out.indices = std::move(indices);
  return out;
}

std::vector<std::size_t> sample_indices(const OfflineDataset& ds, std::size_t batch_size, Rng& rng) {
  if (ds.n == 0) throw UsageError("cannot sample from an empty dataset");
  if (batch_size == 0) throw UsageError("batch_size must be at least 1");
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(ds.n));
  return idx;
}

template <typename T>
Batch<T> sample_batch(const OfflineDataset& ds, std::size_t batch_size, Rng& rng) {
  return gather<T>(ds, sample_indices(ds, batch_size, rng));
}

template Batch<float> gather<float>(const OfflineDataset&, std::vector<std::size_t>);
template Batch<double> gather<double>(const OfflineDataset&, std::vector<std::size_t>);
template Batch<float> sample_batch<float>(const OfflineDataset&, std::size_t, Rng&);
template Batch<double> sample_batch<double>(const OfflineDataset&, std::size_t, Rng&);

// ---- LSPC-DS v1 -------------------------------------------------------------

std::string serialize(const OfflineDataset& ds) {
  ds.validate();
  nlohmann::ordered_json header;
  header["magic"] = "LSPC-DS";
  header["version"] = 1;
  header["n"] = ds.n;
  header["state_dim"] = ds.state_dim;
  header["action_dim"] = ds.action_dim;
  header["fields"] = {"state", "action", "reward", "cost", "next_state", "done"};
  header["dtype"] = "f32le";
  header["episode_starts"] = ds.episode_starts;
  std::string out = header.dump();
  out.push_back('\n');
  append_f32le(out, ds.states);
  append_f32le(out, ds.actions);
  append_f32le(out, ds.rewards);
  append_f32le(out, ds.costs);
  append_f32le(out, ds.next_states);
  append_f32le(out, ds.dones);
  return out;
}

OfflineDataset deserialize(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw ParseError("missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed header: ") + e.what());
  }
  if (!header.is_object() || header.value("magic", "") != "LSPC-DS") throw ParseError("bad magic");
  if (!header.contains("version") || header["version"] != 1) throw ParseError("unsupported version");

  OfflineDataset ds;
  std::string dtype;
  try {
    ds.n = header.at("n").get<std::size_t>();
    ds.state_dim = header.at("state_dim").get<int>();
    ds.action_dim = header.at("action_dim").get<int>();
    dtype = header.at("dtype").get<std::string>();
    ds.episode_starts = header.at("episode_starts").get<std::vector<std::size_t>>();
    const std::vector<std::string> expected{"state", "action", "reward", "cost", "next_state", "done"};
    if (header.at("fields").get<std::vector<std::string>>() != expected)
      throw ParseError("unexpected field list");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed header: ") + e.what());
  }
  if (ds.state_dim <= 0 || ds.action_dim <= 0) throw ParseError("header dimensions must be positive");
  std::size_t width = 0;
  if (dtype == "f32le") {
    width = 4;
  } else if (dtype == "f64le") {
    width = 8;
    std::cerr << "warning: LSPC-DS float64 payload converted to float32\n";
  } else {
    throw ParseError("unsupported dtype " + dtype);
  }

  const auto sd = static_cast<std::size_t>(ds.state_dim);
  const auto ad = static_cast<std::size_t>(ds.action_dim);
  const std::size_t counts[] = {ds.n * sd, ds.n * ad, ds.n, ds.n, ds.n * sd, ds.n};
  std::size_t total = 0;
  for (auto c : counts) total += c;
  const std::size_t blob = bytes.size() - nl - 1;
  if (blob < total * width) throw ParseError("truncated blob");
  if (blob != total * width) throw ParseError("length mismatch");

  const char* p = bytes.data() + nl + 1;
  auto next = [&](std::size_t count) {
    auto v = width == 4 ? read_f32le(p, count) : read_f64le_as_f32(p, count);
    p += count * width;
    return v;
  };
  ds.states = next(counts[0]);
  ds.actions = next(counts[1]);
  ds.rewards = next(counts[2]);
  ds.costs = next(counts[3]);
  ds.next_states = next(counts[4]);
  ds.dones = next(counts[5]);
  try {
    ds.validate();
  } catch (const UsageError& e) {
    throw ParseError(std::string("invalid dataset contents: ") + e.what());
  }
  return ds;
}

void save(const OfflineDataset& ds, const std::filesystem::path& path) {
  write_file(path.string(), serialize(ds));
}

OfflineDataset load(const std::filesystem::path& path) { return deserialize(read_file(path.string())); }

}  // namespace lspc::data
