#include <map>
#include <set>

#include "lspc/core/binary.hpp"
#include "lspc/core/error.hpp"
#include "lspc/trainer/trainer.hpp"

namespace lspc::trainer {

std::string encode_checkpoint(const std::vector<TensorEntry>& tensors) {
  nlohmann::ordered_json manifest;
  manifest["magic"] = "LSPC-CKPT";
  manifest["version"] = 1;
  manifest["tensors"] = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  std::set<std::string> seen;
  for (const auto& t : tensors) {
    if (!seen.insert(t.name).second) throw UsageError("duplicate tensor name " + t.name);
    std::int64_t count = 1;
    for (auto d : t.shape) count *= d;
    if (count != static_cast<std::int64_t>(t.values.size()))
      throw UsageError("tensor " + t.name + " shape does not match its values");
    manifest["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"len", t.values.size()}});
    offset += 4 * t.values.size();
  }
  manifest["dtype"] = "f32le";
  std::string out = manifest.dump();
  out.push_back('\n');
  out.reserve(out.size() + offset);
  for (const auto& t : tensors) append_f32le(out, t.values);
  return out;
}

std::vector<TensorEntry> decode_checkpoint(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw ParseError("checkpoint has no manifest line");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  if (!manifest.is_object() || manifest.value("magic", "") != "LSPC-CKPT") throw ParseError("bad magic");
  if (!manifest.contains("version") || manifest["version"] != 1) throw ParseError("unsupported version");
  if (manifest.value("dtype", "") != "f32le") throw ParseError("unsupported checkpoint dtype");

  const std::size_t blob = bytes.size() - nl - 1;
  const char* base = bytes.data() + nl + 1;
  std::vector<TensorEntry> out;
  std::set<std::string> seen;
  std::size_t expected = 0;
  try {
    for (const auto& t : manifest.at("tensors")) {
      TensorEntry e;
      e.name = t.at("name").get<std::string>();
      e.shape = t.at("shape").get<std::vector<std::int64_t>>();
      const auto offset = t.at("offset").get<std::size_t>();
      const auto len = t.at("len").get<std::size_t>();
      if (!seen.insert(e.name).second) throw ParseError("duplicate tensor " + e.name);
      std::int64_t count = 1;
      for (auto d : e.shape) {
        if (d < 0) throw ParseError("negative dimension in tensor " + e.name);
        count *= d;
      }
      if (count != static_cast<std::int64_t>(len)) throw ParseError("tensor " + e.name + " shape/len mismatch");
      if (offset != expected) throw ParseError("tensor " + e.name + " is not stored back-to-back");
      expected = offset + 4 * len;
      if (expected > blob) throw ParseError("truncated blob");
      e.values = read_f32le(base + offset, len);
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  if (blob != expected) throw ParseError("length mismatch");
  return out;
}

namespace {

using TensorMap = std::map<std::string, const TensorEntry*>;

template <typename M>
std::vector<float> row_major(const M& m) {
  std::vector<float> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(static_cast<float>(m(r, c)));
  return v;
}

void push_layers(std::vector<TensorEntry>& out, const std::string& prefix,
                 const std::vector<nn::DenseLayer<Real>>& layers) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    const std::string p = prefix + ".L" + std::to_string(k);
    out.push_back({p + ".w", {l.weight.rows(), l.weight.cols()}, row_major(l.weight)});
    out.push_back({p + ".b", {l.bias.size()}, row_major(l.bias)});
  }
}

const TensorEntry& require(const TensorMap& m, const std::string& name) {
  auto it = m.find(name);
  if (it == m.end()) throw ParseError("missing tensor " + name);
  return *it->second;
}

void fill(Mat<Real>& dst, const TensorEntry& e) {
  if (e.shape.size() != 2 || e.shape[0] != dst.rows() || e.shape[1] != dst.cols())
    throw ParseError("tensor " + e.name + " has an unexpected shape");
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < dst.rows(); ++r)
    for (Eigen::Index c = 0; c < dst.cols(); ++c) dst(r, c) = static_cast<Real>(e.values[i++]);
}

void fill(Vec<Real>& dst, const TensorEntry& e) {
  if (e.shape.size() != 1 || e.shape[0] != dst.size())
    throw ParseError("tensor " + e.name + " has an unexpected shape");
  for (Eigen::Index i = 0; i < dst.size(); ++i) dst(i) = static_cast<Real>(e.values[static_cast<std::size_t>(i)]);
}

nn::Mlp<Real> read_net(const TensorMap& m, const std::string& name, nn::Head head) {
  const auto& first = require(m, name + ".L0.w");
  if (first.shape.size() != 2) throw ParseError("tensor " + first.name + " must be 2-d");
  std::vector<int> sizes{static_cast<int>(first.shape[1])};
  for (int k = 0;; ++k) {
    const std::string w = name + ".L" + std::to_string(k) + ".w";
    if (!m.count(w)) break;
    const auto& e = *m.at(w);
    if (e.shape.size() != 2 || e.shape[1] != sizes.back())
      throw ParseError("tensor " + w + " does not chain with the previous layer");
    sizes.push_back(static_cast<int>(e.shape[0]));
  }
  nn::Mlp<Real> net(sizes, nn::Activation::kRelu, head);
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    const std::string p = name + ".L" + std::to_string(k);
    fill(net.layers()[k].weight, require(m, p + ".w"));
    fill(net.layers()[k].bias, require(m, p + ".b"));
  }
  return net;
}

/// Adam moments are optional; a checkpoint without them resumes with fresh moments.
void read_adam(const TensorMap& m, const std::string& group, const nn::Mlp<Real>& net, nn::AdamState<Real>& s,
               std::int64_t t) {
  s = nn::AdamState<Real>::for_net(net);
  s.t = t;
  const std::string prefix = "opt." + group;
  if (!m.count(prefix + ".m.L0.w")) return;
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    const std::string l = ".L" + std::to_string(k);
    fill(s.m.layers[k].weight, require(m, prefix + ".m" + l + ".w"));
    fill(s.m.layers[k].bias, require(m, prefix + ".m" + l + ".b"));
    fill(s.v.layers[k].weight, require(m, prefix + ".v" + l + ".w"));
    fill(s.v.layers[k].bias, require(m, prefix + ".v" + l + ".b"));
  }
}

struct AdamRef {
  const char* group;
  const nn::AdamState<Real>* state;
};

std::vector<AdamRef> adam_refs(const TrainState& s) {
  return {{"v", &s.critic_opt.v},         {"q1", &s.critic_opt.q1},         {"q2", &s.critic_opt.q2},
          {"vc", &s.critic_opt.vc},       {"qc1", &s.critic_opt.qc1},       {"qc2", &s.critic_opt.qc2},
          {"cvae_enc", &s.policy_opt.cvae_enc}, {"cvae_dec", &s.policy_opt.cvae_dec},
          {"lat_enc", &s.policy_opt.lat_enc}};
}

nlohmann::json read_json(const std::filesystem::path& p) {
  try {
    return nlohmann::json::parse(read_file(p.string()));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const TrainState& state, const CheckpointMeta& meta) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  std::vector<TensorEntry> tensors;
  state.critics.for_each([&](std::string_view n, const nn::Mlp<Real>& net) {
    push_layers(tensors, std::string(n), net.layers());
  });
  state.bundle.for_each([&](std::string_view n, const nn::Mlp<Real>& net) {
    push_layers(tensors, std::string(n), net.layers());
  });
  nlohmann::json adam_t = nlohmann::json::object();
  for (const auto& r : adam_refs(state)) {
    push_layers(tensors, std::string("opt.") + r.group + ".m", r.state->m.layers);
    push_layers(tensors, std::string("opt.") + r.group + ".v", r.state->v.layers);
    adam_t[r.group] = r.state->t;
  }
  write_file((dir / "model.ckpt").string(), encode_checkpoint(tensors));

  const auto& p = state.bundle.params;
  nlohmann::json pol;
  pol["epsilon"] = p.epsilon;
  pol["lambda"] = p.lambda;
  pol["zeta"] = p.zeta;
  pol["kl_coef"] = p.kl_coef;
  pol["w_max"] = p.w_max;
  pol["latent_dim"] = p.latent_dim;
  pol["c_zero_thresh"] = p.c_zero_thresh ? nlohmann::json(*p.c_zero_thresh) : nlohmann::json(nullptr);
  pol["truncated_normal"] = p.truncated_normal;
  write_file((dir / "policy.json").string(), pol.dump(2) + "\n");

  nlohmann::json st;
  st["step"] = state.step;
  st["adam_t"] = adam_t;
  st["critics"] = {{"xi", state.critics.xi}, {"gamma", state.critics.gamma}, {"tau", state.critics.tau}};
  st["config"] = meta.config.to_json();
  st["env"] = meta.env_id;
  st["env_spec"] = meta.env_spec;
  st["metric"] = {{"r_min", meta.r_min}, {"r_max", meta.r_max}};
  write_file((dir / "state.json").string(), st.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto tensors = decode_checkpoint(read_file((dir / "model.ckpt").string()));
  TensorMap m;
  for (const auto& t : tensors) m[t.name] = &t;
  const auto pol = read_json(dir / "policy.json");
  const auto st = read_json(dir / "state.json");

  LoadedCheckpoint out;
  try {
    auto& s = out.state;
    s.step = st.at("step").get<std::int64_t>();
    s.critics.for_each([&](std::string_view n, nn::Mlp<Real>& net) {
      net = read_net(m, std::string(n), nn::Head::kLinear);
    });
    s.bundle.for_each([&](std::string_view n, nn::Mlp<Real>& net) {
      net = read_net(m, std::string(n), nn::Head::kGaussian);
    });
    s.critics.xi = st.at("critics").at("xi").get<double>();
    s.critics.gamma = st.at("critics").at("gamma").get<double>();
    s.critics.tau = st.at("critics").at("tau").get<double>();

    auto& p = s.bundle.params;
    p.epsilon = pol.at("epsilon").get<double>();
    p.lambda = pol.at("lambda").get<double>();
    p.zeta = pol.at("zeta").get<double>();
    p.kl_coef = pol.at("kl_coef").get<double>();
    p.w_max = pol.at("w_max").get<double>();
    p.latent_dim = pol.at("latent_dim").get<int>();
    if (!pol.at("c_zero_thresh").is_null()) p.c_zero_thresh = pol.at("c_zero_thresh").get<double>();
    p.truncated_normal = pol.value("truncated_normal", false);

    const auto& at = st.at("adam_t");
    read_adam(m, "v", s.critics.v, s.critic_opt.v, at.value("v", 0));
    read_adam(m, "q1", s.critics.q1, s.critic_opt.q1, at.value("q1", 0));
    read_adam(m, "q2", s.critics.q2, s.critic_opt.q2, at.value("q2", 0));
    read_adam(m, "vc", s.critics.vc, s.critic_opt.vc, at.value("vc", 0));
    read_adam(m, "qc1", s.critics.qc1, s.critic_opt.qc1, at.value("qc1", 0));
    read_adam(m, "qc2", s.critics.qc2, s.critic_opt.qc2, at.value("qc2", 0));
    read_adam(m, "cvae_enc", s.bundle.cvae_enc, s.policy_opt.cvae_enc, at.value("cvae_enc", 0));
    read_adam(m, "cvae_dec", s.bundle.cvae_dec, s.policy_opt.cvae_dec, at.value("cvae_dec", 0));
    read_adam(m, "lat_enc", s.bundle.lat_enc, s.policy_opt.lat_enc, at.value("lat_enc", 0));

    out.meta.config = TrainConfig::from_json(st.at("config"));
    out.meta.env_id = st.at("env").get<std::string>();
    out.meta.env_spec = st.at("env_spec");
    out.meta.r_min = st.at("metric").at("r_min").get<double>();
    out.meta.r_max = st.at("metric").at("r_max").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed checkpoint sidecar: " + std::string(e.what()));
  }
  try {
    out.state.critics.validate(true);
    out.state.bundle.validate();
  } catch (const UsageError& e) {
    throw ParseError(std::string("inconsistent checkpoint: ") + e.what());
  }
  return out;
}

}  // namespace lspc::trainer
