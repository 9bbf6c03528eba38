#include <gtest/gtest.h>

#include <filesystem>

#include "lspc/core/binary.hpp"
#include "lspc/core/error.hpp"
#include "lspc/dataset/behavior.hpp"
#include "lspc/env/environment.hpp"
#include "lspc/trainer/trainer.hpp"

using namespace lspc;
using namespace lspc::trainer;

namespace {

TrainConfig small_config() {
  auto c = TrainConfig::from_json(
      {{"steps", 40}, {"batch_size", 32}, {"width", 16}, {"latent_dim", 3}, {"seed", 5}, {"critic_warmup_steps", 3}});
  return c;
}

const data::OfflineDataset& dataset() {
  static const auto ds = [] {
    const auto e = env::make_environment("point-hazard");
    return data::collect(*e, data::BehaviorSpec::parse("mixture:0.5", "point-hazard"), 1500, 1);
  }();
  return ds;
}

std::vector<float> flatten(const TrainState& s) {
  std::vector<float> out;
  auto add = [&](std::string_view, const nn::Mlp<Real>& m) {
    for (const auto& l : m.layers()) {
      out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
      out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
  };
  s.critics.for_each(add);
  s.bundle.for_each(add);
  return out;
}

std::vector<float> flatten_critics(const Critics& cs) {
  std::vector<float> out;
  cs.for_each([&](std::string_view, const nn::Mlp<Real>& m) {
    for (const auto& l : m.layers()) {
      out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
      out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
  });
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("lspc_trainer_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, UnknownKeyRejected) {
  EXPECT_THROW(TrainConfig::from_json({{"stepz", 3}}), ParseError);
  EXPECT_THROW(TrainConfig::from_json({{"profile", "huge"}}), ParseError);
  EXPECT_THROW(TrainConfig::from_json({{"lr", "fast"}}), ParseError);
}

TEST(Config, ProfilesAndRoundTrip) {
  const auto p = TrainConfig::from_json({{"profile", "paper"}, {"width", 32}});
  EXPECT_EQ(p.batch_size, 1024);
  EXPECT_EQ(p.latent_dim, 32);
  EXPECT_EQ(p.width, 32);
  EXPECT_EQ(TrainConfig::from_json(p.to_json()).to_json(), p.to_json());
}

TEST(Config, ValidationRanges) {
  auto c = small_config();
  c.xi = 0.5;
  EXPECT_THROW(c.validate(), UsageError);
  c.ablation = true;
  EXPECT_NO_THROW(c.validate());
  c = small_config();
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(Train, ZeroStepsReturnsInitialState) {
  auto c = small_config();
  c.steps = 0;
  const auto r = train(c, dataset());
  EXPECT_EQ(r.state.step, 0);
  EXPECT_EQ(flatten(r.state), flatten(initial_state(c, 2, 2)));
  EXPECT_TRUE(r.log.records.empty());
}

TEST(Train, DeterministicPerSeed) {
  const auto c = small_config();
  const auto a = train(c, dataset()), b = train(c, dataset());
  EXPECT_EQ(flatten(a.state), flatten(b.state));
  auto other = c;
  other.seed = 6;
  EXPECT_NE(flatten(train(other, dataset()).state), flatten(a.state));
}

TEST(Train, ResumeIsBitwise) {
  auto c = small_config();
  const auto straight = train(c, dataset());
  auto half = c;
  half.steps = 17;
  auto r = train(half, dataset());
  const auto dir = temp_dir("resume");
  save_checkpoint(dir, r.state, {half, "point-hazard", {}, 0.0, 1.0});
  auto loaded = load_checkpoint(dir);
  EXPECT_EQ(loaded.state.step, 17);
  train(c, dataset(), loaded.state);
  EXPECT_EQ(flatten(loaded.state), flatten(straight.state));
  std::filesystem::remove_all(dir);
}

TEST(Train, StepOrder) {
  const auto c = small_config();
  std::vector<std::string> names;
  TrainOptions opt;
  opt.observer = [&](std::string_view n) { names.emplace_back(n); };
  auto cfg = c;
  cfg.steps = 5;
  train(cfg, dataset(), opt);
  const std::vector<std::string> warm{"v", "q", "vc", "qc", "targets"};
  const std::vector<std::string> full{"v", "q", "vc", "qc", "cvae", "lat_enc", "targets"};
  std::vector<std::string> expected;
  for (int t = 0; t < 5; ++t) {
    const auto& seq = t < cfg.critic_warmup_steps ? warm : full;
    expected.insert(expected.end(), seq.begin(), seq.end());
  }
  EXPECT_EQ(names, expected);
}

TEST(Train, PolicyStepsLeaveCriticsUntouched) {
  const auto c = small_config();
  TrainState state = initial_state(c, 2, 2);
  std::vector<float> snapshot;
  int checked = 0;
  TrainOptions opt;
  opt.observer = [&](std::string_view n) {
    if (n == "qc") snapshot = flatten_critics(state.critics);
    if (n == "cvae" || n == "lat_enc") {
      EXPECT_EQ(flatten_critics(state.critics), snapshot);
      ++checked;
    }
  };
  train(c, dataset(), state, opt);
  EXPECT_EQ(checked, 2 * (c.steps - c.critic_warmup_steps));
}

TEST(Train, EvaluatorRecordsAtInterval) {
  auto c = small_config();
  c.eval_every = 10;
  int calls = 0;
  TrainOptions opt;
  opt.evaluator = [&](const TrainState& s) {
    ++calls;
    return nlohmann::json{{"step", s.step}};
  };
  const auto r = train(c, dataset(), opt);
  EXPECT_EQ(calls, 4);
  ASSERT_EQ(r.log.records.size(), 4u);
  EXPECT_EQ(r.log.records[1].step, 20);
  EXPECT_EQ(r.log.records[1].eval["step"], 20);
  const auto lines = r.log.to_jsonl();
  EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 4);
}

TEST(Train, EmptyDatasetRejected) {
  EXPECT_THROW(train(small_config(), data::OfflineDataset{}), UsageError);
}

TEST(TrainFamily, MembersMatchSeparateRuns) {
  const auto c = small_config();
  const std::vector<double> eps{0.1, 0.5, 1.0};
  const auto family = train_family(c, dataset(), eps);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    auto ci = c;
    ci.epsilon = eps[i];
    EXPECT_EQ(flatten(family[i]), flatten(train(ci, dataset()).state)) << "epsilon " << eps[i];
    EXPECT_EQ(family[i].bundle.params.epsilon, eps[i]);
  }
}

TEST(Checkpoint, SaveLoadSaveIsBitwise) {
  const auto r = train(small_config(), dataset());
  const auto a = temp_dir("ckpt_a"), b = temp_dir("ckpt_b");
  save_checkpoint(a, r.state, {small_config(), "point-hazard", {{"box", 1.0}}, -3.0, 7.0});
  const auto loaded = load_checkpoint(a);
  save_checkpoint(b, loaded.state, loaded.meta);
  for (const char* f : {"model.ckpt", "policy.json", "state.json"})
    EXPECT_EQ(read_file((a / f).string()), read_file((b / f).string())) << f;
  EXPECT_EQ(loaded.meta.r_min, -3.0);
  EXPECT_EQ(loaded.meta.r_max, 7.0);
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST(Checkpoint, TensorCodecAndErrors) {
  const std::vector<TensorEntry> t{{"q1.L0.w", {2, 1}, {1.5f, -2.0f}}, {"q1.L0.b", {2}, {0.0f, 3.0f}}};
  const auto bytes = encode_checkpoint(t);
  const auto back = decode_checkpoint(bytes);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].values, t[0].values);
  EXPECT_EQ(back[1].shape, t[1].shape);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 2)), ParseError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt"), IoError);
}
