#include "lspc/cli/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#if defined(__SSE__) || defined(__x86_64__)
#include <xmmintrin.h>
#define LSPC_HAVE_MXCSR 1
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "lspc/core/binary.hpp"
#include "lspc/core/error.hpp"
#include "lspc/dataset/behavior.hpp"
#include "lspc/dataset/metrics.hpp"
#include "lspc/env/grid_hazard.hpp"
#include "lspc/eval/evaluate.hpp"
#include "lspc/eval/experiments.hpp"
#include "lspc/eval/gradsuite.hpp"
#include "lspc/eval/theory.hpp"
#include "lspc/trainer/trainer.hpp"

namespace lspc::cli {

namespace fs = std::filesystem;

void apply_fp_mode(const char* value) {
  const std::string mode = value ? value : "strict";
  if (mode == "strict" || mode.empty()) {
#ifdef LSPC_HAVE_MXCSR
    _mm_setcsr(_mm_getcsr() & ~0x8040u);
#endif
    return;
  }
  if (mode == "fast") {
#ifdef LSPC_HAVE_MXCSR
    _mm_setcsr(_mm_getcsr() | 0x8040u);
#endif
    return;
  }
  throw UsageError("LSPC_FP_MODE must be 'strict' or 'fast', got '" + mode + "'");
}

namespace {

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string("cannot parse ") + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + " list is empty");
  return out;
}

void write_json(const std::string& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

nlohmann::json parse_json_flag(const std::string& text, const char* flag) {
  if (text.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad JSON for ") + flag + ": " + e.what());
  }
}

struct Context {
  std::ostream& out;
  std::ostream& err;
};

int cmd_collect(Context& ctx, const std::string& env_id, const std::string& overrides, const std::string& behavior,
                long long n, std::uint64_t seed, const std::string& out) {
  if (n <= 0) throw UsageError("--n must be positive");
  const auto e = env::make_environment(env_id, parse_json_flag(overrides, "--env-overrides"));
  const auto spec = data::BehaviorSpec::parse(behavior, env_id);
  const auto ds = data::collect(*e, spec, static_cast<std::size_t>(n), seed);
  data::save(ds, out);
  ctx.out << "collected " << ds.n << " transitions in " << ds.episode_count() << " episodes (safe fraction "
          << ds.safe_fraction(5.0) << " at cost <= 5) -> " << out << "\n";
  return kOk;
}

trainer::CheckpointMeta meta_for(const trainer::TrainConfig& cfg, const data::OfflineDataset& ds) {
  const auto e = env::make_environment(cfg.env, cfg.env_overrides);
  if (e->state_dim() != ds.state_dim || e->action_dim() != ds.action_dim)
    throw UsageError("dataset dimensions do not match environment " + cfg.env);
  const auto metric = data::metric_or_fallback(ds, cfg.kappa);
  return {cfg, e->id(), e->spec_json(), metric.r_min, metric.r_max};
}

int cmd_train(Context& ctx, const std::string& data_path, const std::string& config_path, const std::string& out,
              long long steps, const std::string& resume) {
  auto cfg = trainer::TrainConfig::load(config_path);
  if (steps >= 0) cfg.steps = steps;
  cfg.validate();
  const auto ds = data::load(data_path);
  auto meta = meta_for(cfg, ds);

  trainer::TrainState state;
  if (!resume.empty()) {
    auto loaded = trainer::load_checkpoint(resume);
    state = std::move(loaded.state);
    if (state.step > cfg.steps) throw UsageError("checkpoint is already past the requested step count");
  } else {
    state = trainer::initial_state(cfg, ds.state_dim, ds.action_dim);
  }

  std::unique_ptr<env::Environment> e;
  data::MetricDef metric{meta.r_min, meta.r_max, cfg.kappa, 1e-8};
  trainer::TrainOptions options;
  if (cfg.eval_every > 0) {
    e = env::make_environment(cfg.env, cfg.env_overrides);
    options.evaluator = [&](const trainer::TrainState& s) {
      nlohmann::json j;
      const std::uint64_t seed = derive_seed(cfg.seed, "eval", static_cast<std::uint64_t>(s.step));
      for (auto kind : {policy::PolicyKind::kLspcS, policy::PolicyKind::kLspcO}) {
        const auto r = eval::evaluate(s.bundle, kind, *e, cfg.eval_episodes, metric, seed);
        j[r.policy] = {{"normalized_reward", r.mean_normalized_reward}, {"normalized_cost", r.mean_normalized_cost}};
      }
      return j;
    };
  }
  const auto log = trainer::train(cfg, ds, state, options);
  trainer::save_checkpoint(out, state, meta);
  write_file((fs::path(out) / "train_log.jsonl").string(), log.to_jsonl());
  ctx.out << "trained to step " << state.step << " -> " << out << "\n";
  return kOk;
}

std::unique_ptr<env::Environment> env_for_checkpoint(const trainer::CheckpointMeta& meta, const std::string& id) {
  if (id == meta.env_id) return env::make_environment(id, meta.env_spec);
  return env::make_environment(id);
}

int cmd_eval(Context& ctx, const std::string& ckpt, const std::string& env_id, const std::string& pol, int episodes,
             double kappa, std::uint64_t seed, const std::string& out) {
  const auto kind = policy::parse_policy_kind(pol);
  if (episodes < 1) throw UsageError("--episodes must be at least 1");
  if (!(kappa > 0.0)) throw UsageError("--kappa must be positive");
  const auto loaded = trainer::load_checkpoint(ckpt);
  const auto e = env_for_checkpoint(loaded.meta, env_id);
  const data::MetricDef metric{loaded.meta.r_min, loaded.meta.r_max, kappa, 1e-8};
  const auto report = eval::evaluate(loaded.state.bundle, kind, *e, episodes, metric, seed);
  const auto j = report.to_json();
  if (out.empty()) ctx.out << j.dump(2) << "\n";
  else write_json(out, j);
  return kOk;
}

int cmd_scan(Context& ctx, const std::string& ckpt, const std::string& state_text, int samples, std::uint64_t seed,
             const std::string& out) {
  if (samples < 0) throw UsageError("--samples must be non-negative");
  const auto loaded = trainer::load_checkpoint(ckpt);
  const auto values = parse_list(state_text, "--state");
  VecD s(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) s(static_cast<Eigen::Index>(i)) = values[i];
  const auto e = env::make_environment(loaded.meta.env_id, loaded.meta.env_spec);
  if (s.size() != e->state_dim()) throw UsageError("--state has the wrong dimension for " + e->id());
  Rng rng(derive_seed(seed, "scan"));
  const auto points = policy::action_scan(loaded.state.bundle, loaded.state.critics, s, samples, e->action_box(), rng);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : points) {
    nlohmann::json row;
    row["ax"] = p.action(0);
    row["ay"] = p.action.size() > 1 ? p.action(1) : 0.0;
    row["q"] = p.q;
    row["source"] = p.source;
    rows.push_back(row);
  }
  write_json(out, rows);
  ctx.out << rows.size() << " scan points -> " << out << "\n";
  return kOk;
}

int cmd_sweep(Context& ctx, const std::string& config_path, const std::string& eps_text, int seeds, int episodes,
              const std::string& out) {
  const auto cfg = trainer::TrainConfig::load(config_path);
  cfg.validate();
  if (seeds < 1) throw UsageError("--seeds must be at least 1");
  const auto eps = parse_list(eps_text, "--eps");
  const auto e = env::make_environment(cfg.env, cfg.env_overrides);
  const auto ds = data::collect(*e, data::BehaviorSpec::parse(cfg.behavior, cfg.env),
                                static_cast<std::size_t>(cfg.n_transitions), cfg.data_seed);
  const auto metric = data::metric_or_fallback(ds, cfg.kappa);
  const auto result = eval::sweep_epsilon(cfg, ds, *e, eps, seeds, episodes > 0 ? episodes : cfg.eval_episodes, metric);
  auto j = result.to_json();
  j["config"] = cfg.to_json();
  write_json(out, j);
  ctx.out << "sweep spearman(eps, lspc-o cost) = " << j["spearman_lspc_o_cost"].dump() << " -> " << out << "\n";
  return kOk;
}

int cmd_theory(Context& ctx, const std::string& ckpt, const std::string& env_id, int samples, std::uint64_t seed,
               const std::string& out) {
  if (env_id != "grid-hazard") throw UsageError("theory checks need a tabular environment (grid-hazard)");
  const auto loaded = trainer::load_checkpoint(ckpt);
  const auto e = env_for_checkpoint(loaded.meta, env_id);
  const auto& grid = dynamic_cast<const env::GridHazard&>(*e);
  const auto& pb = loaded.state.bundle;
  if (pb.state_dim() != grid.state_dim()) throw UsageError("checkpoint was not trained on grid-hazard");
  const auto pi = eval::discretize_policy(pb, policy::PolicyKind::kLspcO, grid, samples, seed);
  const auto pi_s = eval::discretize_policy(pb, policy::PolicyKind::kLspcS, grid, samples, seed);
  const auto report = eval::theory_check(grid.model(), pi, pi_s);
  auto j = report.to_json();
  auto rows = [](const env::CategoricalPolicy& p) {
    nlohmann::json r = nlohmann::json::array();
    for (Eigen::Index s = 0; s < p.probs.rows(); ++s) {
      std::vector<double> row(static_cast<std::size_t>(p.probs.cols()));
      for (Eigen::Index a = 0; a < p.probs.cols(); ++a) row[static_cast<std::size_t>(a)] = p.probs(s, a);
      r.push_back(row);
    }
    return r;
  };
  j["policy_lspc_o"] = rows(pi);
  j["policy_lspc_s"] = rows(pi_s);
  write_json(out, j);
  ctx.out << "theory checks " << (report.all_pass() ? "pass" : "FAIL") << " -> " << out << "\n";
  if (!report.all_pass()) throw AcceptanceFailure("a theory inequality was violated");
  return kOk;
}

int cmd_gradcheck(Context& ctx, int seeds, const std::string& out) {
  if (seeds < 1) throw UsageError("--seeds must be at least 1");
  const auto suite = eval::gradient_suite(seeds);
  const auto j = suite.to_json();
  if (out.empty()) ctx.out << j.dump(2) << "\n";
  else write_json(out, j);
  if (!suite.passed())
    throw AcceptanceFailure("gradient check failed: max relative error " + std::to_string(suite.max_rel_error()));
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err};
  CLI::App app{"Latent safety-prioritized constraints toolkit", "lspc"};
  app.require_subcommand(1);

  std::string env_id, behavior, out_path, data_path, config_path, ckpt, policy_name, state_text, eps_text, resume;
  std::string overrides;
  long long n = 0, steps = -1;
  std::uint64_t seed = 0;
  int episodes = 0, samples = 0, seeds = 3;
  double kappa = 0.0;

  auto* collect = app.add_subcommand("collect", "Roll a behavior policy into an LSPC-DS dataset");
  collect->add_option("--env", env_id, "environment id")->required();
  collect->add_option("--behavior", behavior, "behavior spec")->required();
  collect->add_option("--n", n, "minimum transition count")->required();
  collect->add_option("--seed", seed, "root seed")->required();
  collect->add_option("--out", out_path, "output dataset path")->required();
  collect->add_option("--env-overrides", overrides, "JSON object of environment fields");

  auto* train = app.add_subcommand("train", "Train critics and policies on a dataset");
  train->add_option("--data", data_path, "LSPC-DS dataset")->required();
  train->add_option("--config", config_path, "JSON config")->required();
  train->add_option("--out", out_path, "checkpoint directory")->required();
  train->add_option("--steps", steps, "override config steps");
  train->add_option("--resume", resume, "checkpoint directory to continue from");

  auto* evalc = app.add_subcommand("eval", "Roll out a trained policy");
  evalc->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  evalc->add_option("--env", env_id, "environment id")->required();
  evalc->add_option("--policy", policy_name, "lspc-s, lspc-o or cvae")->required();
  evalc->add_option("--episodes", episodes, "episode count")->required();
  evalc->add_option("--kappa", kappa, "cost threshold")->required();
  evalc->add_option("--seed", seed, "root seed")->required();
  evalc->add_option("--out", out_path, "report path (stdout when omitted)");

  auto* scan = app.add_subcommand("scan", "Dump sampled actions with Q values at one state");
  scan->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  scan->add_option("--state", state_text, "comma-separated state")->required();
  scan->add_option("--samples", samples, "samples per stochastic policy")->required();
  scan->add_option("--out", out_path, "output JSON path")->required();
  scan->add_option("--seed", seed, "root seed");

  auto* sweep = app.add_subcommand("sweep", "Latent restriction sweep");
  sweep->add_option("--config", config_path, "JSON config")->required();
  sweep->add_option("--eps", eps_text, "comma-separated epsilon values")->required();
  sweep->add_option("--seeds", seeds, "number of training seeds")->required();
  sweep->add_option("--out", out_path, "output JSON path")->required();
  sweep->add_option("--episodes", episodes, "evaluation episodes (config eval_episodes when omitted)");

  auto* theory = app.add_subcommand("theory", "Verify the divergence bounds on grid-hazard");
  theory->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  theory->add_option("--env", env_id, "tabular environment id")->required();
  theory->add_option("--out", out_path, "output JSON path")->required();
  theory->add_option("--samples", samples, "action samples per state")->default_val(1000);
  theory->add_option("--seed", seed, "root seed");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad->add_option("--seeds", seeds, "number of seeds")->default_val(5);
  grad->add_option("--out", out_path, "report path (stdout when omitted)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    apply_fp_mode(std::getenv("LSPC_FP_MODE"));
    if (collect->parsed()) return cmd_collect(ctx, env_id, overrides, behavior, n, seed, out_path);
    if (train->parsed()) return cmd_train(ctx, data_path, config_path, out_path, steps, resume);
    if (evalc->parsed()) return cmd_eval(ctx, ckpt, env_id, policy_name, episodes, kappa, seed, out_path);
    if (scan->parsed()) return cmd_scan(ctx, ckpt, state_text, samples, seed, out_path);
    if (sweep->parsed()) return cmd_sweep(ctx, config_path, eps_text, seeds, episodes, out_path);
    if (theory->parsed()) return cmd_theory(ctx, ckpt, env_id, samples, seed, out_path);
    if (grad->parsed()) return cmd_gradcheck(ctx, seeds, out_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace lspc::cli
