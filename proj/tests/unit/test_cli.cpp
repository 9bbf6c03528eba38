#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "lspc/cli/cli.hpp"
#include "lspc/core/binary.hpp"
#include "lspc/core/error.hpp"

namespace fs = std::filesystem;
using namespace lspc;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "lspc");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
  auto p = fs::temp_directory_path() / ("lspc_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Cli, MissingSubcommandIsUsage) { EXPECT_EQ(run({}).code, cli::kUsage); }

TEST(Cli, UnknownFlagIsUsage) { EXPECT_EQ(run({"gradcheck", "--bogus"}).code, cli::kUsage); }

TEST(Cli, EvalWithoutCheckpointIsUsage) {
  const auto r = run({"eval", "--env", "point-hazard", "--policy", "lspc-o", "--episodes", "2", "--kappa", "5",
                      "--seed", "0"});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("--ckpt"), std::string::npos);
}

TEST(Cli, GradcheckPasses) {
  const auto dir = fresh("grad");
  const auto r = run({"gradcheck", "--seeds", "1", "--out", (dir / "g.json").string()});
  EXPECT_EQ(r.code, cli::kOk) << r.err;
  const auto j = nlohmann::json::parse(read_file((dir / "g.json").string()));
  EXPECT_LT(j["max_rel_error"].get<double>(), 1e-4);
}

TEST(Cli, MissingDataFileIsIo) {
  const auto dir = fresh("io");
  write_file((dir / "c.json").string(), "{\"steps\": 1}");
  const auto r = run({"train", "--data", (dir / "none.bin").string(), "--config", (dir / "c.json").string(), "--out",
                      (dir / "ck").string()});
  EXPECT_EQ(r.code, cli::kIo);
}

TEST(Cli, BadConfigIsIo) {
  const auto dir = fresh("cfg");
  ASSERT_EQ(run({"collect", "--env", "grid-hazard", "--behavior", "uniform", "--n", "50", "--seed", "1", "--out",
                 (dir / "d.bin").string()})
                .code,
            0);
  write_file((dir / "c.json").string(), "{\"stepz\": 1}");
  const auto r = run({"train", "--data", (dir / "d.bin").string(), "--config", (dir / "c.json").string(), "--out",
                      (dir / "ck").string()});
  EXPECT_EQ(r.code, cli::kIo);
}

TEST(Cli, CollectTrainEvalScanPipeline) {
  const auto dir = fresh("pipe");
  const auto data = (dir / "d.bin").string();
  ASSERT_EQ(run({"collect", "--env", "point-hazard", "--behavior", "mixture:0.5", "--n", "600", "--seed", "3",
                 "--out", data})
                .code,
            0);
  write_file((dir / "c.json").string(),
             R"({"steps": 20, "batch_size": 16, "width": 8, "latent_dim": 2, "eval_every": 10, "eval_episodes": 1})");
  const auto ck = (dir / "ck").string();
  const auto t = run({"train", "--data", data, "--config", (dir / "c.json").string(), "--out", ck});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(dir / "ck" / "model.ckpt"));

  const auto e = run({"eval", "--ckpt", ck, "--env", "point-hazard", "--policy", "lspc-s", "--episodes", "2",
                      "--kappa", "5", "--seed", "1"});
  ASSERT_EQ(e.code, 0) << e.err;
  const auto report = nlohmann::json::parse(e.out);
  EXPECT_EQ(report["n_episodes"], 2);

  const auto scan = (dir / "scan.json").string();
  ASSERT_EQ(run({"scan", "--ckpt", ck, "--state", "0.1,-0.2", "--samples", "4", "--out", scan}).code, 0);
  const auto rows = nlohmann::json::parse(read_file(scan));
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_TRUE(rows[0].contains("ax"));
  EXPECT_EQ(rows[8]["source"], "lspc_o");

  EXPECT_EQ(run({"eval", "--ckpt", ck, "--env", "point-hazard", "--policy", "greedy", "--episodes", "2", "--kappa",
                 "5", "--seed", "1"})
                .code,
            cli::kUsage);
  EXPECT_EQ(run({"scan", "--ckpt", ck, "--state", "0.1", "--samples", "4", "--out", scan}).code, cli::kUsage);
}

TEST(Cli, FpModeValues) {
  EXPECT_NO_THROW(cli::apply_fp_mode(nullptr));
  EXPECT_NO_THROW(cli::apply_fp_mode("strict"));
  EXPECT_NO_THROW(cli::apply_fp_mode("fast"));
  EXPECT_THROW(cli::apply_fp_mode("loose"), UsageError);
  cli::apply_fp_mode("strict");
}
