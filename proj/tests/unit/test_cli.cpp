#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "test_support.hpp"

namespace teprompt {
namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> small(const std::filesystem::path& dir) {
  return {"-o", dir.string(), "--num-train", "80", "--num-test", "30", "--epochs", "2", "--d-h", "8", "--layers", "1"};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run({}).code, cli::kConfigError);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kConfigError);
  EXPECT_EQ(run({"train", "--epochs", "many"}).code, cli::kConfigError);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
}

TEST(Cli, UnknownVariantListsTheLegalNames) {
  const auto dir = testing::temp_dir("cli_variant");
  const auto r = run(cat({"train", "--variant", "bogus"}, small(dir)));
  EXPECT_EQ(r.code, cli::kConfigError);
  for (const char* name : {"teprompt", "drr_only", "ssc_only", "acp_only", "teprompt_ssc_head", "teprompt_acp_head",
                           "teprompt_no_gate", "drr_plus_ssc", "drr_plus_acp"}) {
    EXPECT_NE(r.err.find(name), std::string::npos) << name;
  }
}

TEST(Cli, PrepareIsDeterministic) {
  const auto a = testing::temp_dir("cli_prepare_a"), b = testing::temp_dir("cli_prepare_b");
  ASSERT_EQ(run(cat({"prepare"}, small(a))).code, cli::kOk);
  ASSERT_EQ(run(cat({"prepare"}, small(b))).code, cli::kOk);
  EXPECT_EQ(slurp(a / "corpus" / "manifest.json"), slurp(b / "corpus" / "manifest.json"));
  EXPECT_EQ(slurp(a / "corpus" / "train.jsonl"), slurp(b / "corpus" / "train.jsonl"));
  const auto manifest = nlohmann::json::parse(slurp(a / "corpus" / "manifest.json"));
  EXPECT_FALSE(manifest.empty());
}

TEST(Cli, TrainEvaluateInspect) {
  const auto dir = testing::temp_dir("cli_train");
  const auto t = run(cat({"train"}, small(dir)));
  ASSERT_EQ(t.code, cli::kOk) << t.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint" / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "train_log.jsonl"));
  EXPECT_TRUE(std::filesystem::exists(dir / "train.config.json"));

  const auto e = run({"evaluate", "-o", dir.string()});
  ASSERT_EQ(e.code, cli::kOk) << e.err;
  const auto report = nlohmann::json::parse(slurp(dir / "report_test.json"));
  EXPECT_EQ(report["variant"], "teprompt");
  EXPECT_EQ(report["total"], 30);

  const auto i = run({"inspect", "-o", dir.string(), "--arg1", "it rained all day", "--arg2", "the match was off"});
  ASSERT_EQ(i.code, cli::kOk) << i.err;
  EXPECT_NE(i.out.find("[MASK]"), std::string::npos);
  EXPECT_NE(i.out.find("similarly"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "inspect_states.csv"));

  EXPECT_EQ(run({"inspect", "-o", dir.string(), "--arg1", "", "--arg2", "x"}).code, cli::kRuntimeError);
}

TEST(Cli, MissingCheckpointIsARuntimeError) {
  const auto dir = testing::temp_dir("cli_nockpt");
  const auto r = run({"evaluate", "-o", dir.string(), "--checkpoint", (dir / "nope").string()});
  EXPECT_EQ(r.code, cli::kRuntimeError);
  EXPECT_NE(r.err.find("nope"), std::string::npos) << r.err;
}

TEST(Cli, RerunFromResolvedConfigIsBitIdentical) {
  const auto a = testing::temp_dir("cli_rerun_a"), b = testing::temp_dir("cli_rerun_b");
  ASSERT_EQ(run(cat({"train", "--seed", "3"}, small(a))).code, cli::kOk);
  ASSERT_EQ(run({"train", "-c", (a / "train.config.json").string(), "-o", b.string()}).code, cli::kOk);
  EXPECT_EQ(slurp(a / "checkpoint" / "weights.safetensors"), slurp(b / "checkpoint" / "weights.safetensors"));
  ASSERT_EQ(run({"evaluate", "-o", a.string()}).code, cli::kOk);
  ASSERT_EQ(run({"evaluate", "-o", b.string()}).code, cli::kOk);
  auto ra = nlohmann::json::parse(slurp(a / "report_test.json"));
  auto rb = nlohmann::json::parse(slurp(b / "report_test.json"));
  ra.erase("config_hash");
  rb.erase("config_hash");
  EXPECT_EQ(ra, rb);
}

TEST(Cli, AblateWritesTablesForTheSelectedVariants) {
  const auto dir = testing::temp_dir("cli_ablate");
  auto args = cat({"ablate", "--only", "drr_only", "teprompt"}, small(dir));
  args[args.size() - 5] = "1";  // one epoch
  const auto r = run(args);
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto j = nlohmann::json::parse(slurp(dir / "ablation.json"));
  EXPECT_EQ(j["complete"], true);
  const auto csv = slurp(dir / "ablation_groups.csv");
  EXPECT_NE(csv.find("DRR,drr_only"), std::string::npos);
  EXPECT_NE(csv.find("DRR+SSC+ACP,teprompt"), std::string::npos);
  EXPECT_NE(slurp(dir / "ablation.txt").find("dF1_vs_drr"), std::string::npos);
}

}  // namespace
}  // namespace teprompt
