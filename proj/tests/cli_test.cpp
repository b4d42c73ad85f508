#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "test_support.hpp"

namespace consprompt {
namespace {

namespace fs = std::filesystem;
using testing::read_text;
using testing::scratch_dir;
using testing::write_text;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "consprompt");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path toy_dir(const std::string& name, std::size_t size = 400) {
  const auto dir = scratch_dir(name);
  testing::write_toy_task_dir(dir, separable_task(size, 1), 200);
  return dir;
}

std::vector<std::string> quick_run_flags(const fs::path& data, const fs::path& out) {
  return {"--task", "toy", "--data-dir", data.string(), "--out-dir", out.string(), "--k", "8",
          "--seeds", "1,2", "--max-steps", "20", "--eval-every", "10", "--lr", "0.5"};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

TEST(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, cli::kOk);
  EXPECT_NE(r.out.find("sweep-kshot"), std::string::npos);
}

TEST(Cli, UnknownFlagsAndCommandsAreConfigErrors) {
  EXPECT_EQ(run({"train", "--no-such-flag"}).code, cli::kConfigError);
  EXPECT_EQ(run({"fly"}).code, cli::kConfigError);
  EXPECT_EQ(run({}).code, cli::kConfigError);
  EXPECT_EQ(run({"train", "--strategy", "random"}).code, cli::kConfigError);
}

TEST(Cli, SplitWritesOneManifestPerSeedAndIsIdempotent) {
  const auto data = toy_dir("cli-split");
  const auto out = data / "out";
  const std::vector<std::string> args{"split", "--task", "toy", "--data-dir", data.string(),
                                      "--k", "16", "--seeds", "13,21,42,87,100", "--out-dir",
                                      out.string()};
  ASSERT_EQ(run(args).code, cli::kOk);
  std::vector<std::string> first;
  for (const auto seed : {13, 21, 42, 87, 100}) {
    const auto path = out / "manifests" / ("k16-seed" + std::to_string(seed) + ".json");
    ASSERT_TRUE(fs::exists(path));
    first.push_back(read_text(path));
  }
  ASSERT_EQ(run(args).code, cli::kOk);
  std::size_t i = 0;
  for (const auto seed : {13, 21, 42, 87, 100})
    EXPECT_EQ(read_text(out / "manifests" / ("k16-seed" + std::to_string(seed) + ".json")),
              first[i++]);
}

TEST(Cli, CapacityErrorNamesTheLabelAndExitsWithDataCode) {
  const auto data = toy_dir("cli-capacity", 40);
  const auto r = run({"split", "--task", "toy", "--data-dir", data.string(), "--k", "16",
                      "--seeds", "1", "--out-dir", (data / "out").string()});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_TRUE(r.err.find("negative") != std::string::npos ||
              r.err.find("positive") != std::string::npos)
      << r.err;
}

TEST(Cli, MissingDataAndBadTemplatesMapToTheirCodes) {
  const auto data = toy_dir("cli-errors");
  EXPECT_EQ(run({"split", "--task", "toy", "--data-dir", (data / "nope").string(), "--out-dir",
                 (data / "o").string()})
                .code,
            cli::kDataError);
  EXPECT_EQ(run({"split", "--task", "imagenet", "--data-dir", data.string(), "--out-dir",
                 (data / "o").string()})
                .code,
            cli::kConfigError);
  write_text(data / "templates.tsv", "t0\t{input} no mask here\n");
  const auto bad_template = run(cat({"train"}, quick_run_flags(data, data / "o")));
  EXPECT_EQ(bad_template.code, cli::kDataError);
  EXPECT_NE(bad_template.err.find(":1"), std::string::npos) << bad_template.err;
  write_text(data / "templates.tsv", "t0\t{input} It is {mask}\n");
  write_text(data / "verbalizer.tsv", "negative\tterrible\n");
  EXPECT_EQ(run(cat({"train"}, quick_run_flags(data, data / "o"))).code, cli::kConfigError);
}

TEST(Cli, TrainWritesACompleteRunDirectory) {
  const auto data = toy_dir("cli-train");
  const auto out = data / "run";
  const auto r = run(cat({"train"}, quick_run_flags(data, out)));
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  for (const char* f : {"config.json", "metrics.jsonl", "report.json", "report.txt",
                        "manifests/k8-seed1.json", "manifests/k8-seed2.json",
                        "checkpoints/seed-1.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;

  const auto cfg = nlohmann::json::parse(read_text(out / "config.json"));
  EXPECT_EQ(cfg["k"], 8);
  EXPECT_EQ(cfg["max_steps"], 20);

  std::istringstream metrics(read_text(out / "metrics.jsonl"));
  std::string line;
  std::size_t steps = 0, seeds = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j["type"] == "step") {
      ++steps;
      EXPECT_TRUE(j.contains("skipped_bc"));
    }
    if (j["type"] == "seed_result") ++seeds;
  }
  EXPECT_EQ(steps, 40u);
  EXPECT_EQ(seeds, 2u);

  const auto report = run({"report", "--run-dir", out.string()});
  EXPECT_EQ(report.code, cli::kOk);
  EXPECT_EQ(report.out, read_text(out / "report.txt"));

  const auto eval = run({"eval", "--run-dir", out.string()});
  EXPECT_EQ(eval.code, cli::kOk) << eval.err;
  EXPECT_NE(eval.out.find("seed 1:"), std::string::npos);
}

TEST(Cli, ConfigFileIsOverriddenByFlags) {
  const auto data = toy_dir("cli-config");
  write_text(data / "base.json", R"({"task": "toy", "k": 4, "max_steps": 5, "seeds": [3]})");
  const auto out = data / "run";
  ASSERT_EQ(run({"train", "--config", (data / "base.json").string(), "--data-dir",
                 data.string(), "--k", "6", "--out-dir", out.string()})
                .code,
            cli::kOk);
  const auto cfg = nlohmann::json::parse(read_text(out / "config.json"));
  EXPECT_EQ(cfg["k"], 6);
  EXPECT_EQ(cfg["max_steps"], 5);
  EXPECT_EQ(cfg["seeds"], nlohmann::json::array({3}));

  write_text(data / "bad.json", R"({"task": "toy", "learning_rate": 3})");
  EXPECT_EQ(run({"train", "--config", (data / "bad.json").string(), "--data-dir", data.string(),
                 "--out-dir", out.string()})
                .code,
            cli::kConfigError);
}

TEST(Cli, OutputRootComesFromEnvironment) {
  const auto data = toy_dir("cli-env");
  const auto root = data / "root";
  ::setenv(cli::kOutputRootEnv, root.string().c_str(), 1);
  const auto r = run({"split", "--task", "toy", "--data-dir", data.string(), "--k", "4",
                      "--seeds", "1"});
  ::unsetenv(cli::kOutputRootEnv);
  ASSERT_EQ(r.code, cli::kOk);
  EXPECT_TRUE(fs::exists(root / "split-toy" / "manifests" / "k4-seed1.json"));
}

TEST(Cli, SweepRatioSingleValueAndReportRebuild) {
  const auto data = toy_dir("cli-ratio");
  const auto out = data / "sweep";
  const auto r = run(cat({"sweep-ratio", "--values", "0.5"}, quick_run_flags(data, out)));
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
  const auto rebuilt = run({"report", "--run-dir", out.string()});
  EXPECT_EQ(rebuilt.out, r.out);
  EXPECT_EQ(read_text(out / "table.txt"), r.out);
}

TEST(Cli, SweepKShotNamesTheFailingK) {
  const auto data = toy_dir("cli-kshot", 100);
  const auto r = run(cat({"sweep-kshot", "--k-values", "4,40"}, quick_run_flags(data, data / "o")));
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("K=40"), std::string::npos) << r.err;
}

TEST(Cli, SweepKShotSingleRow) {
  const auto data = toy_dir("cli-kshot-one");
  const auto out = data / "sweep";
  const auto r = run(cat({"sweep-kshot", "--k-values", "4", "--jobs", "2"},
                         quick_run_flags(data, out)));
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
  EXPECT_TRUE(fs::exists(out / "runs" / "k4-sim" / "report.json"));
  EXPECT_TRUE(fs::exists(out / "runs" / "k4-label" / "report.json"));
}

}  // namespace
}  // namespace consprompt
