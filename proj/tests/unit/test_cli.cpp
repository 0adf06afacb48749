#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "cli.hpp"
#include "hcrnn/error.hpp"

namespace {

namespace fs = std::filesystem;
using hcrnn::cli::run;
using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::vector<json> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<json> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

// Shared dataset and a briefly trained tiny checkpoint.
class CliTest : public ::testing::Test {
 protected:
  static fs::path root;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / ("hcrnn_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    ASSERT_EQ(run({"synth", "--frames", "12", "--topology", "icvl", "--seed", "4", "--output", (root / "data").string()}),
              0);
    ASSERT_EQ(run({"train", "--manifest", (root / "data" / "manifest.jsonl").string(), "--topology", "icvl", "--model",
                   "tiny", "--batch-size", "4", "--max-iterations", "3", "--output", (root / "train").string()}),
              0);
  }
  static void TearDownTestSuite() { fs::remove_all(root); }

  static fs::path manifest() { return root / "data" / "manifest.jsonl"; }
  static fs::path checkpoint() { return root / "train" / "model.ckpt"; }
};

fs::path CliTest::root;

TEST_F(CliTest, TrainWritesArtifacts) {
  EXPECT_TRUE(fs::exists(checkpoint()));
  const auto log = read_lines(root / "train" / "loss_log.jsonl");
  ASSERT_EQ(log.size(), 3u);
  EXPECT_EQ(log.back()["iteration"].get<int>(), 3);
  const json cfg = read_json(root / "train" / "config.json");
  EXPECT_EQ(cfg["model"], "tiny");
  EXPECT_EQ(cfg["train"]["batch_size"], 4);
  EXPECT_EQ(cfg["topology"]["name"], "icvl");
}

TEST_F(CliTest, InferThenEvalMatchesDirectEval) {
  const fs::path inf = root / "infer", ev1 = root / "eval_pred", ev2 = root / "eval_ckpt";
  ASSERT_EQ(run({"infer", "--checkpoint", checkpoint().string(), "--input", manifest().string(), "--output",
                 inf.string()}),
            0);
  const auto preds = read_lines(inf / "predictions.jsonl");
  ASSERT_EQ(preds.size(), 12u);
  EXPECT_EQ(preds[0]["joints_mm"].size(), 48u);
  ASSERT_EQ(run({"eval", "--predictions", (inf / "predictions.jsonl").string(), "--manifest", manifest().string(),
                 "--output", ev1.string()}),
            0);
  ASSERT_EQ(run({"eval", "--checkpoint", checkpoint().string(), "--manifest", manifest().string(), "--timed-frames",
                 "0", "--output", ev2.string()}),
            0);
  const json a = read_json(ev1 / "report.json"), b = read_json(ev2 / "report.json");
  EXPECT_EQ(a["frames"], 12);
  EXPECT_NEAR(a["mean_error_mm"].get<double>(), b["mean_error_mm"].get<double>(), 1e-6);
  EXPECT_GT(a["mean_error_mm"].get<double>(), 0.0);
  EXPECT_TRUE(fs::exists(ev1 / "success_curve.csv"));
  EXPECT_EQ(a["success_curve"].size(), 41u);
}

TEST_F(CliTest, CorruptDepthFileGivesErrorRecord) {
  const fs::path copy = root / "corrupt";
  fs::copy(root / "data", copy, fs::copy_options::recursive);
  {
    std::ofstream broken(copy / "depth" / "000002.raw", std::ios::binary | std::ios::trunc);
    broken << "junk";
  }
  const fs::path out = root / "infer_corrupt";
  ASSERT_EQ(run({"infer", "--checkpoint", checkpoint().string(), "--input", (copy / "manifest.jsonl").string(),
                 "--output", out.string()}),
            0);
  const auto preds = read_lines(out / "predictions.jsonl");
  ASSERT_EQ(preds.size(), 12u);
  EXPECT_TRUE(preds[2].contains("error"));
  EXPECT_FALSE(preds[2].contains("joints_mm"));
  EXPECT_TRUE(preds[3].contains("joints_mm"));
  ASSERT_EQ(run({"eval", "--predictions", (out / "predictions.jsonl").string(), "--manifest",
                 (copy / "manifest.jsonl").string(), "--output", (root / "eval_corrupt").string()}),
            0);
  EXPECT_EQ(read_json(root / "eval_corrupt" / "report.json")["frames"], 11);
}

TEST_F(CliTest, InferSingleDepthFile) {
  const fs::path out = root / "infer_one";
  ASSERT_EQ(run({"infer", "--checkpoint", checkpoint().string(), "--input",
                 (root / "data" / "depth" / "000000.raw").string(), "--output", out.string()}),
            0);
  const auto preds = read_lines(out / "predictions.jsonl");
  ASSERT_EQ(preds.size(), 1u);
  EXPECT_EQ(preds[0]["joints_mm"].size(), 48u);
}

TEST_F(CliTest, BenchReportsThroughput) {
  const fs::path out = root / "bench";
  ASSERT_EQ(run({"bench", "--checkpoint", checkpoint().string(), "--iterations", "6", "--warmup", "1", "--output",
                 out.string()}),
            0);
  const json b = read_json(out / "bench.json");
  EXPECT_GT(b["throughput"]["fps"].get<double>(), 0.0);
  EXPECT_GE(b["throughput"]["p99_ms"].get<double>(), b["throughput"]["p50_ms"].get<double>());
  EXPECT_EQ(b["throughput"]["frames"], 6);
  EXPECT_EQ(b["batch"], 1);
}

TEST_F(CliTest, SynthIsByteIdenticalForASeed) {
  const fs::path a = root / "synth_a", b = root / "synth_b";
  for (const fs::path& d : {a, b}) {
    ASSERT_EQ(run({"synth", "--frames", "3", "--seed", "9", "--synth-noise-mm", "1.5", "--output", d.string()}), 0);
  }
  EXPECT_EQ(slurp(a / "manifest.jsonl"), slurp(b / "manifest.jsonl"));
  EXPECT_EQ(slurp(a / "topology.json"), slurp(b / "topology.json"));
  for (const char* f : {"000000.raw", "000001.raw", "000002.raw"}) {
    EXPECT_EQ(slurp(a / "depth" / f), slurp(b / "depth" / f)) << f;
  }
  const fs::path c = root / "synth_c";
  ASSERT_EQ(run({"synth", "--frames", "3", "--seed", "10", "--output", c.string()}), 0);
  EXPECT_NE(slurp(a / "depth" / "000000.raw"), slurp(c / "depth" / "000000.raw"));
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({"synth", "--frames", "0", "--output", (root / "none").string()}), hcrnn::cli::kUsage);
  EXPECT_EQ(run({}), hcrnn::cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}), hcrnn::cli::kUsage);
  EXPECT_EQ(run({"--version"}), hcrnn::cli::kOk);

  const std::string missing = (root / "no_such_manifest.jsonl").string();
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run({"train", "--manifest", missing, "--output", (root / "t2").string()}), hcrnn::cli::kUsage);
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_NE(err.find(missing), std::string::npos) << err;

  // malformed manifest record: a data error
  const fs::path bad = root / "bad_manifest.jsonl";
  {
    std::ofstream out(bad);
    out << slurp(manifest()).substr(0, slurp(manifest()).find('\n') + 1) << "{not json\n";
  }
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run({"eval", "--checkpoint", checkpoint().string(), "--manifest", bad.string(), "--output",
                 (root / "e3").string()}),
            hcrnn::cli::kData);
  EXPECT_NE(::testing::internal::GetCapturedStderr().find("line 2"), std::string::npos);

  EXPECT_EQ(run({"eval", "--manifest", manifest().string()}), hcrnn::cli::kUsage);
  EXPECT_EQ(run({"bench", "--model", "huge"}), hcrnn::cli::kUsage);
  EXPECT_EQ(run({"train", "--synth-frames", "4", "--variant", "three_branch"}), hcrnn::cli::kUsage);
}

TEST_F(CliTest, UnknownConfigKeysAreRejected) {
  const fs::path cfg = root / "bad_config.json";
  for (const json& doc : {json{{"bogus", 1}}, json{{"train", {{"lr", 0.1}}}}, json{{"data", {{"synth", {{"n", 3}}}}}},
                          json{{"model", {{"depth", 3}}}}}) {
    std::ofstream(cfg) << doc.dump();
    EXPECT_EQ(run({"synth", "--config", cfg.string(), "--frames", "1", "--output", (root / "x").string()}),
              hcrnn::cli::kUsage)
        << doc.dump();
  }
  EXPECT_THROW(hcrnn::cli::experiment_from_json(json{{"bogus", 1}}), hcrnn::ConfigError);
}

TEST_F(CliTest, FlagsOverrideConfig) {
  const fs::path cfg = root / "override.json";
  std::ofstream(cfg) << json{{"train", {{"lr0", 0.5}, {"batch_size", 7}}},
                             {"seed", 3},
                             {"topology", "nyu"},
                             {"cube_size", 250}}
                            .dump();
  const fs::path out = root / "override_out";
  ASSERT_EQ(run({"synth", "--config", cfg.string(), "--seed", "5", "--topology", "icvl", "--frames", "1", "--output",
                 out.string()}),
            0);
  const json resolved = read_json(out / "config.json");
  EXPECT_EQ(resolved["seed"], 5);
  EXPECT_EQ(resolved["topology"]["name"], "icvl");
  EXPECT_EQ(resolved["cube_size"].get<double>(), 250.0);
  EXPECT_EQ(resolved["train"]["lr0"].get<double>(), 0.5);
  EXPECT_EQ(resolved["train"]["batch_size"], 7);

  // the resolved config loads back to the same experiment
  const auto back = hcrnn::cli::load_experiment(out / "config.json");
  EXPECT_EQ(back.seed, 5u);
  EXPECT_EQ(back.topology, hcrnn::JointTopology::preset("icvl"));
  EXPECT_EQ(hcrnn::cli::to_json(back), resolved);

  // training flags override the config's training block
  std::ofstream(cfg) << json{{"train", {{"lr0", 0.5}, {"batch_size", 7}}},
                             {"model", "tiny"},
                             {"data", {{"synth", {{"frames", 4}}}}}}
                            .dump();
  const fs::path trained = root / "override_train";
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--lr0", "0.01", "--batch-size", "2", "--max-iterations", "1",
                 "--output", trained.string()}),
            0);
  const json t = read_json(trained / "config.json");
  EXPECT_EQ(t["train"]["lr0"].get<double>(), 0.01);
  EXPECT_EQ(t["train"]["batch_size"], 2);
  EXPECT_EQ(t["data"]["synth"]["frames"], 4);
  EXPECT_EQ(read_lines(trained / "loss_log.jsonl").size(), 1u);
}

TEST(Cli, DefaultsMatchTrainingHyperparameters) {
  const hcrnn::cli::ExperimentConfig c;
  EXPECT_EQ(c.train.lr0, 1e-3);
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_EQ(c.train.weight_decay, 1e-5);
  EXPECT_EQ(c.train.lr_decay, 0.96);
  EXPECT_EQ(c.train.decay_every, 2000u);
  EXPECT_EQ(c.train.epochs, 120u);
  EXPECT_EQ(c.train.lambda, 1.0);
  EXPECT_EQ(c.model_config, hcrnn::ModelConfig::reference());
  EXPECT_EQ(c.variant, hcrnn::Variant::full);
  EXPECT_EQ(c.cube_size, 300);
}

TEST(Cli, ParseThresholds) {
  const auto r = hcrnn::cli::parse_thresholds("0:80:2");
  ASSERT_EQ(r.size(), 41u);
  EXPECT_EQ(r[40], 80.0);
  EXPECT_EQ(hcrnn::cli::parse_thresholds("5,10,20"), (std::vector<double>{5, 10, 20}));
  EXPECT_EQ(hcrnn::cli::parse_thresholds("0:1:0.25").size(), 5u);
  EXPECT_THROW(hcrnn::cli::parse_thresholds("abc"), hcrnn::ConfigError);
  EXPECT_THROW(hcrnn::cli::parse_thresholds("10:0:1"), hcrnn::ConfigError);
  EXPECT_THROW(hcrnn::cli::parse_thresholds("0:10:0"), hcrnn::ConfigError);
  EXPECT_THROW(hcrnn::cli::parse_thresholds(""), hcrnn::ConfigError);
}

TEST(Cli, DefaultOutputFollowsEnvironment) {
  const char* old = std::getenv("HCRNN_OUTPUT_ROOT");
  const std::string saved = old ? old : "";
  ::setenv("HCRNN_OUTPUT_ROOT", "/tmp/hcrnn_root", 1);
  EXPECT_EQ(hcrnn::cli::default_output("train"), fs::path("/tmp/hcrnn_root/train"));
  ::unsetenv("HCRNN_OUTPUT_ROOT");
  EXPECT_EQ(hcrnn::cli::default_output("eval"), fs::path("runs/eval"));
  if (old) ::setenv("HCRNN_OUTPUT_ROOT", saved.c_str(), 1);
}

TEST(Cli, SynthFramesSpreadSubjects) {
  const auto topo = hcrnn::JointTopology::preset("msra");
  const auto f = hcrnn::cli::synth_frames(5, topo, 1, 0, 2);
  ASSERT_EQ(f.size(), 5u);
  EXPECT_EQ(f[0].subject, "s0");
  EXPECT_EQ(f[1].subject, "s1");
  EXPECT_EQ(f[4].subject, "s0");
  EXPECT_EQ(f[2].joints.size(), 21u);
  const auto again = hcrnn::cli::synth_frames(5, topo, 1, 0, 2);
  EXPECT_EQ(f[3].depth.mm, again[3].depth.mm);
}

}  // namespace
