#include <gtest/gtest.h>

#include <cstdlib>
#include <json.hpp>
#include <sstream>

#include "agreesum/cli.hpp"
#include "agreesum/corpus.hpp"
#include "agreesum/io.hpp"
#include "test_util.hpp"

using agreesum::testing::TempDir;
namespace cli = agreesum::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "agreesum");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read(const fs::path& p) { return agreesum::io::read_file(p); }

std::size_t line_count(const fs::path& p) {
  const auto text = read(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

const std::vector<std::string> kSmallModel{
    "--set", "embed_dim=12",      "--set", "encoder_layers=1", "--set", "decoder_layers=1",
    "--set", "max_input_len=48",  "--set", "max_output_len=6", "--set", "batch_size=4",
    "--set", "optimizer=adam",    "--set", "learning_rate=0.003"};

class CliFlow : public ::testing::Test {
 protected:
  void SetUp() override {
    unsetenv("AGREESUM_SCORER_ENDPOINT");
    unsetenv("AGREESUM_CACHE_DIR");
    const auto r = run({"synth-data", "--task", "intersection", "--out", (dir / "task").string(),
                        "--seed", "3", "--set", "annotated=12", "--set", "unannotated=8",
                        "--set", "dev=3", "--count", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  Result train(const std::string& model, const fs::path& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"train", "--model", model, "--data", (dir / "task").string(),
                                  "--out", out.string(), "--seed", "1", "--set", "max_steps=4"};
    args.insert(args.end(), kSmallModel.begin(), kSmallModel.end());
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }

  TempDir dir;
};

}  // namespace

TEST(Cli, BuildDatasetWritesSplitsAndManifest) {
  TempDir dir;
  auto r = run({"synth-data", "--task", "raw", "--count", "80", "--seed", "2", "--out",
                (dir / "raw").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  agreesum::io::write_file_atomic(dir / "c.cfg", "# small corpus\ntest_cluster_count = 20\n");
  r = run({"build-dataset", "--config", (dir / "c.cfg").string(), "--raw",
           (dir / "raw" / "raw_clusters.jsonl").string(), "--annotations",
           (dir / "raw" / "annotations.jsonl").string(), "--out", (dir / "data").string(), "--seed", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("cluster-summary pairs"), std::string::npos);
  const auto manifest = nlohmann::json::parse(read(dir / "data" / "run_manifest.json"));
  EXPECT_EQ(manifest["subcommand"], "build-dataset");
  for (const char* split : {"train", "dev", "test"}) {
    ASSERT_TRUE(manifest["outputs"].contains(split)) << split;
    EXPECT_EQ(manifest["outputs"][split]["fnv1a64"].get<std::string>().size(), 16u);
    EXPECT_TRUE(fs::exists(dir / "data" / (std::string(split) + ".jsonl")));
  }
  EXPECT_TRUE(manifest.contains("duration_seconds"));
  EXPECT_TRUE(fs::exists(dir / "data" / "dataset_manifest.json"));
}

TEST(Cli, SameSeedGivesIdenticalOutputs) {
  TempDir dir;
  for (const char* name : {"a", "b"}) {
    ASSERT_EQ(run({"synth-data", "--task", "raw", "--count", "60", "--seed", "4", "--out",
                   (dir / name).string()}).code, 0);
    ASSERT_EQ(run({"build-dataset", "--raw", (dir / name / "raw_clusters.jsonl").string(),
                   "--annotations", (dir / name / "annotations.jsonl").string(), "--out",
                   (dir / name / "data").string(), "--seed", "4", "--set", "test_cluster_count=15"}).code, 0);
  }
  for (const char* f : {"raw_clusters.jsonl", "annotations.jsonl", "data/train.jsonl",
                        "data/dev.jsonl", "data/test.jsonl", "data/linked_pairs.jsonl"})
    EXPECT_EQ(read(dir / "a" / f), read(dir / "b" / f)) << f;
}

TEST(Cli, HelpOnEverySubcommand) {
  const std::map<std::string, std::vector<std::string>> flags{
      {"build-dataset", {"--raw", "--annotations", "--out", "--seed", "--config"}},
      {"train-entailment", {"--records", "--heldout", "--out"}},
      {"serve-entailment", {"--entailment-ckpt", "--host", "--port"}},
      {"train", {"--model", "--data", "--init-ckpt", "--scorer-endpoint", "--entailment-ckpt"}},
      {"decode", {"--model-ckpt", "--entdec-k", "--b5", "--clusters", "--workers"}},
      {"evaluate", {"--decoded", "--reference", "--human"}},
      {"synth-data", {"--task", "--count"}},
  };
  for (const auto& [sub, expected] : flags) {
    const auto r = run({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    for (const auto& f : expected) EXPECT_NE(r.out.find(f), std::string::npos) << sub << " " << f;
  }
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, UsageErrors) {
  auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, 64);
  EXPECT_NE(r.err.find("ERROR:USAGE"), std::string::npos);
  r = run({"decode", "--bogus-flag", "--clusters", "x", "--out", "y"});
  EXPECT_EQ(r.code, 64);
  EXPECT_EQ(run({}).code, 64);
  EXPECT_EQ(run({"train", "--model", "b7", "--out", "x"}).code, 64);
}

TEST(Cli, MissingInputIsAnIoError) {
  TempDir dir;
  const auto r = run({"decode", "--b5", "--oracle", "--clusters", (dir / "missing.jsonl").string(),
                      "--out", (dir / "o.jsonl").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("ERROR:IO:", 0), 0u) << r.err;
}

TEST(Cli, MalformedInputIsAValidationError) {
  TempDir dir;
  agreesum::io::write_file_atomic(dir / "bad.jsonl", "{not json\n");
  const auto r = run({"decode", "--b5", "--oracle", "--clusters", (dir / "bad.jsonl").string(),
                      "--out", (dir / "o.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("ERROR:PARSE:", 0), 0u) << r.err;
}

TEST_F(CliFlow, AsmWithoutScorerFailsFast) {
  const auto r = train("asm", dir / "asm.ckpt");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("ERROR:NO_SCORER"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "asm.ckpt"));
}

TEST_F(CliFlow, UnknownConfigKeyRejected) {
  const auto r = train("b2", dir / "b2.ckpt", {"--set", "learning_rat=0.1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("learning_rat"), std::string::npos);
  EXPECT_EQ(train("b2", dir / "b2.ckpt", {"--set", "novalue"}).code, 1);
}

TEST_F(CliFlow, TrainDecodeEvaluate) {
  auto r = train("b2", dir / "b2.ckpt", {"--log", (dir / "b2.log.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "b2.ckpt.meta.json"));
  EXPECT_EQ(line_count(dir / "b2.log.jsonl"), 4u);
  const auto manifest = nlohmann::json::parse(read(dir / "b2.ckpt.manifest.json"));
  EXPECT_EQ(manifest["config"]["model"], "b2");
  EXPECT_EQ(manifest["seed"], 1);

  const auto test = (dir / "task" / "test.jsonl").string();
  r = run({"decode", "--model-ckpt", (dir / "b2.ckpt").string(), "--entdec-k", "2", "--clusters",
           test, "--out", (dir / "gen.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("ERROR:NO_SCORER"), std::string::npos);

  r = run({"decode", "--model-ckpt", (dir / "b2.ckpt").string(), "--entdec-k", "2", "--oracle",
           "--clusters", test, "--out", (dir / "gen.jsonl").string(), "--workers", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(dir / "gen.jsonl"), agreesum::load_clusters(test).size());
  const auto first = nlohmann::json::parse(read(dir / "gen.jsonl").substr(0, read(dir / "gen.jsonl").find('\n')));
  EXPECT_EQ(first["model"], "b2-entdec2");

  r = run({"evaluate", "--decoded", (dir / "gen.jsonl").string(), "--clusters", test, "--reference",
           "test_approx", "--oracle", "--out", (dir / "report.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("cluster-entail%"), std::string::npos);
  const auto report = nlohmann::json::parse(read(dir / "report.json"));
  EXPECT_EQ(report["clusters"], 5);
  EXPECT_TRUE(fs::exists(dir / "report.txt"));

  r = run({"decode", "--b5", "--model-ckpt", (dir / "b2.ckpt").string(), "--oracle", "--clusters",
           test, "--out", (dir / "x.jsonl").string()});
  EXPECT_EQ(r.code, 1);
}

TEST_F(CliFlow, TrainingIsReproducible) {
  ASSERT_EQ(train("b1", dir / "x.ckpt").code, 0);
  ASSERT_EQ(train("b1", dir / "y.ckpt").code, 0);
  EXPECT_EQ(read(dir / "x.ckpt"), read(dir / "y.ckpt"));
  ASSERT_EQ(train("asm", dir / "a.ckpt", {"--oracle", "--init-ckpt", (dir / "x.ckpt").string(),
                                          "--set", "disc_filters=4", "--set", "probe_size=3"}).code, 0);
  ASSERT_EQ(train("asm", dir / "b.ckpt", {"--oracle", "--init-ckpt", (dir / "x.ckpt").string(),
                                          "--set", "disc_filters=4", "--set", "probe_size=3"}).code, 0);
  EXPECT_EQ(read(dir / "a.ckpt"), read(dir / "b.ckpt"));
  const auto manifest = nlohmann::json::parse(read(dir / "a.ckpt.manifest.json"));
  EXPECT_TRUE(manifest.contains("final_mean_reward"));
}

TEST_F(CliFlow, EntailmentCheckpointServesAsScorer) {
  auto r = run({"synth-data", "--task", "containment", "--count", "60", "--out",
                (dir / "ent").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"train-entailment", "--records", (dir / "ent" / "entailment_train.jsonl").string(),
           "--heldout", (dir / "ent" / "entailment_heldout.jsonl").string(), "--out",
           (dir / "ent.ckpt").string(), "--set", "epochs=1", "--set", "filters=4", "--set",
           "embed_dim=8", "--set", "windows=2,3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "ent.ckpt.meta.json"));
  r = run({"decode", "--b5", "--entailment-ckpt", (dir / "ent.ckpt").string(), "--clusters",
           (dir / "task" / "test.jsonl").string(), "--out", (dir / "b5.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(dir / "b5.jsonl"), 5u);
}

TEST_F(CliFlow, UnreachableEndpointIsANetworkError) {
  ASSERT_EQ(train("b1", dir / "x.ckpt").code, 0);
  setenv("AGREESUM_SCORER_ENDPOINT", "http://127.0.0.1:1", 1);
  const auto r = run({"decode", "--b5", "--clusters", (dir / "task" / "test.jsonl").string(), "--out",
                      (dir / "b5.jsonl").string()});
  unsetenv("AGREESUM_SCORER_ENDPOINT");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ERROR:SCORER_UNAVAILABLE"), std::string::npos) << r.err;
}
