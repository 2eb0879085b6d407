#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

#include "symplan/cli.hpp"
#include "symplan/io.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int status;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = symplan::cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

std::size_t files_in(const fs::path& p) {
  return static_cast<std::size_t>(std::distance(fs::directory_iterator(p), fs::directory_iterator{}));
}

}  // namespace

TEST(Cli, GenSplits) {
  test_util::TempDir dir;
  const auto d = (dir.path() / "ds").string();
  const auto r = run({"gen", "--task", "abcdef", "--n", "40", "--seed", "7", "--out", d});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(files_in(dir.path() / "ds" / "train"), 32u);
  EXPECT_EQ(files_in(dir.path() / "ds" / "val"), 4u);
  EXPECT_EQ(files_in(dir.path() / "ds" / "test"), 4u);
  EXPECT_TRUE(fs::exists(dir.path() / "ds" / "manifest.json"));
}

TEST(Cli, GenIsByteIdentical) {
  test_util::TempDir dir;
  for (const char* name : {"a", "b"})
    ASSERT_EQ(run({"gen", "--task", "c", "--n", "10", "--seed", "3", "--out", (dir.path() / name).string()}).status, 0);
  for (const auto& e : fs::recursive_directory_iterator(dir.path() / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir.path() / "a");
    EXPECT_EQ(symplan::io::read_file(e.path()), symplan::io::read_file(dir.path() / "b" / rel)) << rel;
  }
}

TEST(Cli, OracleEvalIsAllZero) {
  test_util::TempDir dir;
  const auto d = (dir.path() / "ds").string();
  ASSERT_EQ(run({"gen", "--task", "abc", "--n", "20", "--seed", "1", "--out", d}).status, 0);
  const auto csv = (dir.path() / "m.csv").string();
  const auto r = run({"eval", "--data", d, "--oracle", "--out", csv});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto text = symplan::io::read_file(csv);
  EXPECT_NE(text.find("abc,10,oracle,0.000000,0.000000,0.000000"), std::string::npos);
  EXPECT_NE(text.find("abc,30,oracle,0.000000,0.000000,0.000000"), std::string::npos);
}

TEST(Cli, TrainEvalRolloutPipeline) {
  test_util::TempDir dir;
  const auto d = (dir.path() / "ds").string();
  const auto models = dir.path() / "models" / "c";
  fs::create_directories(models);
  ASSERT_EQ(run({"gen", "--task", "c", "--n", "20", "--seed", "2", "--out", d}).status, 0);
  auto r = run({"train-clf", "--data", d, "--out", (models / "classifier.json").string(), "--epochs", "20"});
  ASSERT_EQ(r.status, 0) << r.err;
  for (const char* kind : {"seq2seq", "attn_lstm"}) {
    r = run({"train-seq", "--data", d, "--classifier", (models / "classifier.json").string(), "--out",
             (models / (std::string(kind) + "-sl10.json")).string(), "--kind", kind, "--sl", "10", "--latent", "8",
             "--epochs", "1", "--windows-per-epoch", "200", "--quiet"});
    ASSERT_EQ(r.status, 0) << r.err;
  }
  r = run({"eval", "--data", d, "--models", (dir.path() / "models").string(), "--sl", "10", "--oracle"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("seq2seq"), std::string::npos);
  EXPECT_NE(r.out.find("attn_lstm"), std::string::npos);
  // SL20 checkpoints do not exist.
  EXPECT_NE(run({"eval", "--data", d, "--models", (dir.path() / "models").string()}).status, 0);

  const auto counts = (dir.path() / "counts.json").string();
  r = run({"rollout", "--task", "c", "--n", "3", "--policy", "model", "--classifier",
           (models / "classifier.json").string(), "--model", (models / "seq2seq-sl10.json").string(), "--out", counts,
           "--budget", "400"});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = nlohmann::json::parse(symplan::io::read_file(counts));
  EXPECT_EQ(j.at("success").get<int>() + j.at("recovered").get<int>() + j.at("failure").get<int>(), 3);
}

TEST(Cli, TrainSeqIsDeterministic) {
  test_util::TempDir dir;
  const auto d = (dir.path() / "ds").string();
  const auto clf = (dir.path() / "clf.json").string();
  ASSERT_EQ(run({"gen", "--task", "c", "--n", "10", "--seed", "4", "--out", d}).status, 0);
  ASSERT_EQ(run({"train-clf", "--data", d, "--out", clf, "--epochs", "5"}).status, 0);
  std::string first;
  for (const char* name : {"a.json", "b.json"}) {
    const auto out = (dir.path() / name).string();
    ASSERT_EQ(run({"train-seq", "--data", d, "--classifier", clf, "--out", out, "--sl", "10", "--latent", "6",
                   "--epochs", "2", "--quiet"})
                  .status,
              0);
    if (first.empty())
      first = symplan::io::read_file(out);
    else
      EXPECT_EQ(symplan::io::read_file(out), first);
  }
}

TEST(Cli, RolloutCountsAndTraces) {
  test_util::TempDir dir;
  const auto traces = dir.path() / "tr";
  const auto r = run({"rollout", "--task", "abcdef", "--n", "4", "--seed", "9", "--ball-back", "--trace-dir",
                      traces.string()});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("failure 0"), std::string::npos);
  EXPECT_EQ(files_in(traces), 4u);
}

TEST(Cli, ConfigFileWithFlagPrecedence) {
  test_util::TempDir dir;
  const auto cfg = dir.path() / "run.toml";
  symplan::io::write_file_atomic(cfg, "[rollout]\ntask = \"c\"\nn = 2\n");
  auto r = run({"--config", cfg.string(), "rollout"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("success 2"), std::string::npos);
  r = run({"--config", cfg.string(), "rollout", "--n", "3"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("success 3"), std::string::npos);
}

TEST(Cli, TrainConfigFile) {
  test_util::TempDir dir;
  const auto d = (dir.path() / "ds").string();
  const auto clf = (dir.path() / "clf.json").string();
  const auto hp = dir.path() / "hp.cfg";
  symplan::io::write_file_atomic(hp, "sl = 30\nlatent = 4\nepochs = 1\n");
  ASSERT_EQ(run({"gen", "--task", "c", "--n", "10", "--seed", "4", "--out", d}).status, 0);
  ASSERT_EQ(run({"train-clf", "--data", d, "--out", clf, "--epochs", "3"}).status, 0);
  const auto out = (dir.path() / "m.json").string();
  const auto r = run({"train-seq", "--data", d, "--classifier", clf, "--out", out, "--train-config", hp.string(),
                      "--sl", "10", "--quiet"});
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = nlohmann::json::parse(symplan::io::read_file(out));
  EXPECT_EQ(j.at("SL"), 10);
  EXPECT_EQ(j.at("dims").at("latent"), 4);
}

TEST(Cli, ImuLabelling) {
  test_util::TempDir dir;
  const auto d = dir.path() / "ds";
  ASSERT_EQ(run({"gen", "--task", "blocks", "--n", "10", "--seed", "5", "--out", d.string()}).status, 0);
  const auto episode = fs::directory_iterator(d / "test")->path();
  ASSERT_EQ(run({"synth-imu", "--episode", episode.string(), "--out", (dir.path() / "imu").string(), "--zero-noise"})
                .status,
            0);
  const auto r = run({"label-imu", "--in", (dir.path() / "imu").string(), "--out",
                      (dir.path() / "labels.jsonl").string(), "--truth", episode.string()});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("structure matches"), std::string::npos);
}

TEST(Cli, ErrorsAreReported) {
  test_util::TempDir dir;
  auto r = run({"train-clf", "--data", (dir.path() / "missing").string(), "--out", (dir.path() / "x").string()});
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("error"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir.path() / "x"));
  EXPECT_NE(run({"gen", "--task", "c"}).status, 0);
  EXPECT_NE(run({"frobnicate"}).status, 0);
  EXPECT_NE(run({"rollout", "--task", "c", "--policy", "model"}).status, 0);
  EXPECT_NE(run({"train-seq", "--data", "x", "--classifier", "y", "--out", "z", "--sl", "15"}).status, 0);
}

TEST(Cli, GradCheck) { EXPECT_EQ(run({"grad-check"}).status, 0); }
