#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <json.hpp>

#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

using namespace ecechain;

namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome run(const std::string& args) {
  const std::string command = std::string(ECECHAIN_CLI) + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return o;
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) o.output.append(buf.data(), n);
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string quote(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

// Link prediction only, long enough to memorise the 8-entity graph.
constexpr const char* kConfig =
    "dim = 16\nheads = 2\nencoder_units = 1\nmixer_units = 1\nmax_neighbors = 8\n"
    "ff_hidden = 32\nmixer_hidden = 16\nbatch_size = 16\nlr = 0.005\nmax_epochs = 300\npatience = 300\n"
    "time_loss_weight = 0\ntime_mask_rate = 0\n";

}  // namespace

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fixtures::TempDir();
    fixtures::write_named_splits(fixtures::periodic_dataset(8, 2, 10, 8, 1), data());
    dir_->write("run.cfg", kConfig);
    trained_ = new Outcome(run("train --config " + quote(*dir_ / "run.cfg") + " --dataset " + quote(data()) +
                               " --out " + quote(out()) + " --seed 4"));
  }
  static void TearDownTestSuite() {
    delete trained_;
    delete dir_;
  }

  static std::filesystem::path data() { return *dir_ / "data"; }
  static std::filesystem::path out() { return *dir_ / "run"; }
  static std::filesystem::path checkpoint() { return out() / "model.ckpt"; }

  static fixtures::TempDir* dir_;
  static Outcome* trained_;
};

fixtures::TempDir* Cli::dir_ = nullptr;
Outcome* Cli::trained_ = nullptr;

TEST_F(Cli, PrepareWritesManifest) {
  const auto r = run("prepare --dataset " + quote(data()) + " --out " + quote(*dir_ / "prep"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto manifest = nlohmann::json::parse(fixtures::read_file(*dir_ / "prep" / "manifest.json"));
  EXPECT_EQ(manifest.at("entity_count"), 8);
  EXPECT_EQ(manifest.at("relation_count"), 2);
  EXPECT_EQ(manifest.at("time_count"), 10);
  EXPECT_EQ(manifest.at("splits").at("train"), 64);
}

TEST_F(Cli, TrainWritesRunArtifacts) {
  ASSERT_EQ(trained_->code, 0) << trained_->output;
  for (const char* f : {"config.txt", "metrics.log", "model.ckpt", "run.json"}) {
    EXPECT_TRUE(std::filesystem::exists(out() / f)) << f;
  }
  const auto config = fixtures::read_file(out() / "config.txt");
  EXPECT_NE(config.find("dim = 16"), std::string::npos);
  EXPECT_NE(config.find("seed = 4"), std::string::npos);
  EXPECT_NE(config.find("weight_decay = "), std::string::npos);
}

TEST_F(Cli, EvalTwiceIsByteIdentical) {
  ASSERT_EQ(trained_->code, 0) << trained_->output;
  const auto a = run("eval --checkpoint " + quote(checkpoint()) + " --dataset " + quote(data()) + " --split test --out " +
                     quote(*dir_ / "a.json"));
  const auto b = run("eval --checkpoint " + quote(checkpoint()) + " --dataset " + quote(data()) + " --split test --out " +
                     quote(*dir_ / "b.json") + " --device-threads 3");
  ASSERT_EQ(a.code, 0) << a.output;
  ASSERT_EQ(b.code, 0) << b.output;
  const auto text = fixtures::read_file(*dir_ / "a.json");
  EXPECT_EQ(text, fixtures::read_file(*dir_ / "b.json"));
  const auto report = nlohmann::json::parse(text);
  EXPECT_EQ(report.at("split"), "test");
  EXPECT_EQ(report.at("protocol"), "filtered");
  EXPECT_EQ(report.at("query_count"), 16);
}

TEST_F(Cli, PredictRecallsMemorizedFact) {
  ASSERT_EQ(trained_->code, 0) << trained_->output;
  // Step 5 uses relation 1, so e3 links to e5; step 6 uses relation 0.
  const auto r = run("predict --checkpoint " + quote(checkpoint()) + " --dataset " + quote(data()) +
                     " --query 'e3 r1 ? 5' --top-n 1");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(r.output.substr(0, 5), "1\te5\t");
  const auto back = run("predict --checkpoint " + quote(checkpoint()) + " --dataset " + quote(data()) +
                        " --query '? r0 e7 6' --top-n 3");
  ASSERT_EQ(back.code, 0) << back.output;
  EXPECT_EQ(back.output.substr(0, 5), "1\te6\t");
  EXPECT_EQ(std::count(back.output.begin(), back.output.end(), '\n'), 3);
}

TEST_F(Cli, FailuresExitNonZeroWithOneLine) {
  const auto cases = {
      "predict --checkpoint " + quote(checkpoint()) + " --dataset " + quote(data()) + " --query 'e3 r9 ? 5'",
      "predict --checkpoint " + quote(checkpoint()) + " --dataset " + quote(data()) + " --query 'e3 r1 5'",
      "eval --checkpoint " + quote(*dir_ / "missing.ckpt") + " --dataset " + quote(data()),
      "train --dataset " + quote(data()) + " --out " + quote(*dir_ / "x") + " --set widht=3",
      "prepare --dataset " + quote(*dir_ / "nowhere") + " --out " + quote(*dir_ / "y"),
  };
  for (const auto& args : cases) {
    const auto r = run(args);
    EXPECT_NE(r.code, 0) << args;
    EXPECT_EQ(r.output.rfind("ecechain: error: ", 0), 0u) << r.output;
    EXPECT_EQ(std::count(r.output.begin(), r.output.end(), '\n'), 1) << r.output;
  }
}
