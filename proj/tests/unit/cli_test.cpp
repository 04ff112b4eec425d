// Copyright 2026 The CCF Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ccf/training.hpp"
#include "test_util.hpp"

namespace ccf {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result Call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::Run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

// A small rating log split into dir/"split".
class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::ostringstream log;
    for (const auto& x : testing::RandomLog(25, 150, 15, 0.7, 3)) {
      log << x.user + 100 << '\t' << x.item + 1000 << '\t' << x.rating << '\t'
          << x.timestamp << '\n';
    }
    WriteText(dir_.path() / "log.tsv", log.str());
    const Result r = Call({"split", "--input", dir_ / "log.tsv", "--out", split(), "--seed", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  std::string split() const { return dir_ / "split"; }

  std::string Config(const std::string& name, const nlohmann::json& j) const {
    const std::string path = dir_ / name;
    WriteText(path, j.dump());
    return path;
  }

  static nlohmann::json SmallTrain() {
    return {{"embedding_dim", 4}, {"epochs", 3}, {"pretrain_epochs", 2},
            {"learning_rate", 0.05}, {"seed", 1}};
  }

  testing::TempDir dir_{"cli"};
};

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(Call({}).code, 2);
  EXPECT_EQ(Call({"fly"}).code, 2);
  EXPECT_EQ(Call({"train", "--config", "x.json"}).code, 2);
  EXPECT_EQ(Call({"eval", "--model", "m", "--data", split(), "--partition", "train"}).code, 2);
  const Result help = Call({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("sweep"), std::string::npos);
}

TEST_F(CliTest, InvalidRuleNamesValidRules) {
  auto c = SmallTrain();
  c["rule"] = "R2";
  const Result r = Call({"train", "--config", Config("bad.json", c), "--data", split(),
                         "--out", dir_ / "m.json"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(kValidRuleNames), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "m.json"));
}

TEST_F(CliTest, UnknownConfigKeyExitsTwo) {
  auto c = SmallTrain();
  c["epoch"] = 3;
  const Result r = Call({"train", "--config", Config("bad.json", c), "--data", split(),
                         "--out", dir_ / "m.json"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("epoch"), std::string::npos);
}

TEST_F(CliTest, TrainThenEval) {
  const std::string model = dir_ / "models/base/model.json";
  const Result t = Call({"train", "--config", Config("t.json", SmallTrain()), "--data",
                         split(), "--out", model});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(model));
  EXPECT_EQ(Lines(Slurp(dir_ / "models/base/trace.csv")).size(), 4u);
  EXPECT_NO_THROW(static_cast<void>(nlohmann::json::parse(t.out)));

  const Result e = Call({"eval", "--model", model, "--data", split(), "--partition", "test"});
  ASSERT_EQ(e.code, 0) << e.err;
  const auto metrics = nlohmann::json::parse(Slurp(dir_ / "models/base/metrics.json"));
  for (const char* key : {"ndcg@10", "hit@1", "num_users", "model", "partition", "seed"}) {
    EXPECT_TRUE(metrics.contains(key)) << key;
  }
  EXPECT_EQ(metrics["partition"], "test");
  EXPECT_EQ(metrics["seed"], 5);
  EXPECT_EQ(metrics["num_users"], 25);
}

TEST_F(CliTest, ArtifactsAreByteIdenticalAcrossRuns) {
  const std::string cfg = Config("t.json", SmallTrain());
  for (const char* run : {"a", "b"}) {
    const std::string model = dir_ / (std::string(run) + "/model.json");
    ASSERT_EQ(Call({"train", "--config", cfg, "--data", split(), "--out", model}).code, 0);
    ASSERT_EQ(Call({"eval", "--model", model, "--data", split(), "--partition", "validation",
                    "--out", dir_ / (std::string(run) + "/metrics.json")})
                  .code,
              0);
  }
  for (const char* f : {"model.json", "trace.csv"}) {
    EXPECT_EQ(Slurp(dir_ / (std::string("a/") + f)), Slurp(dir_ / (std::string("b/") + f)));
  }
  // metrics.json names the model path, which differs between the runs.
  auto a = nlohmann::json::parse(Slurp(dir_ / "a/metrics.json"));
  auto b = nlohmann::json::parse(Slurp(dir_ / "b/metrics.json"));
  a.erase("model");
  b.erase("model");
  EXPECT_EQ(a.dump(), b.dump());

  const std::string sim = Config("sim.json", {{"num_users", 30}, {"num_items", 60}, {"seed", 2}});
  ASSERT_EQ(Call({"simulate", "--config", sim, "--out", dir_ / "sa"}).code, 0);
  ASSERT_EQ(Call({"simulate", "--config", sim, "--out", dir_ / "sb"}).code, 0);
  for (const auto& entry : fs::directory_iterator(dir_ / "sa")) {
    EXPECT_EQ(Slurp(entry.path()), Slurp(dir_.path() / "sb" / entry.path().filename()));
  }
}

TEST_F(CliTest, SimulateThenTrainOnRandomizedSplit) {
  const std::string sim = Config("sim.json", {{"num_users", 30}, {"num_items", 150}, {"seed", 2}});
  ASSERT_EQ(Call({"simulate", "--config", sim, "--out", dir_ / "world"}).code, 0);
  const Result t = Call({"train", "--config", Config("t.json", SmallTrain()), "--data",
                         dir_ / "world", "--out", dir_ / "world/model.json"});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(Call({"eval", "--model", dir_ / "world/model.json", "--data", dir_ / "world",
                  "--partition", "test"})
                .code,
            0);
}

TEST_F(CliTest, SweepWritesOneRowPerPoint) {
  // Raw text keeps the grid key order.
  const std::string cfg = dir_ / "sweep.json";
  WriteText(cfg, R"({"base": )" + SmallTrain().dump() +
                     R"(, "grid": {"rule": ["none", "C"], "omega": [0.1, 1.0]}})");
  const Result r = Call({"sweep", "--config", cfg, "--data", split(), "--out", dir_ / "sw"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = Lines(Slurp(dir_ / "sw/sweep.csv"));
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], "point,rule,omega,status,ndcg@10,hit@1,error");
  EXPECT_EQ(lines[1].rfind("0,none,0.1,ok,", 0), 0u) << lines[1];
  EXPECT_EQ(lines[4].rfind("3,C,1.0,ok,", 0), 0u) << lines[4];
  const auto best = nlohmann::json::parse(Slurp(dir_ / "sw/best.json"));
  EXPECT_TRUE(best.contains("params"));
  EXPECT_TRUE(best["test"].contains("ndcg@10"));
  EXPECT_TRUE(fs::exists(dir_ / "sw/best_model.json"));
}

TEST_F(CliTest, SweepTieGoesToFirstListedPoint) {
  const std::string cfg = Config(
      "sweep.json", {{"base", SmallTrain()}, {"grid", {{"l2_lambda", {0.001, 0.001}}}}});
  ASSERT_EQ(Call({"sweep", "--config", cfg, "--data", split(), "--out", dir_ / "sw"}).code, 0);
  EXPECT_EQ(nlohmann::json::parse(Slurp(dir_ / "sw/best.json"))["point"], 0);
}

TEST_F(CliTest, SweepSinglePoint) {
  const std::string cfg =
      Config("sweep.json", {{"base", SmallTrain()}, {"grid", {{"omega", {0.5}}}}});
  ASSERT_EQ(Call({"sweep", "--config", cfg, "--data", split(), "--out", dir_ / "sw"}).code, 0);
  EXPECT_EQ(Lines(Slurp(dir_ / "sw/sweep.csv")).size(), 2u);
}

TEST_F(CliTest, SweepRecordsFailedPoints) {
  const std::string cfg = Config(
      "sweep.json", {{"base", SmallTrain()}, {"grid", {{"learning_rate", {1e300, 0.05}}}}});
  const Result r = Call({"sweep", "--config", cfg, "--data", split(), "--out", dir_ / "sw"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = Lines(Slurp(dir_ / "sw/sweep.csv"));
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_NE(lines[1].find(",failed,"), std::string::npos);
  EXPECT_NE(lines[2].find(",ok,"), std::string::npos);
  EXPECT_EQ(nlohmann::json::parse(Slurp(dir_ / "sw/best.json"))["point"], 1);
}

TEST_F(CliTest, SweepAllFailedExitsOne) {
  const std::string cfg = Config(
      "sweep.json", {{"base", SmallTrain()}, {"grid", {{"learning_rate", {1e300}}}}});
  EXPECT_EQ(Call({"sweep", "--config", cfg, "--data", split(), "--out", dir_ / "sw"}).code, 1);
}

TEST_F(CliTest, SweepRejectsBadGrid) {
  const auto run = [&](const nlohmann::json& j) {
    return Call({"sweep", "--config", Config("s.json", j), "--data", split(), "--out",
                 dir_ / "sw"})
        .code;
  };
  EXPECT_EQ(run({{"grid", {{"dim", {1, 2}}}}}), 2);
  EXPECT_EQ(run({{"grid", {{"omega", nlohmann::json::array()}}}}), 2);
  EXPECT_EQ(run({{"grid", {{"rule", {"D1", "R2"}}}}}), 2);
  EXPECT_EQ(run({{"base", SmallTrain()}}), 2);
}

}  // namespace
}  // namespace ccf
