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

#include "ccf/eval.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "ccf/error.hpp"
#include "ccf/random.hpp"
#include "test_util.hpp"

namespace ccf {
namespace {

TEST(Ndcg, ClosedForms) {
  EXPECT_EQ(NdcgAtK(1, 10), 1.0);
  EXPECT_NEAR(NdcgAtK(3, 10), 0.5, 1e-15);
  EXPECT_EQ(NdcgAtK(11, 10), 0.0);
  EXPECT_NEAR(NdcgAtK(10, 10), 1.0 / std::log2(11.0), 1e-15);
  EXPECT_THROW(NdcgAtK(0, 10), InvalidInput);
  EXPECT_THROW(NdcgAtK(1, 0), InvalidInput);
}

TEST(Ndcg, NonIncreasingAndConsistentWithHit) {
  for (int k : {1, 5, 10}) {
    for (int r = 1; r < 120; ++r) EXPECT_GE(NdcgAtK(r, k), NdcgAtK(r + 1, k));
  }
  for (int r = 1; r < 5; ++r) EXPECT_EQ(HitAtK(r, 1), NdcgAtK(r, 1) == 1.0 ? 1.0 : 0.0);
}

TEST(RankTarget, TiesAndExtremes) {
  RecModel m = RecModel::Create(ModelType::kMf, 1, 101, 1, 0, 0.0);
  std::vector<ItemId> negatives;
  for (int v = 1; v <= 100; ++v) {
    negatives.push_back(v);
    m.item_bias[v] = -v;
  }
  m.item_bias[0] = 10.0;
  EXPECT_EQ(RankTarget(m, 0, {}, 0, negatives), 1);
  m.item_bias[0] = -1000.0;
  EXPECT_EQ(RankTarget(m, 0, {}, 0, negatives), 101);
  m.item_bias[0] = -50.5;
  EXPECT_EQ(RankTarget(m, 0, {}, 0, negatives), 51);
  negatives[0] = 0;
  EXPECT_THROW(RankTarget(m, 0, {}, 0, negatives), InvalidInput);
}

TEST(RankTarget, LowerIdTieCountsAgainstTarget) {
  RecModel m = RecModel::Create(ModelType::kMf, 1, 4, 1, 0, 0.0);
  m.item_bias << 1.0, 1.0, 0.0, 1.0;
  // Target 1 ties with lower-id 0 and higher-id 3.
  EXPECT_EQ(RankTarget(m, 0, {}, 1, std::vector<ItemId>{0, 2, 3}), 2);
}

SplitDataset ThreePositivesPerUser(int users, int items) {
  std::vector<Interaction> rows;
  for (UserId u = 0; u < users; ++u) {
    for (int t = 0; t < 3; ++t) rows.push_back({u, (u + 7 * t) % items, 5, t, 1});
  }
  return LeaveOneOutSplit(RatingLog{rows, users, items, false});
}

TEST(Evaluate, PerfectRankerScoresOne) {
  const auto data = ThreePositivesPerUser(50, 200);
  std::map<UserId, ItemId> target;
  for (const auto& x : data.test()) target[x.user] = x.item;
  const CandidateScorer oracle = [&](UserId u, std::span<const ItemId>,
                                     std::span<const ItemId> items, std::span<double> out) {
    for (std::size_t i = 0; i < items.size(); ++i) out[i] = items[i] == target[u] ? 1.0 : 0.0;
  };
  const MetricsReport r = Evaluate(oracle, data, Partition::kTest, 3);
  EXPECT_EQ(r.ndcg_at_10, 1.0);
  EXPECT_EQ(r.hit_at_1, 1.0);
  EXPECT_EQ(r.num_users_evaluated, 50);
}

// Uniform random scores: Hit@1 = 1/101 and nDCG@10 = (1/101) sum_r 1/log2(r+1).
TEST(Evaluate, UniformRandomScorerMatchesAnalyticExpectation) {
  const int users = 10000;
  const auto data = ThreePositivesPerUser(users, 300);
  const CandidateScorer random = [](UserId u, std::span<const ItemId>,
                                    std::span<const ItemId> items, std::span<double> out) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      out[i] = static_cast<double>(DeriveSeed(12345, {static_cast<std::uint64_t>(u),
                                                      static_cast<std::uint64_t>(items[i])}));
    }
  };
  const MetricsReport r = Evaluate(random, data, Partition::kTest, 5);
  ASSERT_EQ(r.num_users_evaluated, users);
  const double p = 1.0 / 101.0;
  EXPECT_NEAR(r.hit_at_1, p, 4.0 * std::sqrt(p * (1 - p) / users));
  double expected_ndcg = 0.0;
  for (int rank = 1; rank <= 10; ++rank) expected_ndcg += p / std::log2(rank + 1.0);
  EXPECT_NEAR(r.ndcg_at_10, expected_ndcg, 0.01);
}

TEST(Evaluate, AveragesWithinUserFirst) {
  // User 0 has two test positives, user 1 has one.
  const SplitDataset data(2, 200, {{0, 5, 5, 0, 1}, {1, 6, 5, 0, 1}}, {},
                          {{0, 10, 5, 1, 1}, {0, 150, 5, 2, 1}, {1, 20, 5, 1, 1}});
  // Lower ids score higher.
  const CandidateScorer by_id = [](UserId, std::span<const ItemId>,
                                   std::span<const ItemId> items, std::span<double> out) {
    for (std::size_t i = 0; i < items.size(); ++i) out[i] = -items[i];
  };
  const MetricsReport r = Evaluate(by_id, data, Partition::kTest, 8);
  auto rank = [&](UserId u, ItemId target) {
    int better = 0;
    for (ItemId v : EvalNegatives(data, u, target, 8)) better += v < target;
    return better + 1;
  };
  const double u0 = 0.5 * (NdcgAtK(rank(0, 10), 10) + NdcgAtK(rank(0, 150), 10));
  const double u1 = NdcgAtK(rank(1, 20), 10);
  EXPECT_NEAR(r.ndcg_at_10, 0.5 * (u0 + u1), 1e-12);
  EXPECT_EQ(r.num_users_evaluated, 2);
  EXPECT_EQ(r.ranks.size(), 3u);
}

TEST(Evaluate, Errors) {
  const auto data = ThreePositivesPerUser(5, 200);
  const RecModel m = RecModel::Create(ModelType::kMf, 5, 200, 2, 1);
  EXPECT_THROW(Evaluate(m, data, Partition::kTrain, 1), InvalidInput);
  const SplitDataset none(1, 200, {{0, 1, 5, 0, 1}}, {}, {});
  const RecModel m1 = RecModel::Create(ModelType::kMf, 1, 200, 2, 1);
  EXPECT_THROW(Evaluate(m1, none, Partition::kTest, 1), InvalidInput);
}

TEST(Evaluate, PureFunctionOfInputs) {
  const auto data = testing::RandomSplit(30, 200, 20, 2);
  const RecModel m = testing::RandomModel(ModelType::kAttnSeq, 30, 200, 4, 3);
  const MetricsReport a = Evaluate(m, data, Partition::kValidation, 9);
  const MetricsReport b = Evaluate(m, data, Partition::kValidation, 9);
  EXPECT_EQ(a.ndcg_at_10, b.ndcg_at_10);
  EXPECT_EQ(a.ranks, b.ranks);
  EXPECT_GE(a.ndcg_at_10, a.hit_at_1);
  EXPECT_LE(a.ndcg_at_10, 1.0);
}

TEST(Improvement, RelativePercentages) {
  EXPECT_NEAR(*Improvement(0.3781, 0.3647), 3.7, 0.05);
  EXPECT_NEAR(*Improvement(0.1683, 0.1490), 13.0, 0.05);
  EXPECT_EQ(*Improvement(0.25, 0.25), 0.0);
  EXPECT_FALSE(Improvement(0.3, 0.0).has_value());
  EXPECT_FALSE(Improvement(0.3, -1.0).has_value());
}

TEST(Reports, MetricsJsonSchema) {
  MetricsReport r;
  r.ndcg_at_10 = 0.5;
  r.hit_at_1 = 0.25;
  r.num_users_evaluated = 7;
  const auto j = MetricsJson(r, "m.json", Partition::kTest, 4);
  EXPECT_EQ(j.dump(),
            R"({"ndcg@10":0.5,"hit@1":0.25,"num_users":7,"model":"m.json","partition":"test","seed":4})");
}

TEST(Reports, ComparisonCsv) {
  testing::TempDir dir("report");
  WriteComparisonReport(dir / "report.csv", {{"base", 0.4, 0.2}, {"D1", 0.42, 0.2}});
  std::ifstream in(dir / "report.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(),
            "variant,ndcg@10,hit@1,imp_ndcg_pct,imp_hit_pct\n"
            "base,0.400000,0.200000,0.0000,0.0000\n"
            "D1,0.420000,0.200000,5.0000,0.0000\n");
}

}  // namespace
}  // namespace ccf
