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

#include "ccf/baselines.hpp"

#include <gtest/gtest.h>

#include "ccf/error.hpp"
#include "ccf/training.hpp"
#include "test_util.hpp"

namespace ccf {
namespace {

SplitDataset PopularityData() {
  std::vector<Interaction> rows;
  // Item 0: 500 interactions, item 1: 3, items 2 and 3: 10 each, item 4 unseen.
  for (int i = 0; i < 500; ++i) rows.push_back({i % 50, 0, 5, i, 1});
  for (int i = 0; i < 3; ++i) rows.push_back({i, 1, 2, i, 0});
  for (int i = 0; i < 10; ++i) rows.push_back({i, 3, 5, i, 1});
  for (int i = 0; i < 10; ++i) rows.push_back({i, 2, 5, i, 1});
  return SplitDataset(50, 5, rows, {}, {});
}

TEST(MostPop, ScoresAreTrainCounts) {
  const MostPop pop(PopularityData());
  EXPECT_EQ(pop.Score(0), 500.0);
  EXPECT_EQ(pop.Score(1), 3.0);
  EXPECT_EQ(pop.Score(4), 0.0);
  EXPECT_GT(pop.Score(0), pop.Score(1));
}

TEST(MostPop, RankingBreaksTiesByLowerId) {
  const MostPop pop(PopularityData());
  EXPECT_EQ(pop.Ranking(), (std::vector<ItemId>{0, 2, 3, 1, 4}));
}

TEST(MostPop, IdenticalForEveryUser) {
  const MostPop pop(PopularityData());
  const CandidateScorer s = pop.Scorer();
  const std::vector<ItemId> items{4, 3, 2, 1, 0};
  std::vector<double> a(5), b(5);
  const History h{1, 2};
  s(0, {}, items, a);
  s(49, h, items, b);
  EXPECT_EQ(a, b);
}

TEST(Propensity, WorkedExamples) {
  // n_max = 10000.
  const std::vector<int> counts{10000, 2500, 1, 0};
  const PropensityTable half(counts, 0.5, 10.0);
  EXPECT_EQ(half.Weight(0), 1.0);
  EXPECT_NEAR(half.propensity(1), 0.5, 1e-15);
  EXPECT_NEAR(half.Weight(1), 2.0, 1e-12);
  EXPECT_EQ(half.Weight(3), 10.0);
  const PropensityTable one(counts, 1.0, 10.0);
  EXPECT_EQ(one.Weight(2), 10.0);
  EXPECT_THROW(PropensityTable(counts, -0.1, 10.0), InvalidInput);
  EXPECT_THROW(PropensityTable(counts, 0.5, 0.5), InvalidInput);
}

TEST(Propensity, WeightBoundsAndMaxPropensity) {
  const auto data = testing::RandomSplit(40, 120, 25, 6);
  for (double eta : {0.0, 0.25, 0.5, 1.0, 2.0}) {
    const PropensityTable t(data.item_popularity(), eta, 10.0);
    double max_p = 0.0;
    for (ItemId v = 0; v < data.num_items(); ++v) {
      if (data.item_popularity()[v] == 0) continue;
      EXPECT_GT(t.propensity(v), 0.0);
      EXPECT_LE(t.propensity(v), 1.0);
      EXPECT_GE(t.Weight(v), 1.0);
      EXPECT_LE(t.Weight(v), 10.0);
      max_p = std::max(max_p, t.propensity(v));
    }
    EXPECT_EQ(max_p, 1.0);
  }
}

TEST(Propensity, EtaZeroIsUnweighted) {
  const auto data = testing::RandomSplit(40, 120, 25, 6);
  const PropensityTable t(data.item_popularity(), 0.0, 10.0);
  for (ItemId v = 0; v < data.num_items(); ++v) {
    if (data.item_popularity()[v] > 0) EXPECT_EQ(t.Weight(v), 1.0);
  }
  TrainConfig base;
  base.epochs = base.pretrain_epochs = 3;
  base.embedding_dim = 8;
  base.seed = 5;
  TrainConfig ips = base;
  ips.ips = true;
  ips.ips_eta = 0.0;
  EXPECT_EQ(SerializeCheckpoint(Train(data, base).model),
            SerializeCheckpoint(Train(data, ips).model));
}

}  // namespace
}  // namespace ccf
