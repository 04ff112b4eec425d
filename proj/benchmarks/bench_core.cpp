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

#include <numeric>
#include <vector>

#include <benchmark/benchmark.h>

#include "ccf/counterfactual.hpp"
#include "ccf/dataset.hpp"
#include "ccf/eval.hpp"
#include "ccf/model.hpp"
#include "ccf/simulator.hpp"
#include "ccf/training.hpp"

namespace ccf {
namespace {

// A simulated log roughly the size of ML-100k's positive interactions.
const SplitDataset& BenchData() {
  static const SplitDataset data = [] {
    SimulateConfig c;
    c.num_users = 1000;
    c.num_items = 1700;
    c.interactions_per_user = 80;
    c.test_per_user = 20;
    c.seed = 1;
    return Simulate(c).split;
  }();
  return data;
}

void BM_ScoreCatalogTopK(benchmark::State& state) {
  const auto type = static_cast<ModelType>(state.range(0));
  const RecModel m = RecModel::Create(type, 100, 1700, 64, 1);
  std::vector<ItemId> items(1700);
  std::iota(items.begin(), items.end(), 0);
  const History h{1, 5, 9, 13, 17, 21, 25, 29, 33, 37};
  for (auto _ : state) benchmark::DoNotOptimize(TopK(m, 7, h, items, 10));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(items.size()));
}
BENCHMARK(BM_ScoreCatalogTopK)
    ->Arg(static_cast<int>(ModelType::kMf))
    ->Arg(static_cast<int>(ModelType::kAttnSeq));

void BM_TrainEpoch(benchmark::State& state) {
  TrainConfig c;
  c.model_type = static_cast<ModelType>(state.range(0));
  c.epochs = c.pretrain_epochs = 1;
  const SplitDataset& data = BenchData();
  for (auto _ : state) benchmark::DoNotOptimize(Train(data, c).trace.back().rank_loss);
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(data.train_examples().size()));
}
BENCHMARK(BM_TrainEpoch)
    ->Arg(static_cast<int>(ModelType::kMf))
    ->Arg(static_cast<int>(ModelType::kAttnSeq))
    ->Unit(benchmark::kMillisecond);

void BM_ContinuousConstraintEpoch(benchmark::State& state) {
  TrainConfig c;
  c.rule = "C";
  c.epsilon = 0.0;
  c.pretrain_epochs = 0;
  c.epochs = 1;
  const SplitDataset& data = BenchData();
  for (auto _ : state) benchmark::DoNotOptimize(Train(data, c).trace.back().constraint_loss);
}
BENCHMARK(BM_ContinuousConstraintEpoch)->Unit(benchmark::kMillisecond);

void BM_GenerateAndSelect(benchmark::State& state) {
  const auto rule = static_cast<HeuristicRule>(state.range(0));
  const SplitDataset& data = BenchData();
  const RecModel m = RecModel::Create(ModelType::kAttnSeq, data.num_users(), data.num_items(),
                                      64, 1);
  const CounterfactualGenerator gen(rule, m);
  const auto& ex = data.train_examples()[data.train_examples().size() / 2];
  const History real = data.HistoryOf(ex.user, static_cast<std::size_t>(ex.position));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const auto candidates = gen.Generate(real, ++seed);
    benchmark::DoNotOptimize(
        Select(m, data, ex.user, real, candidates, ex.item, 50, seed, 5).n());
  }
}
BENCHMARK(BM_GenerateAndSelect)
    ->Arg(static_cast<int>(HeuristicRule::kDeleteOne))
    ->Arg(static_cast<int>(HeuristicRule::kReplaceOneRandom))
    ->Arg(static_cast<int>(HeuristicRule::kReplaceOneNearest));

void BM_Evaluate(benchmark::State& state) {
  const SplitDataset& data = BenchData();
  const RecModel m = RecModel::Create(ModelType::kMf, data.num_users(), data.num_items(), 64, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Evaluate(m, data, Partition::kValidation, 3).ndcg_at_10);
  }
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace ccf

// Defined here: the packaged benchmark_main archive is LTO bytecode tied to
// one compiler release.
BENCHMARK_MAIN();
