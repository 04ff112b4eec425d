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

// Sampled-candidate ranking protocol (target + 100 negatives), nDCG@K and
// Hit@K, and relative-improvement reporting.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccf/dataset.hpp"
#include "ccf/model.hpp"

namespace ccf {

inline constexpr int kEvalNegatives = 100;

// Fills `out` with scores for `items` under (user, history).
using CandidateScorer =
    std::function<void(UserId user, std::span<const ItemId> history,
                       std::span<const ItemId> items, std::span<double> out)>;

CandidateScorer ModelScorer(const RecModel& model);

// 1-based rank of `target` against `negatives` (which must not contain it).
int RankTarget(const RecModel& model, UserId user, std::span<const ItemId> history,
               ItemId target, std::span<const ItemId> negatives);

// 1 / log2(rank + 1) inside the cutoff, else 0.
double NdcgAtK(int rank, int k);
inline double HitAtK(int rank, int k) { return rank <= k ? 1.0 : 0.0; }

struct MetricsReport {
  double ndcg_at_10 = 0.0;
  double hit_at_1 = 0.0;
  int num_users_evaluated = 0;
  // One entry per evaluated (user, target) pair, in user order.
  std::vector<UserId> users;
  std::vector<int> ranks;
};

// Negatives for one evaluated (user, target): fixed by (seed, user, target).
std::vector<ItemId> EvalNegatives(const SplitDataset& data, UserId user, ItemId target,
                                  std::uint64_t seed);

// Mean nDCG@10 and Hit@1 over users with a positive in `partition`. A user
// with several held-out positives (randomized-trial test logs) contributes
// the mean over them. Throws InvalidInput for the train partition or when no
// user is evaluable.
MetricsReport Evaluate(const CandidateScorer& scorer, const SplitDataset& data,
                       Partition partition, std::uint64_t seed);
MetricsReport Evaluate(const RecModel& model, const SplitDataset& data,
                       Partition partition, std::uint64_t seed);

// 100 * (new - old) / old; empty when old <= 0.
std::optional<double> Improvement(double new_value, double old_value);

// metrics.json: {"ndcg@10", "hit@1", "num_users", "model", "partition", "seed"}.
nlohmann::ordered_json MetricsJson(const MetricsReport& report, const std::string& model,
                                   Partition partition, std::uint64_t seed);

struct ReportRow {
  std::string variant;
  double ndcg_at_10 = 0.0;
  double hit_at_1 = 0.0;
};

// report.csv: variant,ndcg@10,hit@1,imp_ndcg_pct,imp_hit_pct with improvements
// against the first row; an undefined improvement is left empty.
void WriteComparisonReport(const std::filesystem::path& path,
                           const std::vector<ReportRow>& rows);

}  // namespace ccf
