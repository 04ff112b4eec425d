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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ccf/error.hpp"
#include "ccf/random.hpp"

namespace ccf {

CandidateScorer ModelScorer(const RecModel& model) {
  return [&model](UserId u, std::span<const ItemId> history,
                  std::span<const ItemId> items, std::span<double> out) {
    model.ScoreCandidates(u, history, items, out);
  };
}

int RankTarget(const RecModel& model, UserId user, std::span<const ItemId> history,
               ItemId target, std::span<const ItemId> negatives) {
  std::vector<ItemId> items(negatives.begin(), negatives.end());
  if (std::find(items.begin(), items.end(), target) != items.end()) {
    throw InvalidInput("target appears among its own negatives");
  }
  items.push_back(target);
  std::vector<double> scores(items.size());
  model.ScoreCandidates(user, history, items, scores);
  return RankOf(target, items, scores);
}

double NdcgAtK(int rank, int k) {
  if (rank < 1 || k < 1) throw InvalidInput("rank and k must be >= 1");
  return rank <= k ? 1.0 / std::log2(rank + 1.0) : 0.0;
}

std::vector<ItemId> EvalNegatives(const SplitDataset& data, UserId user, ItemId target,
                                  std::uint64_t seed) {
  return data.SampleNegatives(
      user, target, kEvalNegatives,
      DeriveSeed(seed, {stream::kEvalNegative, static_cast<std::uint64_t>(user),
                        static_cast<std::uint64_t>(target)}));
}

MetricsReport Evaluate(const CandidateScorer& scorer, const SplitDataset& data,
                       Partition partition, std::uint64_t seed) {
  if (partition == Partition::kTrain) {
    throw InvalidInput("evaluation runs on the validation or test partition");
  }
  MetricsReport report;
  double ndcg_sum = 0.0;
  double hit_sum = 0.0;
  std::vector<ItemId> items;
  std::vector<double> scores;
  for (UserId u = 0; u < data.num_users(); ++u) {
    const auto positions = data.HeldOutPositives(u, partition);
    if (positions.empty()) continue;
    const auto events = data.timeline(u);
    double user_ndcg = 0.0;
    double user_hit = 0.0;
    for (std::int32_t pos : positions) {
      const ItemId target = events[pos].item;
      items = EvalNegatives(data, u, target, seed);
      items.push_back(target);
      scores.resize(items.size());
      const History history = data.HistoryOf(u, static_cast<std::size_t>(pos));
      scorer(u, history, items, scores);
      const int rank = RankOf(target, items, scores);
      report.users.push_back(u);
      report.ranks.push_back(rank);
      user_ndcg += NdcgAtK(rank, 10);
      user_hit += HitAtK(rank, 1);
    }
    ndcg_sum += user_ndcg / static_cast<double>(positions.size());
    hit_sum += user_hit / static_cast<double>(positions.size());
    ++report.num_users_evaluated;
  }
  if (report.num_users_evaluated == 0) {
    throw InvalidInput(std::string("no evaluable users in the ") +
                       PartitionName(partition) + " partition");
  }
  report.ndcg_at_10 = ndcg_sum / report.num_users_evaluated;
  report.hit_at_1 = hit_sum / report.num_users_evaluated;
  return report;
}

MetricsReport Evaluate(const RecModel& model, const SplitDataset& data,
                       Partition partition, std::uint64_t seed) {
  return Evaluate(ModelScorer(model), data, partition, seed);
}

std::optional<double> Improvement(double new_value, double old_value) {
  if (!(old_value > 0.0)) return std::nullopt;
  return 100.0 * (new_value - old_value) / old_value;
}

nlohmann::ordered_json MetricsJson(const MetricsReport& report, const std::string& model,
                                   Partition partition, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["ndcg@10"] = report.ndcg_at_10;
  j["hit@1"] = report.hit_at_1;
  j["num_users"] = report.num_users_evaluated;
  j["model"] = model;
  j["partition"] = PartitionName(partition);
  j["seed"] = seed;
  return j;
}

void WriteComparisonReport(const std::filesystem::path& path,
                           const std::vector<ReportRow>& rows) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << "variant,ndcg@10,hit@1,imp_ndcg_pct,imp_hit_pct\n";
  char buf[64];
  auto put = [&](std::optional<double> x) {
    if (!x) return std::string();
    std::snprintf(buf, sizeof buf, "%.4f", *x);
    return std::string(buf);
  };
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", row.ndcg_at_10, row.hit_at_1);
    out << row.variant << ',' << buf << ','
        << put(Improvement(row.ndcg_at_10, rows.front().ndcg_at_10)) << ','
        << put(Improvement(row.hit_at_1, rows.front().hit_at_1)) << '\n';
  }
}

}  // namespace ccf
