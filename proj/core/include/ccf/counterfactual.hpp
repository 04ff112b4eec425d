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

// Counterfactual histories: rule-based generation, selection of the ones
// under which the target stays recommended, latent-space perturbation, and
// the piecewise-uniform do-expectation estimator.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccf/dataset.hpp"
#include "ccf/model.hpp"

namespace ccf {

enum class HeuristicRule { kKeepOne, kDeleteOne, kReplaceOneRandom, kReplaceOneNearest };

inline constexpr HeuristicRule kAllRules[] = {
    HeuristicRule::kKeepOne, HeuristicRule::kDeleteOne,
    HeuristicRule::kReplaceOneRandom, HeuristicRule::kReplaceOneNearest};

// "K1", "D1", "R1r", "R1n".
std::string_view RuleName(HeuristicRule rule);
std::optional<HeuristicRule> ParseRule(std::string_view name);

// Nearest neighbour of every item by cosine similarity of item embeddings,
// excluding the item itself; ties go to the lower item id. Items with a zero
// embedding have cosine 0 to everything.
std::vector<ItemId> NearestNeighbors(const Matrix& item_embeddings);

struct GenerateOptions {
  int replacements_per_position = 5;
  int limit = 20;
};

class CounterfactualGenerator {
 public:
  // `model` is only read for R1n, to build the neighbour table once.
  CounterfactualGenerator(HeuristicRule rule, const RecModel& model,
                          GenerateOptions options = {});

  HeuristicRule rule() const { return rule_; }

  // All rule edits of `history`, uniformly subsampled (seeded, original order
  // kept) down to `options.limit`. Empty history, or D1 on a single item,
  // yields nothing.
  std::vector<History> Generate(std::span<const ItemId> history,
                                std::uint64_t seed) const;

  ItemId NearestNeighbor(ItemId v) const { return neighbors_.at(v); }

 private:
  HeuristicRule rule_;
  int num_items_;
  GenerateOptions options_;
  std::vector<ItemId> neighbors_;
};

struct CounterfactualBatch {
  UserId user = 0;
  History real_history;
  std::vector<History> counterfactuals;
  ItemId target = 0;
  // Candidates produced by the generator before selection.
  int generated = 0;

  int n() const { return static_cast<int>(counterfactuals.size()); }
};

inline constexpr int kSelectionNegatives = 100;

// Keeps each candidate history under which `target` ranks within the top k of
// `candidate_items` (which must contain it), up to `max_selected`.
CounterfactualBatch SelectWithCandidates(const RecModel& model, UserId user,
                                         History real_history,
                                         const std::vector<History>& candidates,
                                         ItemId target,
                                         std::span<const ItemId> candidate_items,
                                         int k, int max_selected);

// Same, with the candidate item set built from 100 seeded negatives plus the
// target; the set is shared by all candidate histories of the example.
CounterfactualBatch Select(const RecModel& model, const SplitDataset& data,
                           UserId user, History real_history,
                           const std::vector<History>& candidates, ItemId target,
                           int k, std::uint64_t seed, int max_selected);

// x' = x + sqrt(gamma) * theta / |theta|, theta ~ N(0, I), gamma ~ U[0, epsilon2],
// so |x' - x|^2 <= epsilon2.
std::vector<Vector> SampleContinuous(const Vector& x, double epsilon2, int count,
                                     std::uint64_t seed);

struct DoDistribution {
  double alpha = 1.0;
  double beta = 0.0;
  int n = 0;
};

inline constexpr double kDefaultAlpha = 0.5;

// alpha for the real history, beta = (1 - alpha) / n for each counterfactual;
// n = 0 gives alpha = 1.
DoDistribution MakeDoDistribution(double alpha, int n);

// Throws InvalidInput unless alpha + n beta = 1 (1e-12), alpha > beta > 0 for
// n >= 1, alpha = 1 for n = 0.
void ValidateDoDistribution(const DoDistribution& dist);

// alpha p_real + beta sum_i p_cf[i].
double DoExpectation(const DoDistribution& dist, double p_real,
                     std::span<const double> p_cf);

// Cache records: user<TAB>target<TAB>real history<TAB>counterfactual history,
// histories comma-joined, one line per counterfactual.
void WriteCounterfactualCache(std::ostream& out,
                              const std::vector<CounterfactualBatch>& batches);
std::vector<CounterfactualBatch> ReadCounterfactualCache(std::istream& in);

}  // namespace ccf
