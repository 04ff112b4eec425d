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

// Reference points: most-popular ranking and inverse-propensity weights.

#pragma once

#include <span>
#include <vector>

#include "ccf/dataset.hpp"
#include "ccf/eval.hpp"

namespace ccf {

// Non-personalized popularity scorer: train interaction count per item.
class MostPop {
 public:
  explicit MostPop(const SplitDataset& data);

  double Score(ItemId item) const;
  // Ranked catalog, ties by ascending id; identical for every user.
  std::vector<ItemId> Ranking() const;
  CandidateScorer Scorer() const;

 private:
  std::vector<double> counts_;
};

inline constexpr double kDefaultIpsEta = 0.5;
inline constexpr double kDefaultIpsClip = 10.0;

// User-independent propensities p_v = (n_v / n_max)^eta.
class PropensityTable {
 public:
  PropensityTable(std::span<const int> popularity, double eta, double clip_max);

  double propensity(ItemId item) const { return propensity_.at(item); }
  // min(1 / p_v, clip_max); clip_max when the item was never seen.
  double Weight(ItemId item) const;

  double eta() const { return eta_; }
  double clip_max() const { return clip_max_; }

 private:
  std::vector<double> propensity_;
  double eta_;
  double clip_max_;
};

}  // namespace ccf
