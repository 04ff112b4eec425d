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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ccf/error.hpp"

namespace ccf {

MostPop::MostPop(const SplitDataset& data)
    : counts_(data.item_popularity().begin(), data.item_popularity().end()) {}

double MostPop::Score(ItemId item) const {
  if (item < 0 || static_cast<std::size_t>(item) >= counts_.size()) {
    throw InvalidInput("item id " + std::to_string(item) + " outside the catalog");
  }
  return counts_[item];
}

std::vector<ItemId> MostPop::Ranking() const {
  std::vector<ItemId> order(counts_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](ItemId a, ItemId b) { return counts_[a] > counts_[b]; });
  return order;
}

CandidateScorer MostPop::Scorer() const {
  return [this](UserId, std::span<const ItemId>, std::span<const ItemId> items,
                std::span<double> out) {
    for (std::size_t i = 0; i < items.size(); ++i) out[i] = Score(items[i]);
  };
}

PropensityTable::PropensityTable(std::span<const int> popularity, double eta,
                                 double clip_max)
    : eta_(eta), clip_max_(clip_max) {
  if (!(eta >= 0.0)) throw InvalidInput("ips eta must be >= 0");
  if (!(clip_max >= 1.0)) throw InvalidInput("ips clip must be >= 1");
  const int n_max = popularity.empty()
                        ? 0
                        : *std::max_element(popularity.begin(), popularity.end());
  propensity_.reserve(popularity.size());
  for (int n : popularity) {
    // Unseen items get the propensity whose inverse is the cap.
    if (n <= 0 || n_max <= 0) {
      propensity_.push_back(1.0 / clip_max);
    } else {
      propensity_.push_back(std::pow(static_cast<double>(n) / n_max, eta));
    }
  }
}

double PropensityTable::Weight(ItemId item) const {
  return std::min(1.0 / propensity(item), clip_max_);
}

}  // namespace ccf
