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

// Synthetic world with a known preference function, a confounded logging
// policy, observational logs, randomized-trial test logs and the do-oracle.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccf/dataset.hpp"
#include "ccf/model.hpp"

namespace ccf {

struct SyntheticWorld {
  Matrix user_vectors;  // u*, num_users x d*
  Matrix item_vectors;  // v*, num_items x d*
  Vector item_bias;     // b*
  double scale = 1.0;
  std::uint64_t seed = 0;

  int num_users() const { return static_cast<int>(user_vectors.rows()); }
  int num_items() const { return static_cast<int>(item_vectors.rows()); }
  int d_star() const { return static_cast<int>(user_vectors.cols()); }
  double Affinity(UserId u, ItemId v) const {
    return user_vectors.row(u).dot(item_vectors.row(v));
  }
};

// u*, v* coordinates ~ Normal(0, variance 1/sqrt(d*)), b* ~ Normal(0, 0.5^2).
SyntheticWorld GenWorld(int num_users, int num_items, int d_star, double scale,
                        std::uint64_t seed);

// P(y = 1 | u, do(v)) = logistic(scale u*.v* + b*_v).
double OracleDoProbability(const SyntheticWorld& world, UserId user, ItemId item);

struct LoggingPolicy {
  double lambda_pop = 0.0;
  double lambda_pref = 0.0;
  Vector pop_logits;

  // Unnormalized exposure logits of one user over the catalog.
  Vector ExposureLogits(const SyntheticWorld& world, UserId user) const;
};

// pop_logits = -zipf_exponent * log(rank + 1) over a seeded item permutation.
LoggingPolicy MakeLoggingPolicy(const SyntheticWorld& world, double lambda_pop,
                                double lambda_pref, double zipf_exponent,
                                std::uint64_t seed);

// Per user: `interactions_per_user` items without replacement from the
// policy softmax, labels ~ Bernoulli(P*), timestamp = draw order. Rating and
// label both hold the 0/1 outcome.
std::vector<Interaction> GenObservational(const SyntheticWorld& world,
                                          const LoggingPolicy& policy,
                                          int interactions_per_user,
                                          std::uint64_t seed);

struct RandomizedTestLog {
  std::vector<Interaction> interactions;
  // Users that never drew a positive within the retry cap.
  std::vector<UserId> excluded_users;
};

inline constexpr int kDefaultRetryCap = 10;

// Per user: `per_user` items uniformly without replacement among those absent
// from the user's observational log, labels ~ Bernoulli(P*). A user whose
// draw has no positive is redrawn up to `retry_cap` times, then excluded.
// Timestamps follow the observational ones (first_timestamp + draw index).
RandomizedTestLog GenRandomizedTest(const SyntheticWorld& world,
                                    const std::vector<Interaction>& observational,
                                    int per_user, std::uint64_t seed,
                                    int retry_cap = kDefaultRetryCap,
                                    std::int64_t first_timestamp = 0);

// Simpson-style witness on an observational log: the pooled positive rate of
// the most exposed decile of items against the catalog mean of P*.
struct ConfoundingWitness {
  double over_exposed_positive_rate = 0.0;
  double catalog_mean_true_probability = 0.0;
  bool holds() const {
    return over_exposed_positive_rate > catalog_mean_true_probability;
  }
};

ConfoundingWitness MeasureConfounding(const SyntheticWorld& world,
                                      const std::vector<Interaction>& observational);

// Share of log interactions on the top decile of items by pop_logits.
double TopDecileExposureShare(const LoggingPolicy& policy,
                              const std::vector<Interaction>& log);

nlohmann::ordered_json WorldToJson(const SyntheticWorld& world);
SyntheticWorld WorldFromJson(const nlohmann::json& j);

struct SimulateConfig {
  int num_users = 200;
  int num_items = 300;
  int d_star = 16;
  double scale = 2.0;
  double lambda_pop = 2.0;
  double lambda_pref = 1.0;
  double zipf_exponent = 1.0;
  int interactions_per_user = 30;
  int test_per_user = 20;
  int retry_cap = kDefaultRetryCap;
  int max_history = kDefaultMaxHistory;
  std::uint64_t seed = 0;

  void Validate() const;
};

SimulateConfig SimulateConfigFromJson(const nlohmann::json& j);
nlohmann::ordered_json SimulateConfigToJson(const SimulateConfig& config);

struct Simulation {
  SyntheticWorld world;
  LoggingPolicy policy;
  std::vector<Interaction> observational;
  RandomizedTestLog test;
  // Observational log with one positive per user moved to validation, and the
  // randomized log as test.
  SplitDataset split;
};

Simulation Simulate(const SimulateConfig& config);

// observational.tsv, randomized_test.tsv, world.json, plus the split files
// (train.tsv, valid.tsv, test.tsv, meta.json) in `dir`.
void WriteSimulation(const std::filesystem::path& dir, const Simulation& sim,
                     const SimulateConfig& config);

}  // namespace ccf
