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

// Constrained training: pairwise ranking loss plus the hinge-relaxed
// counterfactual constraint, in two phases. Phase 1 trains the base model;
// phase 2 builds counterfactuals against the frozen phase-1 model and keeps
// training with
//
//   loss = w_ips * bpr + l2 + omega * max(0, deviation - epsilon)
//
// evaluated per training example. The deviation is the summed absolute
// probability gap between selected counterfactual histories and the real one
// (discrete rules) or its Monte Carlo mean over latent perturbations (rule C).

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccf/counterfactual.hpp"
#include "ccf/dataset.hpp"
#include "ccf/model.hpp"

namespace ccf {

struct TrainConfig {
  ModelType model_type = ModelType::kMf;
  // "none" (base model), a discrete rule "K1" / "D1" / "R1r" / "R1n", or "C"
  // for latent-space counterfactuals.
  std::string rule = "none";
  int k = 50;
  double omega = 0.1;
  // Hinge threshold (epsilon_1 for rule C).
  double epsilon = 0.5;
  // Squared-radius bound of latent perturbations.
  double epsilon2 = 1.0;
  int mc_samples = 10;
  double learning_rate = 0.005;
  double l2_lambda = 1e-4;
  int epochs = 100;
  int pretrain_epochs = 30;
  // Epochs between counterfactual regeneration in phase 2; 0 = once.
  int refresh_interval = 0;
  std::uint64_t seed = 0;
  int embedding_dim = kDefaultEmbeddingDim;
  double init_std = kDefaultInitStd;
  bool ips = false;
  double ips_eta = 0.5;
  double ips_clip = 10.0;
  int replacements_per_position = 5;
  int generation_limit = 20;
  int max_selected = 5;
  double alpha = kDefaultAlpha;
  // MF only: number of retrained clones, each editing one more history item
  // per user.
  int retrain_clones = 1;
  // Optional path; selected counterfactuals are read from it when it exists
  // and written to it otherwise.
  std::string counterfactual_cache;

  bool is_base() const { return rule == "none"; }
  bool is_continuous() const { return rule == "C"; }
  std::optional<HeuristicRule> discrete_rule() const { return ParseRule(rule); }

  // Throws InvalidInput on any violated invariant.
  void Validate() const;
};

inline constexpr const char* kValidRuleNames = "none, K1, D1, R1r, R1n, C";

// Keys are exactly the field names; unknown keys are rejected.
TrainConfig TrainConfigFromJson(const nlohmann::json& j);
nlohmann::ordered_json TrainConfigToJson(const TrainConfig& config);

struct EpochLoss {
  int epoch = 0;
  double rank_loss = 0.0;
  double constraint_loss = 0.0;
};

struct CounterfactualStats {
  std::int64_t generated = 0;
  std::int64_t selected = 0;
  std::int64_t constrained_examples = 0;
};

struct TrainedModel {
  RecModel model;
  TrainConfig config;
  std::vector<EpochLoss> trace;
  CounterfactualStats stats;
};

// Called after every SGD step with that step's ranking and constraint loss.
using StepObserver = std::function<void(int epoch, std::int64_t step,
                                        double rank_loss, double constraint_loss)>;

// Retrained matching-model clones keyed by everything they depend on, so
// runs that share phase-1 settings and rule train each clone once.
using CloneCache = std::map<std::string, RecModel>;

struct TrainOptions {
  StepObserver on_step;
  CloneCache* clone_cache = nullptr;
};

// -ln(logistic(s_pos - s_neg)), logistic argument clamped to [-30, 30].
double BprStepLoss(double s_pos, double s_neg);

// max(0, sum_i |p_cf[i] - p_real| - epsilon).
double ConstraintLossDiscrete(double p_real, std::span<const double> p_cf,
                              double epsilon);

// max(0, mean_i |P(u, x_i, v) - P(u, x, v)| - epsilon1) with x_i drawn by
// SampleContinuous around the representation x.
double ConstraintLossContinuous(const RecModel& model, UserId user, const Vector& x,
                                ItemId target, double epsilon1, double epsilon2,
                                int mc_samples, std::uint64_t seed);

// The base-training config that phase 1 of `config` runs: no rule,
// pretrain_epochs epochs. Configs that differ only in constraint settings
// share it.
TrainConfig PhaseOneConfig(const TrainConfig& config);

// Phase 1 only: `pretrain_epochs` epochs of base training (the full schedule
// when the config has no constraint).
TrainedModel Pretrain(const SplitDataset& data, const TrainConfig& config,
                      const TrainOptions& options = {});

// Phase 2 on top of a phase-1 result produced under the same base settings.
TrainedModel ContinueTraining(const SplitDataset& data, const TrainConfig& config,
                              TrainedModel phase1, const TrainOptions& options = {});

TrainedModel Train(const SplitDataset& data, const TrainConfig& config,
                   const TrainOptions& options = {});

// Matching-model counterfactuals: apply the rule to every user's train
// positives, retrain clones on the edited data, and keep (user, removed item)
// pairs the clone still ranks in its top k of 101 candidates.
struct MatchingSelection {
  std::vector<RecModel> clones;
  // Kept pairs with the frozen clones' probabilities, one per clone keeping it.
  std::map<std::pair<UserId, ItemId>, std::vector<double>> kept;
  std::int64_t eligible = 0;
  std::int64_t selected = 0;
};

// `round` numbers the selection refresh; it only matters for the cache key.
MatchingSelection MatchingRetrainFilter(const SplitDataset& data, HeuristicRule rule,
                                        const TrainConfig& config,
                                        const RecModel& base_model,
                                        CloneCache* clone_cache = nullptr,
                                        int round = 0);

// The clone's training data: every user's train positives edited by the rule
// (clone `clone_index` picks a different item per user); `targets` receives
// the removed (user, item) pairs.
SplitDataset CounterfactualTrainSet(const SplitDataset& data, HeuristicRule rule,
                                    const RecModel& base_model, std::uint64_t seed,
                                    int clone_index,
                                    std::vector<std::pair<UserId, ItemId>>* targets);

void WriteTrace(const std::string& path, const std::vector<EpochLoss>& trace);

}  // namespace ccf
