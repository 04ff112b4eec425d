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

#include "ccf/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "ccf/baselines.hpp"
#include "ccf/error.hpp"
#include "ccf/json_fields.hpp"
#include "ccf/numeric.hpp"
#include "ccf/random.hpp"

namespace ccf {
namespace {

void Require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput("train config: " + message);
}

// d/dd of -ln(logistic(clamp(d))).
double BprGrad(double diff) {
  if (diff < -kLogitClamp || diff > kLogitClamp) return 0.0;
  return -Logistic(-diff);
}

double Sign(double x) { return (x > 0.0) - (x < 0.0); }

struct CacheKey {
  UserId user;
  ItemId target;
  History real;
  auto operator<=>(const CacheKey&) const = default;
};

// Per-example counterfactual state for one phase-2 selection round.
struct PhaseTwoState {
  // AttnSeq discrete: selected histories per train example.
  std::vector<std::vector<History>> histories;
  // MF discrete: frozen clone probabilities per kept (user, item).
  MatchingSelection matching;
};

class Trainer {
 public:
  Trainer(const SplitDataset& data, const TrainConfig& config,
          const TrainOptions& options)
      : data_(data), config_(config), options_(options),
        grad_(config.embedding_dim) {
    if (config_.ips) {
      propensity_.emplace(data_.item_popularity(), config_.ips_eta, config_.ips_clip);
    }
  }

  void RunEpoch(RecModel& model, int epoch, const PhaseTwoState* state,
                TrainedModel& out) {
    const auto& examples = data_.train_examples();
    if (examples.empty()) throw InvalidInput("training data has no positive examples");
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = MakeRng(config_.seed, {stream::kEpochShuffle,
                                         static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle);
    Rng negatives = MakeRng(config_.seed, {stream::kTrainNegative,
                                           static_cast<std::uint64_t>(epoch)});
    std::uniform_int_distribution<ItemId> pick(0, data_.num_items() - 1);

    double rank_sum = 0.0;
    double constraint_sum = 0.0;
    for (std::size_t t = 0; t < order.size(); ++t) {
      const std::size_t index = order[t];
      const auto& ex = examples[index];
      if (static_cast<int>(data_.train_positives(ex.user).size()) >=
          data_.num_items()) {
        throw InvalidInput("user " + std::to_string(ex.user) +
                           " has no item left to sample as a negative");
      }
      ItemId neg = pick(negatives);
      while (data_.IsTrainPositive(ex.user, neg)) neg = pick(negatives);

      const auto [rank_loss, constraint_loss] =
          Step(model, epoch, static_cast<std::int64_t>(t), index, neg, state);
      if (!std::isfinite(rank_loss) || !std::isfinite(constraint_loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", example " << index
            << " (user " << ex.user << ", item " << ex.item << ")";
        throw RuntimeFailure(msg.str());
      }
      rank_sum += rank_loss;
      constraint_sum += constraint_loss;
      if (options_.on_step) {
        options_.on_step(epoch, static_cast<std::int64_t>(t), rank_loss,
                         constraint_loss);
      }
    }
    if (!model.AllFinite()) {
      throw RuntimeFailure("non-finite parameters after epoch " + std::to_string(epoch));
    }
    const double n = static_cast<double>(order.size());
    out.trace.push_back({epoch, rank_sum / n, constraint_sum / n});
  }

 private:
  std::pair<double, double> Step(RecModel& model, int epoch, std::int64_t step,
                                 std::size_t index, ItemId neg,
                                 const PhaseTwoState* state) {
    const auto& ex = data_.train_examples()[index];
    const UserId u = ex.user;
    const ItemId v = ex.item;
    grad_.Clear();

    History history;
    if (model.type() == ModelType::kAttnSeq) {
      history = data_.HistoryOf(u, static_cast<std::size_t>(ex.position));
    }
    const HistoryEmbedding emb = model.Embed(u, history);
    const double s_pos = model.ScoreEmbedded(u, emb.x, v);
    const double s_neg = model.ScoreEmbedded(u, emb.x, neg);
    const double weight = propensity_ ? propensity_->Weight(v) : 1.0;
    const double rank_loss = weight * BprStepLoss(s_pos, s_neg);
    const double g = weight * BprGrad(s_pos - s_neg);

    Vector dx = Vector::Zero(model.dim());
    model.BackwardEmbedded(u, emb.x, v, g, grad_, dx);
    model.BackwardEmbedded(u, emb.x, neg, -g, grad_, dx);

    double constraint_loss = 0.0;
    if (state != nullptr && config_.omega > 0.0) {
      constraint_loss = Constraint(model, epoch, step, index, emb, s_pos, *state, dx);
    }
    model.BackwardEmbed(u, emb, dx, grad_);
    model.ApplySgd(grad_, config_.learning_rate, config_.l2_lambda);
    return {rank_loss, constraint_loss};
  }

  // Adds omega * d(hinge) to the gradient when the hinge is active and returns
  // the unweighted hinge value.
  double Constraint(const RecModel& model, int epoch, std::int64_t step,
                    std::size_t index, const HistoryEmbedding& emb, double s_pos,
                    const PhaseTwoState& state, Vector& dx) {
    const auto& ex = data_.train_examples()[index];
    const UserId u = ex.user;
    const ItemId v = ex.item;
    const double p_real = Logistic(s_pos);
    const double omega = config_.omega;

    if (config_.is_continuous()) {
      const int m = config_.mc_samples;
      const auto samples = SampleContinuous(
          emb.x, config_.epsilon2, m,
          DeriveSeed(config_.seed, {stream::kContinuous, static_cast<std::uint64_t>(epoch),
                                    static_cast<std::uint64_t>(step)}));
      std::vector<double> scores(samples.size());
      double deviation = 0.0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        scores[i] = model.ScoreEmbedded(u, samples[i], v);
        deviation += std::abs(Logistic(scores[i]) - p_real);
      }
      deviation /= m;
      const double hinge = std::max(0.0, deviation - config_.epsilon);
      if (hinge <= 0.0) return 0.0;
      double real_coef = 0.0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const double sgn = Sign(Logistic(scores[i]) - p_real);
        if (sgn == 0.0) continue;
        model.BackwardEmbedded(u, samples[i], v,
                               omega * sgn * LogisticGrad(scores[i]) / m, grad_, dx);
        real_coef -= sgn / m;
      }
      model.BackwardEmbedded(u, emb.x, v, omega * real_coef * LogisticGrad(s_pos),
                             grad_, dx);
      return hinge;
    }

    if (model.type() == ModelType::kMf) {
      const auto it = state.matching.kept.find({u, v});
      if (it == state.matching.kept.end()) return 0.0;
      const double hinge = ConstraintLossDiscrete(p_real, it->second, config_.epsilon);
      if (hinge <= 0.0) return 0.0;
      double real_coef = 0.0;
      for (double p : it->second) real_coef -= Sign(p - p_real);
      model.BackwardEmbedded(u, emb.x, v, omega * real_coef * LogisticGrad(s_pos),
                             grad_, dx);
      return hinge;
    }

    const auto& histories = state.histories[index];
    if (histories.empty()) return 0.0;
    std::vector<HistoryEmbedding> cf_emb;
    std::vector<double> scores, probs;
    cf_emb.reserve(histories.size());
    for (const auto& h : histories) {
      cf_emb.push_back(model.Embed(u, h));
      scores.push_back(model.ScoreEmbedded(u, cf_emb.back().x, v));
      probs.push_back(Logistic(scores.back()));
    }
    const double hinge = ConstraintLossDiscrete(p_real, probs, config_.epsilon);
    if (hinge <= 0.0) return 0.0;
    double real_coef = 0.0;
    Vector dx_cf(model.dim());
    for (std::size_t i = 0; i < histories.size(); ++i) {
      const double sgn = Sign(probs[i] - p_real);
      if (sgn == 0.0) continue;
      dx_cf.setZero();
      model.BackwardEmbedded(u, cf_emb[i].x, v, omega * sgn * LogisticGrad(scores[i]),
                             grad_, dx_cf);
      model.BackwardEmbed(u, cf_emb[i], dx_cf, grad_);
      real_coef -= sgn;
    }
    model.BackwardEmbedded(u, emb.x, v, omega * real_coef * LogisticGrad(s_pos),
                           grad_, dx);
    return hinge;
  }

  const SplitDataset& data_;
  const TrainConfig& config_;
  const TrainOptions& options_;
  GradAccumulator grad_;
  std::optional<PropensityTable> propensity_;
};

std::map<CacheKey, std::vector<History>> LoadCache(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open counterfactual cache " + path);
  std::map<CacheKey, std::vector<History>> cache;
  for (auto& batch : ReadCounterfactualCache(in)) {
    auto& slot = cache[{batch.user, batch.target, batch.real_history}];
    for (auto& h : batch.counterfactuals) slot.push_back(std::move(h));
  }
  return cache;
}

// Generation and selection for every train example against a frozen snapshot.
std::vector<std::vector<History>> SelectForExamples(const SplitDataset& data,
                                                    const TrainConfig& config,
                                                    HeuristicRule rule,
                                                    const RecModel& snapshot,
                                                    int round,
                                                    CounterfactualStats& stats) {
  const auto& examples = data.train_examples();
  std::vector<std::vector<History>> out(examples.size());
  const bool use_cache = round == 0 && !config.counterfactual_cache.empty();
  if (use_cache && std::filesystem::exists(config.counterfactual_cache)) {
    auto cache = LoadCache(config.counterfactual_cache);
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const auto& ex = examples[i];
      auto it = cache.find({ex.user, ex.item,
                            data.HistoryOf(ex.user, static_cast<std::size_t>(ex.position))});
      if (it != cache.end()) out[i] = it->second;
      stats.selected += static_cast<std::int64_t>(out[i].size());
      stats.constrained_examples += out[i].empty() ? 0 : 1;
    }
    return out;
  }

  const CounterfactualGenerator generator(
      rule, snapshot, {config.replacements_per_position, config.generation_limit});
  std::vector<CounterfactualBatch> batches;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    History real = data.HistoryOf(ex.user, static_cast<std::size_t>(ex.position));
    const auto r = static_cast<std::uint64_t>(round);
    const auto candidates =
        generator.Generate(real, DeriveSeed(config.seed, {stream::kGenerate, r, i}));
    stats.generated += static_cast<std::int64_t>(candidates.size());
    if (candidates.empty()) continue;
    CounterfactualBatch batch =
        Select(snapshot, data, ex.user, std::move(real), candidates, ex.item, config.k,
               DeriveSeed(config.seed, {stream::kSelectNegative, r, i}),
               config.max_selected);
    stats.selected += batch.n();
    stats.constrained_examples += batch.n() > 0 ? 1 : 0;
    out[i] = batch.counterfactuals;
    if (use_cache && batch.n() > 0) batches.push_back(std::move(batch));
  }
  if (use_cache) {
    std::ofstream cache(config.counterfactual_cache);
    if (!cache) {
      throw RuntimeFailure("cannot write counterfactual cache " +
                           config.counterfactual_cache);
    }
    WriteCounterfactualCache(cache, batches);
  }
  return out;
}

PhaseTwoState PreparePhaseTwo(const SplitDataset& data, const TrainConfig& config,
                              const RecModel& snapshot, int round,
                              CounterfactualStats& stats, CloneCache* clone_cache) {
  PhaseTwoState state;
  const auto rule = config.discrete_rule();
  if (!rule) return state;
  if (snapshot.type() == ModelType::kMf) {
    state.matching =
        MatchingRetrainFilter(data, *rule, config, snapshot, clone_cache, round);
    stats.generated += state.matching.eligible;
    stats.selected += state.matching.selected;
    stats.constrained_examples += static_cast<std::int64_t>(state.matching.kept.size());
  } else {
    state.histories = SelectForExamples(data, config, *rule, snapshot, round, stats);
  }
  return state;
}

}  // namespace

TrainConfig PhaseOneConfig(const TrainConfig& config) {
  // Constraint settings are reset so that they do not split cache keys.
  TrainConfig base;
  base.model_type = config.model_type;
  base.epochs = config.pretrain_epochs;
  base.pretrain_epochs = config.pretrain_epochs;
  base.learning_rate = config.learning_rate;
  base.l2_lambda = config.l2_lambda;
  base.seed = config.seed;
  base.embedding_dim = config.embedding_dim;
  base.init_std = config.init_std;
  base.ips = config.ips;
  base.ips_eta = config.ips_eta;
  base.ips_clip = config.ips_clip;
  return base;
}

void TrainConfig::Validate() const {
  Require(rule == "none" || rule == "C" || ParseRule(rule).has_value(),
          "invalid rule '" + rule + "'; valid rules: " + kValidRuleNames);
  Require(omega >= 0.0, "omega must be >= 0");
  Require(epsilon >= 0.0, "epsilon must be >= 0");
  Require(epsilon2 >= 0.0, "epsilon2 must be >= 0");
  Require(mc_samples >= 1, "mc_samples must be >= 1");
  Require(learning_rate > 0.0, "learning_rate must be > 0");
  Require(l2_lambda >= 0.0, "l2_lambda must be >= 0");
  Require(pretrain_epochs >= 0, "pretrain_epochs must be >= 0");
  Require(epochs >= pretrain_epochs, "epochs must be >= pretrain_epochs");
  Require(refresh_interval >= 0, "refresh_interval must be >= 0");
  Require(k >= 1 && k <= kSelectionNegatives + 1, "k must be in [1, 101]");
  Require(embedding_dim >= 1, "embedding_dim must be >= 1");
  Require(init_std >= 0.0, "init_std must be >= 0");
  Require(ips_eta >= 0.0, "ips_eta must be >= 0");
  Require(ips_clip >= 1.0, "ips_clip must be >= 1");
  Require(replacements_per_position >= 1, "replacements_per_position must be >= 1");
  Require(generation_limit >= 1, "generation_limit must be >= 1");
  Require(max_selected >= 1, "max_selected must be >= 1");
  Require(alpha > 0.0 && alpha <= 1.0, "alpha must be in (0, 1]");
  Require(retrain_clones >= 1, "retrain_clones must be >= 1");
}

TrainConfig TrainConfigFromJson(const nlohmann::json& j) {
  TrainConfig c;
  JsonFields f(j, "train config");
  std::string model_type = ModelTypeName(c.model_type);
  f.Optional("model_type", model_type);
  c.model_type = ParseModelType(model_type);
  f.Optional("rule", c.rule);
  f.Optional("k", c.k);
  f.Optional("omega", c.omega);
  f.Optional("epsilon", c.epsilon);
  f.Optional("epsilon2", c.epsilon2);
  f.Optional("mc_samples", c.mc_samples);
  f.Optional("learning_rate", c.learning_rate);
  f.Optional("l2_lambda", c.l2_lambda);
  f.Optional("epochs", c.epochs);
  f.Optional("pretrain_epochs", c.pretrain_epochs);
  f.Optional("refresh_interval", c.refresh_interval);
  f.Optional("seed", c.seed);
  f.Optional("embedding_dim", c.embedding_dim);
  f.Optional("init_std", c.init_std);
  f.Optional("ips", c.ips);
  f.Optional("ips_eta", c.ips_eta);
  f.Optional("ips_clip", c.ips_clip);
  f.Optional("replacements_per_position", c.replacements_per_position);
  f.Optional("generation_limit", c.generation_limit);
  f.Optional("max_selected", c.max_selected);
  f.Optional("alpha", c.alpha);
  f.Optional("retrain_clones", c.retrain_clones);
  f.Optional("counterfactual_cache", c.counterfactual_cache);
  f.RejectUnknown();
  c.Validate();
  return c;
}

nlohmann::ordered_json TrainConfigToJson(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["model_type"] = ModelTypeName(c.model_type);
  j["rule"] = c.rule;
  j["k"] = c.k;
  j["omega"] = c.omega;
  j["epsilon"] = c.epsilon;
  j["epsilon2"] = c.epsilon2;
  j["mc_samples"] = c.mc_samples;
  j["learning_rate"] = c.learning_rate;
  j["l2_lambda"] = c.l2_lambda;
  j["epochs"] = c.epochs;
  j["pretrain_epochs"] = c.pretrain_epochs;
  j["refresh_interval"] = c.refresh_interval;
  j["seed"] = c.seed;
  j["embedding_dim"] = c.embedding_dim;
  j["init_std"] = c.init_std;
  j["ips"] = c.ips;
  j["ips_eta"] = c.ips_eta;
  j["ips_clip"] = c.ips_clip;
  j["replacements_per_position"] = c.replacements_per_position;
  j["generation_limit"] = c.generation_limit;
  j["max_selected"] = c.max_selected;
  j["alpha"] = c.alpha;
  j["retrain_clones"] = c.retrain_clones;
  j["counterfactual_cache"] = c.counterfactual_cache;
  return j;
}

double BprStepLoss(double s_pos, double s_neg) {
  // -ln(logistic(d)) = ln(1 + e^-d), written to stay accurate for large d.
  const double d = ClampLogit(s_pos - s_neg);
  return std::log1p(std::exp(-d));
}

double ConstraintLossDiscrete(double p_real, std::span<const double> p_cf,
                              double epsilon) {
  double deviation = 0.0;
  for (double p : p_cf) deviation += std::abs(p - p_real);
  return std::max(0.0, deviation - epsilon);
}

double ConstraintLossContinuous(const RecModel& model, UserId user, const Vector& x,
                                ItemId target, double epsilon1, double epsilon2,
                                int mc_samples, std::uint64_t seed) {
  if (mc_samples < 1) throw InvalidInput("mc_samples must be >= 1");
  const double p_real = Logistic(model.ScoreEmbedded(user, x, target));
  double deviation = 0.0;
  for (const Vector& xs : SampleContinuous(x, epsilon2, mc_samples, seed)) {
    deviation += std::abs(Logistic(model.ScoreEmbedded(user, xs, target)) - p_real);
  }
  return std::max(0.0, deviation / mc_samples - epsilon1);
}

TrainedModel Pretrain(const SplitDataset& data, const TrainConfig& config,
                      const TrainOptions& options) {
  config.Validate();
  const TrainConfig base = config.is_base() ? config : PhaseOneConfig(config);
  TrainedModel out;
  out.config = config;
  out.model = RecModel::Create(config.model_type, data.num_users(), data.num_items(),
                               config.embedding_dim, config.seed, config.init_std);
  Trainer trainer(data, base, options);
  for (int epoch = 0; epoch < base.epochs; ++epoch) {
    trainer.RunEpoch(out.model, epoch, nullptr, out);
  }
  return out;
}

TrainedModel ContinueTraining(const SplitDataset& data, const TrainConfig& config,
                              TrainedModel phase1, const TrainOptions& options) {
  config.Validate();
  TrainedModel out = std::move(phase1);
  out.config = config;
  const int start = static_cast<int>(out.trace.size());
  if (config.is_base() || start >= config.epochs) {
    Trainer trainer(data, config, options);
    for (int epoch = start; epoch < config.epochs; ++epoch) {
      trainer.RunEpoch(out.model, epoch, nullptr, out);
    }
    return out;
  }
  if (start != config.pretrain_epochs) {
    throw InvalidInput("phase-1 result has " + std::to_string(start) +
                       " epochs, expected pretrain_epochs = " +
                       std::to_string(config.pretrain_epochs));
  }

  Trainer trainer(data, config, options);
  const bool constrained = config.omega > 0.0;
  PhaseTwoState state;
  int round = 0;
  for (int epoch = start; epoch < config.epochs; ++epoch) {
    const int offset = epoch - start;
    const bool refresh =
        offset == 0 || (config.refresh_interval > 0 && offset % config.refresh_interval == 0);
    if (constrained && refresh && !config.is_continuous()) {
      const RecModel snapshot = out.model;
      state = PreparePhaseTwo(data, config, snapshot, round++, out.stats,
                              options.clone_cache);
    }
    trainer.RunEpoch(out.model, epoch, constrained ? &state : nullptr, out);
  }
  return out;
}

TrainedModel Train(const SplitDataset& data, const TrainConfig& config,
                   const TrainOptions& options) {
  return ContinueTraining(data, config, Pretrain(data, config, options), options);
}

SplitDataset CounterfactualTrainSet(const SplitDataset& data, HeuristicRule rule,
                                    const RecModel& base_model, std::uint64_t seed,
                                    int clone_index,
                                    std::vector<std::pair<UserId, ItemId>>* targets) {
  std::vector<ItemId> neighbors;
  if (rule == HeuristicRule::kReplaceOneNearest) {
    neighbors = NearestNeighbors(base_model.item_embeddings);
  }
  // Train-positive row indices per user, chronological (stable on timestamp).
  const auto& train = data.train();
  std::vector<std::vector<std::size_t>> rows(data.num_users());
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].label == 1) rows[train[i].user].push_back(i);
  }
  std::vector<char> drop(train.size(), 0);
  std::vector<ItemId> replace(train.size(), -1);
  if (targets) targets->clear();
  const auto c = static_cast<std::uint64_t>(clone_index);

  for (UserId u = 0; u < data.num_users(); ++u) {
    auto& mine = rows[u];
    std::stable_sort(mine.begin(), mine.end(), [&](std::size_t a, std::size_t b) {
      return train[a].timestamp < train[b].timestamp;
    });
    const int n = static_cast<int>(mine.size());
    if (n < 1 || (rule != HeuristicRule::kReplaceOneRandom &&
                  rule != HeuristicRule::kReplaceOneNearest && n < 2)) {
      continue;
    }
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = MakeRng(seed, {stream::kClone, static_cast<std::uint64_t>(u)});
    std::shuffle(perm.begin(), perm.end(), rng);
    if (clone_index >= n) continue;
    const std::size_t chosen = mine[perm[clone_index]];

    std::set<ItemId> removed;
    switch (rule) {
      case HeuristicRule::kDeleteOne:
        drop[chosen] = 1;
        removed.insert(train[chosen].item);
        break;
      case HeuristicRule::kKeepOne:
        for (std::size_t row : mine) {
          if (row == chosen) continue;
          drop[row] = 1;
          removed.insert(train[row].item);
        }
        removed.erase(train[chosen].item);
        break;
      case HeuristicRule::kReplaceOneRandom: {
        const auto positives = data.train_positives(u);
        if (static_cast<int>(positives.size()) >= data.num_items()) break;
        Rng pick_rng = MakeRng(seed, {stream::kClone, static_cast<std::uint64_t>(u), c});
        std::uniform_int_distribution<ItemId> pick(0, data.num_items() - 1);
        ItemId item = pick(pick_rng);
        while (data.IsTrainPositive(u, item)) item = pick(pick_rng);
        replace[chosen] = item;
        removed.insert(train[chosen].item);
        break;
      }
      case HeuristicRule::kReplaceOneNearest:
        replace[chosen] = neighbors.at(train[chosen].item);
        removed.insert(train[chosen].item);
        break;
    }
    if (targets) {
      for (ItemId v : removed) targets->emplace_back(u, v);
    }
  }

  std::vector<Interaction> edited;
  edited.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (drop[i]) continue;
    Interaction row = train[i];
    if (replace[i] >= 0) row.item = replace[i];
    edited.push_back(row);
  }
  return SplitDataset(data.num_users(), data.num_items(), std::move(edited), {}, {},
                      data.max_history(), data.binary());
}

MatchingSelection MatchingRetrainFilter(const SplitDataset& data, HeuristicRule rule,
                                        const TrainConfig& config,
                                        const RecModel& base_model,
                                        CloneCache* clone_cache, int round) {
  if (config.model_type != ModelType::kMf) {
    throw InvalidInput("matching retrain filter requires model_type mf");
  }
  MatchingSelection out;
  TrainConfig clone_config = PhaseOneConfig(config);
  std::vector<ItemId> items(kSelectionNegatives + 1);
  std::vector<double> scores(items.size());
  for (int c = 0; c < config.retrain_clones; ++c) {
    std::vector<std::pair<UserId, ItemId>> targets;
    const SplitDataset edited =
        CounterfactualTrainSet(data, rule, base_model, config.seed, c, &targets);
    const std::string key = std::string(RuleName(rule)) + "/" + std::to_string(c) + "/" +
                            std::to_string(round) + "/" +
                            TrainConfigToJson(clone_config).dump();
    RecModel clone;
    if (clone_cache && clone_cache->count(key)) {
      clone = clone_cache->at(key);
    } else {
      clone = edited.train_examples().empty()
                  ? RecModel::Create(config.model_type, data.num_users(),
                                     data.num_items(), config.embedding_dim,
                                     config.seed, config.init_std)
                  : Pretrain(edited, clone_config).model;
      if (clone_cache) clone_cache->emplace(key, clone);
    }
    out.eligible += static_cast<std::int64_t>(targets.size());
    for (const auto& [u, v] : targets) {
      const auto negatives = data.SampleNegatives(
          u, v, kSelectionNegatives,
          DeriveSeed(config.seed, {stream::kSelectNegative, static_cast<std::uint64_t>(c),
                                   static_cast<std::uint64_t>(u),
                                   static_cast<std::uint64_t>(v)}));
      std::copy(negatives.begin(), negatives.end(), items.begin());
      items.back() = v;
      clone.ScoreCandidates(u, {}, items, scores);
      if (RankOf(v, items, scores) > config.k) continue;
      out.kept[{u, v}].push_back(PredictProb(clone, u, {}, v));
      ++out.selected;
    }
    out.clones.push_back(std::move(clone));
  }
  return out;
}

void WriteTrace(const std::string& path, const std::vector<EpochLoss>& trace) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << "epoch,rank_loss,constraint_loss\n";
  char line[128];
  for (const auto& e : trace) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", e.epoch, e.rank_loss,
                  e.constraint_loss);
    out << line;
  }
}

}  // namespace ccf
