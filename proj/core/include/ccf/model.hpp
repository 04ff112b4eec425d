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

// Base recommenders: biased matrix factorization and an attention-pooling
// sequential model. Both are written as
//
//   score(u, x, v) = f(u, embed(u, x), v)
//
// where embed() maps the user and history to a d-vector representation. MF
// ignores the history and uses the user vector as the representation; the
// sequential model pools the history item vectors with scaled dot-product
// attention keyed on the most recent item. Counterfactual perturbation in
// latent space happens on that representation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ccf/dataset.hpp"

namespace ccf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ModelType { kMf, kAttnSeq };

const char* ModelTypeName(ModelType type);
ModelType ParseModelType(const std::string& name);

inline constexpr int kDefaultEmbeddingDim = 64;
inline constexpr double kDefaultInitStd = 0.1;

// History representation plus what backpropagation through it needs.
struct HistoryEmbedding {
  Vector x;
  History items;
  Vector attention;  // softmax weights over `items`; empty for MF
};

// Sparse parameter gradient: only rows reachable from the requests that fed
// it are stored.
class GradAccumulator {
 public:
  explicit GradAccumulator(int dim = 0) : dim_(dim) {}

  void Reset(int dim);
  void Clear();

  template <typename Derived>
  void AddUser(UserId u, const Eigen::MatrixBase<Derived>& g) {
    Row(user_rows_, u) += g;
  }
  template <typename Derived>
  void AddItem(ItemId v, const Eigen::MatrixBase<Derived>& g) {
    Row(item_rows_, v) += g;
  }
  void AddUserBias(UserId u, double g) { Slot(user_bias_, u) += g; }
  void AddItemBias(ItemId v, double g) { Slot(item_bias_, v) += g; }
  void AddGlobalBias(double g) { global_bias_ += g; }

  int dim() const { return dim_; }
  // (index, gradient row) pairs in first-touch order.
  std::vector<std::pair<int, Eigen::Map<const Vector>>> user_rows() const;
  std::vector<std::pair<int, Eigen::Map<const Vector>>> item_rows() const;
  const std::vector<std::pair<int, double>>& user_bias() const { return user_bias_; }
  const std::vector<std::pair<int, double>>& item_bias() const { return item_bias_; }
  double global_bias() const { return global_bias_; }

 private:
  struct Rows {
    std::vector<int> index;
    std::vector<double> values;
  };
  Eigen::Map<Vector> Row(Rows& rows, int index);
  static double& Slot(std::vector<std::pair<int, double>>& slots, int index);
  std::vector<std::pair<int, Eigen::Map<const Vector>>> View(const Rows& rows) const;

  int dim_;
  Rows user_rows_;
  Rows item_rows_;
  std::vector<std::pair<int, double>> user_bias_;
  std::vector<std::pair<int, double>> item_bias_;
  double global_bias_ = 0.0;
};

class RecModel {
 public:
  RecModel() = default;

  // Embeddings ~ Normal(0, init_std^2), biases 0.
  static RecModel Create(ModelType type, int num_users, int num_items, int dim,
                         std::uint64_t seed, double init_std = kDefaultInitStd);

  ModelType type() const { return type_; }
  int dim() const { return static_cast<int>(item_embeddings.cols()); }
  int num_users() const { return static_cast<int>(user_embeddings.rows()); }
  int num_items() const { return static_cast<int>(item_embeddings.rows()); }

  HistoryEmbedding Embed(UserId u, std::span<const ItemId> history) const;

  // Score with an explicit history representation (real or perturbed).
  double ScoreEmbedded(UserId u, const Vector& x, ItemId v) const;

  double Score(UserId u, std::span<const ItemId> history, ItemId v) const;

  // Scores for many candidates under one history.
  void ScoreCandidates(UserId u, std::span<const ItemId> history,
                       std::span<const ItemId> items, std::span<double> out) const;
  void ScoreCandidatesEmbedded(UserId u, const Vector& x,
                               std::span<const ItemId> items,
                               std::span<double> out) const;

  // Adds upstream * d ScoreEmbedded(u, x, v) to `grad` for every parameter
  // except the representation itself, whose gradient is added to `dx`.
  void BackwardEmbedded(UserId u, const Vector& x, ItemId v, double upstream,
                        GradAccumulator& grad, Vector& dx) const;

  // Chains a representation gradient `dx` back into the parameters that
  // produced `emb`.
  void BackwardEmbed(UserId u, const HistoryEmbedding& emb, const Vector& dx,
                     GradAccumulator& grad) const;

  // upstream * d Score(u, history, v) for all touched parameters.
  void Backward(UserId u, std::span<const ItemId> history, ItemId v,
                double upstream, GradAccumulator& grad) const;

  // theta -= lr * (g + l2 * theta) over every row touched in `grad`. The
  // global bias is not regularized.
  void ApplySgd(const GradAccumulator& grad, double learning_rate, double l2);

  // Sum of squared values of the rows touched in `grad` (biases included,
  // global bias excluded).
  double TouchedSquaredNorm(const GradAccumulator& grad) const;

  bool AllFinite() const;

  void CheckUser(UserId u) const;
  void CheckItem(ItemId v) const;

  Matrix user_embeddings;
  Matrix item_embeddings;
  Vector user_bias;  // MF only; size 0 for the sequential model
  Vector item_bias;
  double global_bias = 0.0;

 private:
  ModelType type_ = ModelType::kMf;
};

// Logistic of the score, read as P(y = 1 | u, x, v).
double PredictProb(const RecModel& model, UserId u, std::span<const ItemId> history,
                   ItemId v);

// The k highest-scoring candidates, descending, ties by ascending item id.
// Throws InvalidInput when k exceeds the candidate count.
std::vector<ItemId> TopK(const RecModel& model, UserId u,
                         std::span<const ItemId> history,
                         std::span<const ItemId> candidates, int k);

// 1-based position of `target` among `items` given their scores: one plus the
// number of strictly higher scores plus the number of equal scores held by a
// lower item id. `target` must be present in `items`.
int RankOf(ItemId target, std::span<const ItemId> items,
           std::span<const double> scores);

// Checkpoint JSON, 17 significant digits per value.
std::string SerializeCheckpoint(const RecModel& model);
RecModel ParseCheckpoint(const std::string& text);
void SaveCheckpoint(const RecModel& model, const std::filesystem::path& path);
RecModel LoadCheckpoint(const std::filesystem::path& path);

}  // namespace ccf
