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

#include "ccf/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ccf/error.hpp"
#include "ccf/numeric.hpp"
#include "ccf/random.hpp"

namespace ccf {

const char* ModelTypeName(ModelType type) {
  return type == ModelType::kMf ? "mf" : "attnseq";
}

ModelType ParseModelType(const std::string& name) {
  if (name == "mf") return ModelType::kMf;
  if (name == "attnseq") return ModelType::kAttnSeq;
  throw InvalidInput("unknown model_type '" + name + "' (expected mf or attnseq)");
}

// --- GradAccumulator ---------------------------------------------------------

void GradAccumulator::Reset(int dim) {
  dim_ = dim;
  Clear();
}

void GradAccumulator::Clear() {
  user_rows_.index.clear();
  user_rows_.values.clear();
  item_rows_.index.clear();
  item_rows_.values.clear();
  user_bias_.clear();
  item_bias_.clear();
  global_bias_ = 0.0;
}

Eigen::Map<Vector> GradAccumulator::Row(Rows& rows, int index) {
  for (std::size_t r = 0; r < rows.index.size(); ++r) {
    if (rows.index[r] == index) {
      return Eigen::Map<Vector>(rows.values.data() + r * dim_, dim_);
    }
  }
  rows.index.push_back(index);
  rows.values.resize(rows.values.size() + dim_, 0.0);
  return Eigen::Map<Vector>(rows.values.data() + rows.values.size() - dim_, dim_);
}

double& GradAccumulator::Slot(std::vector<std::pair<int, double>>& slots, int index) {
  for (auto& [i, g] : slots) {
    if (i == index) return g;
  }
  slots.emplace_back(index, 0.0);
  return slots.back().second;
}

std::vector<std::pair<int, Eigen::Map<const Vector>>> GradAccumulator::View(
    const Rows& rows) const {
  std::vector<std::pair<int, Eigen::Map<const Vector>>> out;
  out.reserve(rows.index.size());
  for (std::size_t r = 0; r < rows.index.size(); ++r) {
    out.emplace_back(rows.index[r],
                     Eigen::Map<const Vector>(rows.values.data() + r * dim_, dim_));
  }
  return out;
}

std::vector<std::pair<int, Eigen::Map<const Vector>>> GradAccumulator::user_rows()
    const {
  return View(user_rows_);
}

std::vector<std::pair<int, Eigen::Map<const Vector>>> GradAccumulator::item_rows()
    const {
  return View(item_rows_);
}

// --- RecModel ----------------------------------------------------------------

RecModel RecModel::Create(ModelType type, int num_users, int num_items, int dim,
                          std::uint64_t seed, double init_std) {
  if (num_users < 1 || num_items < 1) {
    throw InvalidInput("model needs at least one user and one item");
  }
  if (dim < 1) throw InvalidInput("embedding dimension must be >= 1");
  if (!(init_std >= 0.0)) throw InvalidInput("init_std must be >= 0");
  RecModel m;
  m.type_ = type;
  Rng rng = MakeRng(seed, {stream::kInit});
  std::normal_distribution<double> normal(0.0, init_std);
  m.user_embeddings.resize(num_users, dim);
  m.item_embeddings.resize(num_items, dim);
  for (Eigen::Index i = 0; i < m.user_embeddings.size(); ++i) {
    m.user_embeddings.data()[i] = init_std > 0.0 ? normal(rng) : 0.0;
  }
  for (Eigen::Index i = 0; i < m.item_embeddings.size(); ++i) {
    m.item_embeddings.data()[i] = init_std > 0.0 ? normal(rng) : 0.0;
  }
  if (type == ModelType::kMf) m.user_bias = Vector::Zero(num_users);
  m.item_bias = Vector::Zero(num_items);
  m.global_bias = 0.0;
  return m;
}

void RecModel::CheckUser(UserId u) const {
  if (u < 0 || u >= num_users()) {
    throw InvalidInput("user id " + std::to_string(u) + " outside [0, " +
                       std::to_string(num_users()) + ")");
  }
}

void RecModel::CheckItem(ItemId v) const {
  if (v < 0 || v >= num_items()) {
    throw InvalidInput("item id " + std::to_string(v) + " outside [0, " +
                       std::to_string(num_items()) + ")");
  }
}

HistoryEmbedding RecModel::Embed(UserId u, std::span<const ItemId> history) const {
  CheckUser(u);
  HistoryEmbedding emb;
  if (type_ == ModelType::kMf) {
    emb.x = user_embeddings.row(u).transpose();
    return emb;
  }
  emb.items.assign(history.begin(), history.end());
  emb.x = Vector::Zero(dim());
  if (history.empty()) return emb;
  for (ItemId i : history) CheckItem(i);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim()));
  const auto key = item_embeddings.row(history.back());
  const std::size_t len = history.size();
  emb.attention.resize(static_cast<Eigen::Index>(len));
  for (std::size_t t = 0; t < len; ++t) {
    emb.attention[t] = item_embeddings.row(history[t]).dot(key) * inv_sqrt_d;
  }
  const double max_logit = emb.attention.maxCoeff();
  emb.attention = (emb.attention.array() - max_logit).exp();
  emb.attention /= emb.attention.sum();
  for (std::size_t t = 0; t < len; ++t) {
    emb.x += emb.attention[t] * item_embeddings.row(history[t]).transpose();
  }
  return emb;
}

double RecModel::ScoreEmbedded(UserId u, const Vector& x, ItemId v) const {
  CheckUser(u);
  CheckItem(v);
  const auto q = item_embeddings.row(v);
  if (type_ == ModelType::kMf) {
    return q.dot(x) + user_bias[u] + item_bias[v] + global_bias;
  }
  return user_embeddings.row(u).dot(q) + q.dot(x) + item_bias[v] + global_bias;
}

double RecModel::Score(UserId u, std::span<const ItemId> history, ItemId v) const {
  return ScoreEmbedded(u, Embed(u, history).x, v);
}

void RecModel::ScoreCandidates(UserId u, std::span<const ItemId> history,
                               std::span<const ItemId> items,
                               std::span<double> out) const {
  ScoreCandidatesEmbedded(u, Embed(u, history).x, items, out);
}

void RecModel::ScoreCandidatesEmbedded(UserId u, const Vector& x,
                                       std::span<const ItemId> items,
                                       std::span<double> out) const {
  CheckUser(u);
  if (out.size() != items.size()) throw InvalidInput("score buffer size mismatch");
  // Effective query: x (+ P[u] for the sequential model), plus per-item bias.
  Vector query = x;
  double offset = global_bias;
  if (type_ == ModelType::kMf) {
    offset += user_bias[u];
  } else {
    query += user_embeddings.row(u).transpose();
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    CheckItem(items[i]);
    out[i] = item_embeddings.row(items[i]).dot(query) + item_bias[items[i]] + offset;
  }
}

void RecModel::BackwardEmbedded(UserId u, const Vector& x, ItemId v, double upstream,
                                GradAccumulator& grad, Vector& dx) const {
  const auto q = item_embeddings.row(v).transpose();
  dx += upstream * q;
  if (type_ == ModelType::kMf) {
    grad.AddItem(v, upstream * x);
    grad.AddUserBias(u, upstream);
  } else {
    grad.AddUser(u, upstream * q);
    grad.AddItem(v, upstream * (user_embeddings.row(u).transpose() + x));
  }
  grad.AddItemBias(v, upstream);
  grad.AddGlobalBias(upstream);
}

void RecModel::BackwardEmbed(UserId u, const HistoryEmbedding& emb, const Vector& dx,
                             GradAccumulator& grad) const {
  if (type_ == ModelType::kMf) {
    grad.AddUser(u, dx);
    return;
  }
  const std::size_t len = emb.items.size();
  if (len == 0) return;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim()));
  const ItemId last = emb.items.back();
  // Value path and attention-logit path of h = sum_t a_t Q[i_t],
  // a = softmax(Q[i_t] . Q[i_L] / sqrt(d)).
  Vector c(static_cast<Eigen::Index>(len));
  for (std::size_t t = 0; t < len; ++t) c[t] = item_embeddings.row(emb.items[t]).dot(dx);
  const double mean_c = emb.attention.dot(c);
  const Vector key = item_embeddings.row(last).transpose();
  Vector key_grad = Vector::Zero(dim());
  for (std::size_t t = 0; t < len; ++t) {
    const double de = emb.attention[t] * (c[t] - mean_c) * inv_sqrt_d;
    grad.AddItem(emb.items[t], emb.attention[t] * dx + de * key);
    key_grad += de * item_embeddings.row(emb.items[t]).transpose();
  }
  grad.AddItem(last, key_grad);
}

void RecModel::Backward(UserId u, std::span<const ItemId> history, ItemId v,
                        double upstream, GradAccumulator& grad) const {
  const HistoryEmbedding emb = Embed(u, history);
  Vector dx = Vector::Zero(dim());
  BackwardEmbedded(u, emb.x, v, upstream, grad, dx);
  BackwardEmbed(u, emb, dx, grad);
}

void RecModel::ApplySgd(const GradAccumulator& grad, double learning_rate, double l2) {
  for (const auto& [u, g] : grad.user_rows()) {
    auto row = user_embeddings.row(u);
    row -= learning_rate * (g.transpose() + l2 * row);
  }
  for (const auto& [v, g] : grad.item_rows()) {
    auto row = item_embeddings.row(v);
    row -= learning_rate * (g.transpose() + l2 * row);
  }
  if (type_ == ModelType::kMf) {
    for (const auto& [u, g] : grad.user_bias()) {
      user_bias[u] -= learning_rate * (g + l2 * user_bias[u]);
    }
  }
  for (const auto& [v, g] : grad.item_bias()) {
    item_bias[v] -= learning_rate * (g + l2 * item_bias[v]);
  }
  global_bias -= learning_rate * grad.global_bias();
}

double RecModel::TouchedSquaredNorm(const GradAccumulator& grad) const {
  double s = 0.0;
  for (const auto& [u, g] : grad.user_rows()) s += user_embeddings.row(u).squaredNorm();
  for (const auto& [v, g] : grad.item_rows()) s += item_embeddings.row(v).squaredNorm();
  if (type_ == ModelType::kMf) {
    for (const auto& [u, g] : grad.user_bias()) s += user_bias[u] * user_bias[u];
  }
  for (const auto& [v, g] : grad.item_bias()) s += item_bias[v] * item_bias[v];
  return s;
}

bool RecModel::AllFinite() const {
  return user_embeddings.allFinite() && item_embeddings.allFinite() &&
         user_bias.allFinite() && item_bias.allFinite() && std::isfinite(global_bias);
}

double PredictProb(const RecModel& model, UserId u, std::span<const ItemId> history,
                   ItemId v) {
  return Logistic(model.Score(u, history, v));
}

int RankOf(ItemId target, std::span<const ItemId> items,
           std::span<const double> scores) {
  const auto it = std::find(items.begin(), items.end(), target);
  if (it == items.end()) throw InvalidInput("target not among the candidates");
  const double s = scores[static_cast<std::size_t>(it - items.begin())];
  int rank = 1;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (scores[i] > s || (scores[i] == s && items[i] < target)) ++rank;
  }
  return rank;
}

std::vector<ItemId> TopK(const RecModel& model, UserId u,
                         std::span<const ItemId> history,
                         std::span<const ItemId> candidates, int k) {
  if (k < 0 || static_cast<std::size_t>(k) > candidates.size()) {
    throw InvalidInput("top-k with k=" + std::to_string(k) + " over " +
                       std::to_string(candidates.size()) + " candidates");
  }
  std::vector<double> scores(candidates.size());
  model.ScoreCandidates(u, history, candidates, scores);
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return candidates[a] < candidates[b];
                    });
  std::vector<ItemId> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.push_back(candidates[order[i]]);
  return out;
}

// --- checkpoints ---------------------------------------------------------------

namespace {

void AppendDouble(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  out.append(buf, n);
}

void AppendVector(std::string& out, const double* data, Eigen::Index n) {
  out.push_back('[');
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i > 0) out.push_back(',');
    AppendDouble(out, data[i]);
  }
  out.push_back(']');
}

void AppendMatrix(std::string& out, const Matrix& m) {
  out.push_back('[');
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (r > 0) out.append(",\n  ");
    AppendVector(out, m.data() + r * m.cols(), m.cols());
  }
  out.push_back(']');
}

Matrix ReadMatrix(const nlohmann::json& j, int rows, int cols, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw InvalidInput(std::string("checkpoint ") + name + ": expected " +
                       std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != cols) {
      throw InvalidInput(std::string("checkpoint ") + name + ": row " +
                         std::to_string(r) + " must have " + std::to_string(cols) +
                         " values");
    }
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Vector ReadVector(const nlohmann::json& j, int n, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw InvalidInput(std::string("checkpoint ") + name + ": expected " +
                       std::to_string(n) + " values");
  }
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

std::string SerializeCheckpoint(const RecModel& model) {
  std::string out;
  out.reserve(static_cast<std::size_t>(
      (model.user_embeddings.size() + model.item_embeddings.size()) * 24 + 256));
  out.append("{\"format_version\":1,\"model_type\":\"");
  out.append(ModelTypeName(model.type()));
  out.append("\",\"d\":" + std::to_string(model.dim()));
  out.append(",\"num_users\":" + std::to_string(model.num_users()));
  out.append(",\"num_items\":" + std::to_string(model.num_items()));
  out.append(",\n\"user_embeddings\":");
  AppendMatrix(out, model.user_embeddings);
  out.append(",\n\"item_embeddings\":");
  AppendMatrix(out, model.item_embeddings);
  if (model.type() == ModelType::kMf) {
    out.append(",\n\"user_bias\":");
    AppendVector(out, model.user_bias.data(), model.user_bias.size());
  }
  out.append(",\n\"item_bias\":");
  AppendVector(out, model.item_bias.data(), model.item_bias.size());
  out.append(",\n\"global_bias\":");
  AppendDouble(out, model.global_bias);
  out.append("}\n");
  return out;
}

RecModel ParseCheckpoint(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format_version").get<int>() != 1) {
      throw InvalidInput("unsupported checkpoint format_version");
    }
    const ModelType type = ParseModelType(j.at("model_type").get<std::string>());
    const int d = j.at("d").get<int>();
    const int users = j.at("num_users").get<int>();
    const int items = j.at("num_items").get<int>();
    RecModel m = RecModel::Create(type, users, items, d, 0, 0.0);
    m.user_embeddings = ReadMatrix(j.at("user_embeddings"), users, d, "user_embeddings");
    m.item_embeddings = ReadMatrix(j.at("item_embeddings"), items, d, "item_embeddings");
    if (type == ModelType::kMf) {
      m.user_bias = ReadVector(j.at("user_bias"), users, "user_bias");
    } else if (j.contains("user_bias")) {
      throw InvalidInput("attnseq checkpoints carry no user_bias");
    }
    m.item_bias = ReadVector(j.at("item_bias"), items, "item_bias");
    m.global_bias = j.at("global_bias").get<double>();
    if (!m.AllFinite()) throw InvalidInput("checkpoint contains non-finite values");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed checkpoint: ") + e.what());
  }
}

void SaveCheckpoint(const RecModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << SerializeCheckpoint(model);
  if (!out) throw RuntimeFailure("write failed for " + path.string());
}

RecModel LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseCheckpoint(ss.str());
}

}  // namespace ccf
