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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ccf/error.hpp"
#include "ccf/numeric.hpp"
#include "test_util.hpp"

namespace ccf {
namespace {

using testing::RandomModel;

// Plain-loop reference scorer, independent of the Eigen code path.
double NaiveScore(const RecModel& m, UserId u, const std::vector<ItemId>& history,
                  ItemId v) {
  const int d = m.dim();
  std::vector<double> rep(d, 0.0);
  if (m.type() == ModelType::kMf) {
    for (int c = 0; c < d; ++c) rep[c] = m.user_embeddings(u, c);
  } else if (!history.empty()) {
    const ItemId last = history.back();
    std::vector<double> logits;
    for (ItemId i : history) {
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += m.item_embeddings(i, c) * m.item_embeddings(last, c);
      logits.push_back(dot / std::sqrt(static_cast<double>(d)));
    }
    double z = 0.0;
    for (double l : logits) z += std::exp(l);
    for (std::size_t t = 0; t < history.size(); ++t) {
      for (int c = 0; c < d; ++c) {
        rep[c] += std::exp(logits[t]) / z * m.item_embeddings(history[t], c);
      }
    }
  }
  double s = m.item_bias[v] + m.global_bias;
  for (int c = 0; c < d; ++c) s += rep[c] * m.item_embeddings(v, c);
  if (m.type() == ModelType::kMf) {
    s += m.user_bias[u];
  } else {
    for (int c = 0; c < d; ++c) s += m.user_embeddings(u, c) * m.item_embeddings(v, c);
  }
  return s;
}

// Every scalar parameter, in a fixed order.
std::vector<double*> Parameters(RecModel& m) {
  std::vector<double*> p;
  for (Eigen::Index i = 0; i < m.user_embeddings.size(); ++i) {
    p.push_back(m.user_embeddings.data() + i);
  }
  for (Eigen::Index i = 0; i < m.item_embeddings.size(); ++i) {
    p.push_back(m.item_embeddings.data() + i);
  }
  for (Eigen::Index i = 0; i < m.user_bias.size(); ++i) p.push_back(m.user_bias.data() + i);
  for (Eigen::Index i = 0; i < m.item_bias.size(); ++i) p.push_back(m.item_bias.data() + i);
  p.push_back(&m.global_bias);
  return p;
}

// Dense copy of a sparse gradient in Parameters() order.
std::vector<double> Densify(const RecModel& m, const GradAccumulator& g) {
  const int d = m.dim();
  std::vector<double> out(Parameters(const_cast<RecModel&>(m)).size(), 0.0);
  const std::size_t item_base = static_cast<std::size_t>(m.num_users()) * d;
  const std::size_t ubias_base = item_base + static_cast<std::size_t>(m.num_items()) * d;
  const std::size_t ibias_base = ubias_base + m.user_bias.size();
  for (const auto& [u, row] : g.user_rows()) {
    for (int c = 0; c < d; ++c) out[u * d + c] += row[c];
  }
  for (const auto& [v, row] : g.item_rows()) {
    for (int c = 0; c < d; ++c) out[item_base + v * d + c] += row[c];
  }
  for (const auto& [u, x] : g.user_bias()) out[ubias_base + u] += x;
  for (const auto& [v, x] : g.item_bias()) out[ibias_base + v] += x;
  out.back() += g.global_bias();
  return out;
}

double RelativeError(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

TEST(ModelScore, MfMatchesHandComputedValue) {
  RecModel m = RecModel::Create(ModelType::kMf, 2, 3, 2, 1);
  m.user_embeddings << 1.0, 2.0, -1.0, 0.5;
  m.item_embeddings << 0.5, 0.25, 3.0, -1.0, 0.0, 2.0;
  m.user_bias << 0.1, -0.2;
  m.item_bias << 0.3, 0.0, -0.4;
  m.global_bias = 0.05;
  // u0 . v1 = 3 - 2 = 1, plus 0.1 + 0 + 0.05.
  EXPECT_NEAR(m.Score(0, {}, 1), 1.15, 1e-12);
  // u1 . v2 = 0 + 1 = 1, plus -0.2 - 0.4 + 0.05.
  EXPECT_NEAR(m.Score(1, {}, 2), 0.45, 1e-12);
  EXPECT_NEAR(PredictProb(m, 0, {}, 1), 1.0 / (1.0 + std::exp(-1.15)), 1e-12);
}

TEST(ModelScore, MfIgnoresHistory) {
  const RecModel m = RandomModel(ModelType::kMf, 4, 9, 5, 3);
  const std::vector<ItemId> h{1, 2, 3};
  EXPECT_EQ(m.Score(2, h, 7), m.Score(2, {}, 7));
}

TEST(ModelScore, AttnSeqMatchesNaiveReference) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const RecModel m = RandomModel(ModelType::kAttnSeq, 3, 10, 4, 100 + trial);
    std::uniform_int_distribution<int> len(0, 7), item(0, 9), user(0, 2);
    std::vector<ItemId> h(len(rng));
    for (auto& i : h) i = item(rng);
    const UserId u = user(rng);
    const ItemId v = item(rng);
    EXPECT_NEAR(m.Score(u, h, v), NaiveScore(m, u, h, v), 1e-12);
  }
}

TEST(ModelScore, AttnSeqEmptyHistoryPoolsToZero) {
  const RecModel m = RandomModel(ModelType::kAttnSeq, 2, 5, 3, 9);
  const HistoryEmbedding e = m.Embed(1, {});
  EXPECT_TRUE(e.x.isZero(0.0));
  EXPECT_NEAR(m.Score(1, {}, 4),
              m.user_embeddings.row(1).dot(m.item_embeddings.row(4)) + m.item_bias[4] +
                  m.global_bias,
              1e-12);
}

TEST(ModelScore, AttentionIsADistribution) {
  const RecModel m = RandomModel(ModelType::kAttnSeq, 2, 20, 8, 5, 2.0);
  const std::vector<ItemId> h{3, 1, 4, 1, 5, 9, 2, 6};
  const HistoryEmbedding e = m.Embed(0, h);
  EXPECT_NEAR(e.attention.sum(), 1.0, 1e-12);
  EXPECT_GE(e.attention.minCoeff(), 0.0);
}

TEST(ModelScore, RejectsOutOfRangeIds) {
  const RecModel m = RandomModel(ModelType::kAttnSeq, 2, 5, 3, 9);
  EXPECT_THROW(m.Score(2, {}, 0), InvalidInput);
  EXPECT_THROW(m.Score(0, {}, 5), InvalidInput);
  const std::vector<ItemId> bad{7};
  EXPECT_THROW(m.Score(0, bad, 1), InvalidInput);
}

TEST(ModelCreate, DeterministicPerSeedWithZeroBiases) {
  const RecModel a = RecModel::Create(ModelType::kMf, 5, 7, 4, 42);
  const RecModel b = RecModel::Create(ModelType::kMf, 5, 7, 4, 42);
  const RecModel c = RecModel::Create(ModelType::kMf, 5, 7, 4, 43);
  EXPECT_EQ(SerializeCheckpoint(a), SerializeCheckpoint(b));
  EXPECT_NE(SerializeCheckpoint(a), SerializeCheckpoint(c));
  EXPECT_TRUE(a.item_bias.isZero(0.0));
  EXPECT_TRUE(a.user_bias.isZero(0.0));
  EXPECT_EQ(a.global_bias, 0.0);
  const RecModel s = RecModel::Create(ModelType::kAttnSeq, 5, 7, 4, 42);
  EXPECT_EQ(s.user_bias.size(), 0);
}

TEST(TopK, OrdersByScoreThenAscendingId) {
  RecModel m = RecModel::Create(ModelType::kMf, 1, 6, 1, 0);
  m.user_embeddings << 1.0;
  m.item_embeddings << 0.5, 2.0, 0.5, -1.0, 2.0, 0.0;
  const std::vector<ItemId> candidates{5, 4, 3, 2, 1, 0};
  EXPECT_EQ(TopK(m, 0, {}, candidates, 4), (std::vector<ItemId>{1, 4, 0, 2}));
  EXPECT_THROW(TopK(m, 0, {}, candidates, 7), InvalidInput);
}

TEST(RankOf, TiesGoToLowerIds) {
  const std::vector<ItemId> items{10, 3, 7, 1};
  // Target scores highest.
  EXPECT_EQ(RankOf(7, items, std::vector<double>{0.1, 0.2, 0.9, 0.3}), 1);
  // Ties with one lower-id item (3) and beats the rest.
  EXPECT_EQ(RankOf(7, items, std::vector<double>{0.1, 0.5, 0.5, 0.3}), 2);
  // A tie with a higher id does not count.
  EXPECT_EQ(RankOf(7, items, std::vector<double>{0.5, 0.1, 0.5, 0.3}), 1);
  // Lowest of four.
  EXPECT_EQ(RankOf(7, items, std::vector<double>{0.4, 0.5, 0.0, 0.3}), 4);
}

class GradientCheck : public ::testing::TestWithParam<ModelType> {};

// Central differences at step 1e-5 over every parameter, 100 seeded draws of
// (parameters, user, history, target).
TEST_P(GradientCheck, BackwardMatchesFiniteDifferences) {
  const ModelType type = GetParam();
  constexpr double kStep = 1e-5;
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    RecModel m = RandomModel(type, 4, 9, 5, 7000 + seed);
    std::uniform_int_distribution<int> len(0, 6), item(0, 8), user(0, 3);
    std::vector<ItemId> h(len(rng));
    for (auto& i : h) i = item(rng);
    const UserId u = user(rng);
    const ItemId v = item(rng);
    const double upstream = std::normal_distribution<double>(0.0, 1.0)(rng);

    GradAccumulator g(m.dim());
    m.Backward(u, h, v, upstream, g);
    const std::vector<double> analytic = Densify(m, g);

    std::vector<double> numeric;
    for (double* p : Parameters(m)) {
      const double saved = *p;
      *p = saved + kStep;
      const double up = m.Score(u, h, v);
      *p = saved - kStep;
      const double down = m.Score(u, h, v);
      *p = saved;
      numeric.push_back(upstream * (up - down) / (2 * kStep));
    }
    const double err = RelativeError(analytic, numeric);
    worst = std::max(worst, err);
    EXPECT_LT(err, 1e-4) << "seed " << seed;
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

// d ScoreEmbedded / dx against finite differences on the representation.
TEST_P(GradientCheck, RepresentationGradientMatchesFiniteDifferences) {
  const ModelType type = GetParam();
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(2000 + seed);
    const RecModel m = RandomModel(type, 3, 7, 4, 9000 + seed);
    Vector x(4);
    for (int c = 0; c < 4; ++c) x[c] = std::normal_distribution<double>(0.0, 1.0)(rng);
    const UserId u = seed % 3;
    const ItemId v = seed % 7;
    GradAccumulator g(4);
    Vector dx = Vector::Zero(4);
    m.BackwardEmbedded(u, x, v, 1.0, g, dx);
    std::vector<double> analytic(dx.begin(), dx.end()), numeric;
    for (int c = 0; c < 4; ++c) {
      Vector a = x, b = x;
      a[c] += 1e-5;
      b[c] -= 1e-5;
      numeric.push_back((m.ScoreEmbedded(u, a, v) - m.ScoreEmbedded(u, b, v)) / 2e-5);
    }
    EXPECT_LT(RelativeError(analytic, numeric), 1e-4) << "seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Models, GradientCheck,
                         ::testing::Values(ModelType::kMf, ModelType::kAttnSeq),
                         [](const auto& info) { return std::string(ModelTypeName(info.param)); });

TEST(ApplySgd, UpdatesTouchedRowsWithDecay) {
  RecModel m = RandomModel(ModelType::kMf, 3, 4, 2, 17);
  const RecModel before = m;
  GradAccumulator g(2);
  m.Backward(1, {}, 2, 1.0, g);
  m.ApplySgd(g, 0.1, 0.01);
  // Touched: user 1, item 2, their biases, global bias.
  const Vector q = before.item_embeddings.row(2).transpose();
  const Vector p = before.user_embeddings.row(1).transpose();
  EXPECT_TRUE(m.user_embeddings.row(1).transpose().isApprox(p - 0.1 * (q + 0.01 * p)));
  EXPECT_TRUE(m.item_embeddings.row(2).transpose().isApprox(q - 0.1 * (p + 0.01 * q)));
  EXPECT_NEAR(m.global_bias, before.global_bias - 0.1, 1e-15);
  // Untouched rows are bit-identical.
  EXPECT_EQ(m.user_embeddings.row(0), before.user_embeddings.row(0));
  EXPECT_EQ(m.item_embeddings.row(3), before.item_embeddings.row(3));
  EXPECT_EQ(m.item_bias[0], before.item_bias[0]);
}

TEST(Checkpoint, RoundTripIsExact) {
  for (ModelType type : {ModelType::kMf, ModelType::kAttnSeq}) {
    const RecModel m = RandomModel(type, 3, 5, 4, 21);
    const std::string text = SerializeCheckpoint(m);
    const RecModel back = ParseCheckpoint(text);
    EXPECT_EQ(back.type(), type);
    EXPECT_EQ(back.user_embeddings, m.user_embeddings);
    EXPECT_EQ(back.item_embeddings, m.item_embeddings);
    EXPECT_EQ(back.item_bias, m.item_bias);
    EXPECT_EQ(back.global_bias, m.global_bias);
    EXPECT_EQ(SerializeCheckpoint(back), text);
  }
}

TEST(Checkpoint, RejectsMalformedInput) {
  EXPECT_THROW(ParseCheckpoint("{"), InvalidInput);
  EXPECT_THROW(ParseCheckpoint(R"({"format_version": 9})"), InvalidInput);
}

TEST(Logistic, ClampsExtremeArguments) {
  EXPECT_EQ(Logistic(1e6), Logistic(kLogitClamp));
  EXPECT_EQ(Logistic(-1e6), Logistic(-kLogitClamp));
  EXPECT_GT(Logistic(-1e6), 0.0);
  EXPECT_NEAR(Logistic(2.0), 0.8807970779778823, 1e-15);
  EXPECT_EQ(LogisticGrad(31.0), 0.0);
}

}  // namespace
}  // namespace ccf
