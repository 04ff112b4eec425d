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

#include "ccf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "ccf/error.hpp"
#include "ccf/json_fields.hpp"
#include "ccf/numeric.hpp"
#include "ccf/random.hpp"

namespace ccf {
namespace {

void Require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput("simulate config: " + message);
}

Matrix NormalMatrix(int rows, int cols, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = normal(rng);
  }
  return m;
}

nlohmann::ordered_json MatrixToJson(const Matrix& m) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

Matrix MatrixFromJson(const nlohmann::json& j, int rows, int cols, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw InvalidInput(std::string("world.json: ") + name + " has the wrong row count");
  }
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto row = j[r].get<std::vector<double>>();
    if (static_cast<int>(row.size()) != cols) {
      throw InvalidInput(std::string("world.json: ") + name + " has the wrong width");
    }
    for (int c = 0; c < cols; ++c) m(r, c) = row[c];
  }
  return m;
}

double Uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace

SyntheticWorld GenWorld(int num_users, int num_items, int d_star, double scale,
                        std::uint64_t seed) {
  if (num_users < 1 || num_items < 1 || d_star < 1) {
    throw InvalidInput("world sizes must be >= 1");
  }
  if (!std::isfinite(scale)) throw InvalidInput("world scale must be finite");
  Rng rng = MakeRng(seed, {stream::kWorld});
  const double coord_std = std::pow(static_cast<double>(d_star), -0.25);
  SyntheticWorld w;
  w.user_vectors = NormalMatrix(num_users, d_star, coord_std, rng);
  w.item_vectors = NormalMatrix(num_items, d_star, coord_std, rng);
  w.item_bias = NormalMatrix(num_items, 1, 0.5, rng).col(0);
  w.scale = scale;
  w.seed = seed;
  return w;
}

double OracleDoProbability(const SyntheticWorld& world, UserId user, ItemId item) {
  if (user < 0 || user >= world.num_users() || item < 0 || item >= world.num_items()) {
    throw InvalidInput("oracle ids out of range");
  }
  return Logistic(world.scale * world.Affinity(user, item) + world.item_bias(item));
}

Vector LoggingPolicy::ExposureLogits(const SyntheticWorld& world, UserId user) const {
  return lambda_pop * pop_logits +
         lambda_pref * (world.item_vectors * world.user_vectors.row(user).transpose());
}

LoggingPolicy MakeLoggingPolicy(const SyntheticWorld& world, double lambda_pop,
                                double lambda_pref, double zipf_exponent,
                                std::uint64_t seed) {
  std::vector<ItemId> order(world.num_items());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = MakeRng(seed, {stream::kWorld, 1});
  std::shuffle(order.begin(), order.end(), rng);
  LoggingPolicy p;
  p.lambda_pop = lambda_pop;
  p.lambda_pref = lambda_pref;
  p.pop_logits.resize(world.num_items());
  for (int rank = 0; rank < world.num_items(); ++rank) {
    p.pop_logits(order[rank]) = -zipf_exponent * std::log(rank + 1.0);
  }
  return p;
}

std::vector<Interaction> GenObservational(const SyntheticWorld& world,
                                          const LoggingPolicy& policy,
                                          int interactions_per_user,
                                          std::uint64_t seed) {
  if (interactions_per_user < 1) throw InvalidInput("interactions_per_user must be >= 1");
  if (interactions_per_user > world.num_items()) {
    throw InvalidInput("interactions_per_user exceeds the catalog size");
  }
  std::vector<Interaction> log;
  log.reserve(static_cast<std::size_t>(world.num_users()) * interactions_per_user);
  std::vector<std::pair<double, ItemId>> keys(world.num_items());
  for (UserId u = 0; u < world.num_users(); ++u) {
    Rng rng = MakeRng(seed, {stream::kObservational, static_cast<std::uint64_t>(u)});
    const Vector logits = policy.ExposureLogits(world, u);
    // Gumbel-top-k: descending perturbed logits are a draw without replacement
    // from the softmax, in draw order.
    for (ItemId v = 0; v < world.num_items(); ++v) {
      const double g = -std::log(-std::log(std::max(Uniform01(rng), 1e-300)));
      keys[v] = {logits(v) + g, v};
    }
    std::partial_sort(keys.begin(), keys.begin() + interactions_per_user, keys.end(),
                      [](const auto& a, const auto& b) {
                        return a.first > b.first || (a.first == b.first && a.second < b.second);
                      });
    for (int t = 0; t < interactions_per_user; ++t) {
      const ItemId v = keys[t].second;
      const int y = Uniform01(rng) < OracleDoProbability(world, u, v) ? 1 : 0;
      log.push_back({u, v, y, t, y});
    }
  }
  return log;
}

RandomizedTestLog GenRandomizedTest(const SyntheticWorld& world,
                                    const std::vector<Interaction>& observational,
                                    int per_user, std::uint64_t seed, int retry_cap,
                                    std::int64_t first_timestamp) {
  if (per_user < 1) throw InvalidInput("test per_user must be >= 1");
  if (retry_cap < 1) throw InvalidInput("retry_cap must be >= 1");
  std::vector<std::vector<char>> seen(world.num_users(),
                                      std::vector<char>(world.num_items(), 0));
  for (const auto& x : observational) seen.at(x.user).at(x.item) = 1;

  RandomizedTestLog out;
  std::vector<ItemId> pool;
  for (UserId u = 0; u < world.num_users(); ++u) {
    pool.clear();
    for (ItemId v = 0; v < world.num_items(); ++v) {
      if (!seen[u][v]) pool.push_back(v);
    }
    if (static_cast<int>(pool.size()) < per_user) {
      throw InvalidInput("user " + std::to_string(u) + " has only " +
                         std::to_string(pool.size()) + " unexposed items for " +
                         std::to_string(per_user) + " test draws");
    }
    bool accepted = false;
    for (int attempt = 0; attempt < retry_cap && !accepted; ++attempt) {
      Rng rng = MakeRng(seed, {stream::kRandomized, static_cast<std::uint64_t>(u),
                               static_cast<std::uint64_t>(attempt)});
      std::vector<ItemId> items = pool;
      std::vector<Interaction> rows;
      bool any_positive = false;
      for (int t = 0; t < per_user; ++t) {
        std::uniform_int_distribution<std::size_t> pick(t, items.size() - 1);
        std::swap(items[t], items[pick(rng)]);
        const ItemId v = items[t];
        const int y = Uniform01(rng) < OracleDoProbability(world, u, v) ? 1 : 0;
        any_positive = any_positive || y == 1;
        rows.push_back({u, v, y, first_timestamp + t, y});
      }
      if (any_positive) {
        out.interactions.insert(out.interactions.end(), rows.begin(), rows.end());
        accepted = true;
      }
    }
    if (!accepted) out.excluded_users.push_back(u);
  }
  if (static_cast<int>(out.excluded_users.size()) == world.num_users()) {
    throw RuntimeFailure("randomized test: no user drew a positive within the retry cap");
  }
  return out;
}

ConfoundingWitness MeasureConfounding(const SyntheticWorld& world,
                                      const std::vector<Interaction>& observational) {
  if (observational.empty()) throw InvalidInput("empty observational log");
  std::vector<int> exposure(world.num_items(), 0);
  for (const auto& x : observational) ++exposure.at(x.item);
  std::vector<ItemId> order(world.num_items());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](ItemId a, ItemId b) { return exposure[a] > exposure[b]; });
  const int top = std::max(1, world.num_items() / 10);
  std::vector<char> over(world.num_items(), 0);
  for (int i = 0; i < top; ++i) over[order[i]] = 1;

  double positives = 0.0;
  double count = 0.0;
  for (const auto& x : observational) {
    if (!over[x.item]) continue;
    positives += x.label;
    count += 1.0;
  }
  double total = 0.0;
  for (UserId u = 0; u < world.num_users(); ++u) {
    for (ItemId v = 0; v < world.num_items(); ++v) total += OracleDoProbability(world, u, v);
  }
  ConfoundingWitness w;
  w.over_exposed_positive_rate = positives / count;
  w.catalog_mean_true_probability =
      total / (static_cast<double>(world.num_users()) * world.num_items());
  return w;
}

double TopDecileExposureShare(const LoggingPolicy& policy,
                              const std::vector<Interaction>& log) {
  if (log.empty()) throw InvalidInput("empty log");
  const int n = static_cast<int>(policy.pop_logits.size());
  std::vector<ItemId> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](ItemId a, ItemId b) {
    return policy.pop_logits(a) > policy.pop_logits(b);
  });
  std::vector<char> head(n, 0);
  for (int i = 0; i < std::max(1, n / 10); ++i) head[order[i]] = 1;
  double hits = 0.0;
  for (const auto& x : log) hits += head.at(x.item);
  return hits / static_cast<double>(log.size());
}

nlohmann::ordered_json WorldToJson(const SyntheticWorld& world) {
  nlohmann::ordered_json j;
  j["num_users"] = world.num_users();
  j["num_items"] = world.num_items();
  j["d_star"] = world.d_star();
  j["scale"] = world.scale;
  j["seed"] = world.seed;
  j["user_vectors"] = MatrixToJson(world.user_vectors);
  j["item_vectors"] = MatrixToJson(world.item_vectors);
  j["item_bias"] = std::vector<double>(world.item_bias.begin(), world.item_bias.end());
  return j;
}

SyntheticWorld WorldFromJson(const nlohmann::json& j) {
  SyntheticWorld w;
  try {
    const int users = j.at("num_users").get<int>();
    const int items = j.at("num_items").get<int>();
    const int d = j.at("d_star").get<int>();
    w.scale = j.at("scale").get<double>();
    w.seed = j.at("seed").get<std::uint64_t>();
    w.user_vectors = MatrixFromJson(j.at("user_vectors"), users, d, "user_vectors");
    w.item_vectors = MatrixFromJson(j.at("item_vectors"), items, d, "item_vectors");
    const auto bias = j.at("item_bias").get<std::vector<double>>();
    if (static_cast<int>(bias.size()) != items) {
      throw InvalidInput("world.json: item_bias has the wrong length");
    }
    w.item_bias = Eigen::Map<const Vector>(bias.data(), items);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("world.json: ") + e.what());
  }
  return w;
}

void SimulateConfig::Validate() const {
  Require(num_users >= 1 && num_items >= 1 && d_star >= 1, "sizes must be >= 1");
  Require(std::isfinite(scale), "scale must be finite");
  Require(interactions_per_user >= 1, "interactions_per_user must be >= 1");
  Require(test_per_user >= 1, "test_per_user must be >= 1");
  Require(interactions_per_user + test_per_user <= num_items,
          "interactions_per_user + test_per_user exceeds num_items");
  Require(retry_cap >= 1, "retry_cap must be >= 1");
  Require(max_history >= 1, "max_history must be >= 1");
}

SimulateConfig SimulateConfigFromJson(const nlohmann::json& j) {
  SimulateConfig c;
  JsonFields f(j, "simulate config");
  f.Optional("num_users", c.num_users);
  f.Optional("num_items", c.num_items);
  f.Optional("d_star", c.d_star);
  f.Optional("scale", c.scale);
  f.Optional("lambda_pop", c.lambda_pop);
  f.Optional("lambda_pref", c.lambda_pref);
  f.Optional("zipf_exponent", c.zipf_exponent);
  f.Optional("interactions_per_user", c.interactions_per_user);
  f.Optional("test_per_user", c.test_per_user);
  f.Optional("retry_cap", c.retry_cap);
  f.Optional("max_history", c.max_history);
  f.Optional("seed", c.seed);
  f.RejectUnknown();
  c.Validate();
  return c;
}

nlohmann::ordered_json SimulateConfigToJson(const SimulateConfig& c) {
  nlohmann::ordered_json j;
  j["num_users"] = c.num_users;
  j["num_items"] = c.num_items;
  j["d_star"] = c.d_star;
  j["scale"] = c.scale;
  j["lambda_pop"] = c.lambda_pop;
  j["lambda_pref"] = c.lambda_pref;
  j["zipf_exponent"] = c.zipf_exponent;
  j["interactions_per_user"] = c.interactions_per_user;
  j["test_per_user"] = c.test_per_user;
  j["retry_cap"] = c.retry_cap;
  j["max_history"] = c.max_history;
  j["seed"] = c.seed;
  return j;
}

Simulation Simulate(const SimulateConfig& config) {
  config.Validate();
  Simulation sim;
  sim.world = GenWorld(config.num_users, config.num_items, config.d_star, config.scale,
                       config.seed);
  sim.policy = MakeLoggingPolicy(sim.world, config.lambda_pop, config.lambda_pref,
                                 config.zipf_exponent, config.seed);
  sim.observational = GenObservational(sim.world, sim.policy,
                                       config.interactions_per_user, config.seed);
  sim.test = GenRandomizedTest(sim.world, sim.observational, config.test_per_user,
                               config.seed, config.retry_cap,
                               config.interactions_per_user);
  RatingLog train{sim.observational, config.num_users, config.num_items, true};
  RatingLog test{sim.test.interactions, config.num_users, config.num_items, true};
  sim.split = RandomizedTrialSplit(train, test, config.seed, config.max_history).dataset;
  return sim;
}

void WriteSimulation(const std::filesystem::path& dir, const Simulation& sim,
                     const SimulateConfig& config) {
  std::filesystem::create_directories(dir);
  WriteTsv(dir / "observational.tsv", sim.observational, true);
  WriteTsv(dir / "randomized_test.tsv", sim.test.interactions, true);
  {
    std::ofstream out(dir / "world.json");
    out << WorldToJson(sim.world).dump() << '\n';
    if (!out) throw RuntimeFailure("cannot write " + (dir / "world.json").string());
  }
  WriteSplit(dir, sim.split, config.seed);
}

}  // namespace ccf
