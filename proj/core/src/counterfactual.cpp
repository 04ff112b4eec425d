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

#include "ccf/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "ccf/error.hpp"
#include "ccf/random.hpp"

namespace ccf {

std::string_view RuleName(HeuristicRule rule) {
  switch (rule) {
    case HeuristicRule::kKeepOne:
      return "K1";
    case HeuristicRule::kDeleteOne:
      return "D1";
    case HeuristicRule::kReplaceOneRandom:
      return "R1r";
    case HeuristicRule::kReplaceOneNearest:
      return "R1n";
  }
  return "?";
}

std::optional<HeuristicRule> ParseRule(std::string_view name) {
  for (HeuristicRule r : kAllRules) {
    if (RuleName(r) == name) return r;
  }
  return std::nullopt;
}

std::vector<ItemId> NearestNeighbors(const Matrix& item_embeddings) {
  const Eigen::Index n = item_embeddings.rows();
  Matrix unit = item_embeddings;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = unit.row(i).norm();
    if (norm > 0.0) unit.row(i) /= norm;
  }
  std::vector<ItemId> nn(static_cast<std::size_t>(n), -1);
  constexpr Eigen::Index kBlock = 256;
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - start);
    const Matrix sims = unit.middleRows(start, rows) * unit.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index self = start + r;
      double best = -std::numeric_limits<double>::infinity();
      ItemId best_id = -1;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == self) continue;
        if (sims(r, j) > best) {
          best = sims(r, j);
          best_id = static_cast<ItemId>(j);
        }
      }
      nn[static_cast<std::size_t>(self)] = best_id;
    }
  }
  return nn;
}

CounterfactualGenerator::CounterfactualGenerator(HeuristicRule rule,
                                                 const RecModel& model,
                                                 GenerateOptions options)
    : rule_(rule), num_items_(model.num_items()), options_(options) {
  if (options_.limit < 1) throw InvalidInput("generation limit must be >= 1");
  if (options_.replacements_per_position < 1) {
    throw InvalidInput("replacements_per_position must be >= 1");
  }
  if (rule_ == HeuristicRule::kReplaceOneNearest) {
    neighbors_ = NearestNeighbors(model.item_embeddings);
  }
}

std::vector<History> CounterfactualGenerator::Generate(std::span<const ItemId> history,
                                                       std::uint64_t seed) const {
  std::vector<History> out;
  const std::size_t len = history.size();
  if (len == 0) return out;
  Rng rng(seed);
  switch (rule_) {
    case HeuristicRule::kKeepOne:
      for (ItemId v : history) out.push_back({v});
      break;
    case HeuristicRule::kDeleteOne:
      if (len < 2) break;
      for (std::size_t t = 0; t < len; ++t) {
        History h;
        h.reserve(len - 1);
        for (std::size_t s = 0; s < len; ++s) {
          if (s != t) h.push_back(history[s]);
        }
        out.push_back(std::move(h));
      }
      break;
    case HeuristicRule::kReplaceOneRandom: {
      std::vector<ItemId> sorted(history.begin(), history.end());
      std::sort(sorted.begin(), sorted.end());
      sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
      if (static_cast<int>(sorted.size()) >= num_items_) break;
      std::uniform_int_distribution<ItemId> pick(0, num_items_ - 1);
      for (std::size_t t = 0; t < len; ++t) {
        for (int r = 0; r < options_.replacements_per_position; ++r) {
          ItemId v;
          do {
            v = pick(rng);
          } while (std::binary_search(sorted.begin(), sorted.end(), v));
          History h(history.begin(), history.end());
          h[t] = v;
          out.push_back(std::move(h));
        }
      }
      break;
    }
    case HeuristicRule::kReplaceOneNearest:
      for (std::size_t t = 0; t < len; ++t) {
        const ItemId v = neighbors_.at(static_cast<std::size_t>(history[t]));
        if (v < 0) continue;
        History h(history.begin(), history.end());
        h[t] = v;
        out.push_back(std::move(h));
      }
      break;
  }
  if (static_cast<int>(out.size()) > options_.limit) {
    std::vector<std::size_t> idx(out.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int i = 0; i < options_.limit; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(options_.limit);
    std::sort(idx.begin(), idx.end());
    std::vector<History> kept;
    kept.reserve(idx.size());
    for (std::size_t i : idx) kept.push_back(std::move(out[i]));
    out = std::move(kept);
  }
  return out;
}

CounterfactualBatch SelectWithCandidates(const RecModel& model, UserId user,
                                         History real_history,
                                         const std::vector<History>& candidates,
                                         ItemId target,
                                         std::span<const ItemId> candidate_items,
                                         int k, int max_selected) {
  if (k < 1 || static_cast<std::size_t>(k) > candidate_items.size()) {
    throw InvalidInput("selection k=" + std::to_string(k) + " outside [1, " +
                       std::to_string(candidate_items.size()) + "]");
  }
  CounterfactualBatch batch;
  batch.user = user;
  batch.real_history = std::move(real_history);
  batch.target = target;
  batch.generated = static_cast<int>(candidates.size());
  std::vector<double> scores(candidate_items.size());
  for (const History& h : candidates) {
    if (batch.n() >= max_selected) break;
    model.ScoreCandidates(user, h, candidate_items, scores);
    if (RankOf(target, candidate_items, scores) <= k) batch.counterfactuals.push_back(h);
  }
  return batch;
}

CounterfactualBatch Select(const RecModel& model, const SplitDataset& data,
                           UserId user, History real_history,
                           const std::vector<History>& candidates, ItemId target,
                           int k, std::uint64_t seed, int max_selected) {
  if (k > kSelectionNegatives + 1) {
    throw InvalidInput("selection k must be <= 101, got " + std::to_string(k));
  }
  std::vector<ItemId> items = data.SampleNegatives(user, target, kSelectionNegatives, seed);
  items.push_back(target);
  return SelectWithCandidates(model, user, std::move(real_history), candidates, target,
                              items, k, max_selected);
}

std::vector<Vector> SampleContinuous(const Vector& x, double epsilon2, int count,
                                     std::uint64_t seed) {
  if (!(epsilon2 >= 0.0)) throw InvalidInput("epsilon2 must be >= 0");
  if (count < 1) throw InvalidInput("continuous sample count must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(count);
  Vector theta(x.size());
  for (int i = 0; i < count; ++i) {
    double norm = 0.0;
    do {
      for (Eigen::Index c = 0; c < theta.size(); ++c) theta[c] = normal(rng);
      norm = theta.norm();
    } while (norm == 0.0 && theta.size() > 0);
    const double gamma = epsilon2 * uniform(rng);
    if (gamma == 0.0 || theta.size() == 0) {
      out.push_back(x);
      continue;
    }
    double radius = std::sqrt(gamma);
    Vector sample = x + (radius / norm) * theta;
    // Rounding can push the realized squared distance a few ulps past gamma.
    while ((sample - x).squaredNorm() > epsilon2) {
      radius *= 1.0 - 1e-12;
      sample = x + (radius / norm) * theta;
    }
    out.push_back(std::move(sample));
  }
  return out;
}

DoDistribution MakeDoDistribution(double alpha, int n) {
  if (n < 0) throw InvalidInput("counterfactual count must be >= 0");
  if (n == 0) return {1.0, 0.0, 0};
  DoDistribution d{alpha, (1.0 - alpha) / n, n};
  ValidateDoDistribution(d);
  return d;
}

void ValidateDoDistribution(const DoDistribution& d) {
  if (d.n < 0) throw InvalidInput("counterfactual count must be >= 0");
  if (d.n == 0) {
    if (d.alpha != 1.0) throw InvalidInput("with no counterfactuals alpha must be 1");
    return;
  }
  if (std::abs(d.alpha + d.n * d.beta - 1.0) > 1e-12) {
    throw InvalidInput("alpha + n * beta must equal 1");
  }
  if (!(d.alpha > d.beta && d.beta > 0.0)) {
    throw InvalidInput("do-distribution requires alpha > beta > 0");
  }
}

double DoExpectation(const DoDistribution& dist, double p_real,
                     std::span<const double> p_cf) {
  ValidateDoDistribution(dist);
  if (static_cast<int>(p_cf.size()) != dist.n) {
    throw InvalidInput("expected " + std::to_string(dist.n) +
                       " counterfactual probabilities, got " +
                       std::to_string(p_cf.size()));
  }
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(p_real)) throw InvalidInput("probability outside [0, 1]");
  double sum = 0.0;
  for (double p : p_cf) {
    if (!in_unit(p)) throw InvalidInput("probability outside [0, 1]");
    sum += p;
  }
  return dist.alpha * p_real + dist.beta * sum;
}

namespace {

std::string JoinHistory(const History& h) {
  std::string s;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (i > 0) s.push_back(',');
    s += std::to_string(h[i]);
  }
  return s;
}

History ParseHistory(const std::string& field) {
  History h;
  if (field.empty()) return h;
  std::stringstream ss(field);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      h.push_back(static_cast<ItemId>(v));
    } catch (const std::exception&) {
      throw InvalidInput("bad history entry '" + tok + "' in counterfactual cache");
    }
  }
  return h;
}

}  // namespace

void WriteCounterfactualCache(std::ostream& out,
                              const std::vector<CounterfactualBatch>& batches) {
  for (const CounterfactualBatch& b : batches) {
    const std::string real = JoinHistory(b.real_history);
    for (const History& cf : b.counterfactuals) {
      out << b.user << '\t' << b.target << '\t' << real << '\t' << JoinHistory(cf)
          << '\n';
    }
  }
}

std::vector<CounterfactualBatch> ReadCounterfactualCache(std::istream& in) {
  std::vector<CounterfactualBatch> batches;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (!line.empty() && line.back() == '\t') fields.emplace_back();
    if (fields.size() != 4) {
      throw InvalidInput("counterfactual cache line " + std::to_string(line_no) +
                         ": expected 4 fields");
    }
    CounterfactualBatch rec;
    try {
      rec.user = static_cast<UserId>(std::stol(fields[0]));
      rec.target = static_cast<ItemId>(std::stol(fields[1]));
    } catch (const std::exception&) {
      throw InvalidInput("counterfactual cache line " + std::to_string(line_no) +
                         ": bad id");
    }
    rec.real_history = ParseHistory(fields[2]);
    History cf = ParseHistory(fields[3]);
    if (!batches.empty() && batches.back().user == rec.user &&
        batches.back().target == rec.target &&
        batches.back().real_history == rec.real_history) {
      batches.back().counterfactuals.push_back(std::move(cf));
    } else {
      rec.counterfactuals.push_back(std::move(cf));
      batches.push_back(std::move(rec));
    }
  }
  for (auto& b : batches) b.generated = b.n();
  return batches;
}

}  // namespace ccf
