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

#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ccf/dataset.hpp"
#include "ccf/error.hpp"
#include "ccf/eval.hpp"
#include "ccf/json_fields.hpp"
#include "ccf/model.hpp"
#include "ccf/simulator.hpp"
#include "ccf/training.hpp"

namespace ccf::cli {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

ordered_json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

void EnsureParent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void WriteJsonFile(const fs::path& path, const ordered_json& j) {
  EnsureParent(path);
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw RuntimeFailure("cannot write " + path.string());
}

fs::path Sibling(const std::string& file, const char* name) {
  const fs::path parent = fs::path(file).parent_path();
  return parent.empty() ? fs::path(name) : parent / name;
}

void CheckShape(const RecModel& model, const SplitDataset& data) {
  if (model.num_users() != data.num_users() || model.num_items() != data.num_items()) {
    throw InvalidInput("model has " + std::to_string(model.num_users()) + " users x " +
                       std::to_string(model.num_items()) + " items but the data has " +
                       std::to_string(data.num_users()) + " x " +
                       std::to_string(data.num_items()));
  }
}

struct SimulateArgs {
  std::string config, out;
};
struct SplitArgs {
  std::string input, test, out;
  std::uint64_t seed = 0;
};
struct TrainArgs {
  std::string config, data, out;
};
struct EvalArgs {
  std::string model, data, partition, out;
};
struct SweepArgs {
  std::string config, data, out;
};

ordered_json RunSimulate(const SimulateArgs& a) {
  const SimulateConfig config = SimulateConfigFromJson(ReadJsonFile(a.config));
  const Simulation sim = Simulate(config);
  WriteSimulation(a.out, sim, config);
  ordered_json s;
  s["command"] = "simulate";
  s["out"] = a.out;
  s["artifacts"] = {"observational.tsv", "randomized_test.tsv", "world.json",
                    "train.tsv", "valid.tsv", "test.tsv", "meta.json"};
  s["observational_interactions"] = sim.observational.size();
  s["test_interactions"] = sim.test.interactions.size();
  s["excluded_test_users"] = sim.test.excluded_users.size();
  return s;
}

ordered_json RunSplit(const SplitArgs& a) {
  ordered_json s;
  s["command"] = "split";
  if (a.test.empty()) {
    const auto logs = ReadRawLogs({a.input});
    const SplitDataset data = LeaveOneOutSplit(logs.front());
    WriteSplit(a.out, data, a.seed);
    s["protocol"] = "leave-one-out";
    s["train"] = data.train().size();
    s["validation"] = data.validation().size();
    s["test"] = data.test().size();
  } else {
    const auto logs = ReadRawLogs({a.input, a.test});
    const RandomizedSplit split = RandomizedTrialSplit(logs[0], logs[1], a.seed);
    WriteSplit(a.out, split.dataset, a.seed);
    s["protocol"] = "randomized-trial";
    s["train"] = split.dataset.train().size();
    s["validation"] = split.dataset.validation().size();
    s["test"] = split.dataset.test().size();
    s["skipped_users"] = split.skipped_users;
  }
  s["out"] = a.out;
  s["artifacts"] = {"train.tsv", "valid.tsv", "test.tsv", "meta.json"};
  return s;
}

ordered_json RunTrain(const TrainArgs& a) {
  const TrainConfig config = TrainConfigFromJson(ReadJsonFile(a.config));
  const SplitDataset data = ReadSplit(a.data);
  const TrainedModel trained = Train(data, config);
  EnsureParent(a.out);
  SaveCheckpoint(trained.model, a.out);
  const fs::path trace = Sibling(a.out, "trace.csv");
  WriteTrace(trace.string(), trained.trace);
  ordered_json s;
  s["command"] = "train";
  s["model"] = a.out;
  s["trace"] = trace.string();
  s["epochs"] = trained.trace.size();
  if (!trained.trace.empty()) {
    s["final_rank_loss"] = trained.trace.back().rank_loss;
    s["final_constraint_loss"] = trained.trace.back().constraint_loss;
  }
  s["counterfactuals_generated"] = trained.stats.generated;
  s["counterfactuals_selected"] = trained.stats.selected;
  return s;
}

ordered_json RunEval(const EvalArgs& a) {
  const Partition partition = ParsePartition(a.partition);
  if (partition == Partition::kTrain) {
    throw InvalidInput("--partition must be validation or test");
  }
  SplitMeta meta;
  const SplitDataset data = ReadSplit(a.data, &meta);
  const RecModel model = LoadCheckpoint(a.model);
  CheckShape(model, data);
  const MetricsReport report = Evaluate(model, data, partition, meta.seed);
  const fs::path out = a.out.empty() ? Sibling(a.model, "metrics.json") : fs::path(a.out);
  const ordered_json metrics = MetricsJson(report, a.model, partition, meta.seed);
  WriteJsonFile(out, metrics);
  ordered_json s;
  s["command"] = "eval";
  s["metrics"] = out.string();
  s["ndcg@10"] = report.ndcg_at_10;
  s["hit@1"] = report.hit_at_1;
  s["num_users"] = report.num_users_evaluated;
  return s;
}

// Grid keys a sweep may vary.
const char* const kGridKeys[] = {"omega",  "epsilon",       "epsilon2", "k",
                                 "rule",   "learning_rate", "l2_lambda"};

struct SweepConfig {
  ordered_json base = ordered_json::object();
  std::vector<std::pair<std::string, std::vector<ordered_json>>> grid;
};

SweepConfig SweepConfigFromJson(const ordered_json& j) {
  SweepConfig c;
  OrderedJsonFields f(j, "sweep config");
  f.Optional("base", c.base);
  ordered_json grid;
  f.Required("grid", grid);
  f.RejectUnknown();
  if (!grid.is_object() || grid.empty()) {
    throw InvalidInput("sweep config: grid must be a non-empty object");
  }
  for (const auto& [key, values] : grid.items()) {
    if (std::find(std::begin(kGridKeys), std::end(kGridKeys), key) == std::end(kGridKeys)) {
      throw InvalidInput("sweep config: grid key '" + key +
                         "' is not one of omega, epsilon, epsilon2, k, rule, "
                         "learning_rate, l2_lambda");
    }
    if (!values.is_array() || values.empty()) {
      throw InvalidInput("sweep config: grid '" + key + "' must be a non-empty array");
    }
    c.grid.emplace_back(key, std::vector<ordered_json>(values.begin(), values.end()));
  }
  return c;
}

// Cartesian product, first grid key varying slowest.
std::vector<ordered_json> GridPoints(const SweepConfig& c) {
  std::vector<ordered_json> points{ordered_json::object()};
  for (const auto& [key, values] : c.grid) {
    std::vector<ordered_json> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        ordered_json q = p;
        q[key] = v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

std::string CsvValue(const ordered_json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::string CsvText(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ' ';
  }
  return s;
}

ordered_json RunSweep(const SweepArgs& a) {
  const SweepConfig sweep = SweepConfigFromJson(ReadJsonFile(a.config));
  SplitMeta meta;
  const SplitDataset data = ReadSplit(a.data, &meta);
  const auto points = GridPoints(sweep);

  std::vector<TrainConfig> configs;
  for (const auto& p : points) {
    ordered_json merged = sweep.base;
    for (const auto& [key, value] : p.items()) merged[key] = value;
    configs.push_back(TrainConfigFromJson(merged));
  }

  fs::create_directories(a.out);
  std::ofstream csv(fs::path(a.out) / "sweep.csv");
  if (!csv) throw RuntimeFailure("cannot write sweep.csv in " + a.out);
  csv << "point";
  for (const auto& [key, values] : sweep.grid) csv << ',' << key;
  csv << ",status,ndcg@10,hit@1,error\n";

  // Phase 1 depends only on base settings; reuse it across grid points.
  std::map<std::string, TrainedModel> phase_one;
  CloneCache clones;
  TrainOptions options;
  options.clone_cache = &clones;
  std::optional<std::size_t> best;
  double best_ndcg = -1.0;
  std::optional<TrainedModel> best_model;
  int failed = 0;
  char buf[64];
  for (std::size_t i = 0; i < points.size(); ++i) {
    csv << i;
    for (const auto& [key, values] : sweep.grid) csv << ',' << CsvValue(points[i][key]);
    try {
      const TrainConfig one = PhaseOneConfig(configs[i]);
      const std::string key = TrainConfigToJson(one).dump();
      auto it = phase_one.find(key);
      if (it == phase_one.end()) it = phase_one.emplace(key, Pretrain(data, one)).first;
      TrainedModel trained = ContinueTraining(data, configs[i], it->second, options);
      const MetricsReport val = Evaluate(trained.model, data, Partition::kValidation, meta.seed);
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", val.ndcg_at_10, val.hit_at_1);
      csv << ",ok," << buf << ",\n";
      if (val.ndcg_at_10 > best_ndcg) {
        best_ndcg = val.ndcg_at_10;
        best = i;
        best_model = std::move(trained);
      }
    } catch (const std::exception& e) {
      ++failed;
      csv << ",failed,,," << CsvText(e.what()) << '\n';
    }
    csv.flush();
  }
  if (!best) throw RuntimeFailure("sweep: all " + std::to_string(points.size()) +
                                  " grid points failed");

  const MetricsReport val =
      Evaluate(best_model->model, data, Partition::kValidation, meta.seed);
  const MetricsReport test = Evaluate(best_model->model, data, Partition::kTest, meta.seed);
  const fs::path model_path = fs::path(a.out) / "best_model.json";
  SaveCheckpoint(best_model->model, model_path);
  ordered_json best_json;
  best_json["point"] = *best;
  best_json["params"] = points[*best];
  best_json["config"] = TrainConfigToJson(configs[*best]);
  best_json["validation"] = MetricsJson(val, model_path.string(), Partition::kValidation,
                                        meta.seed);
  best_json["test"] = MetricsJson(test, model_path.string(), Partition::kTest, meta.seed);
  WriteJsonFile(fs::path(a.out) / "best.json", best_json);

  ordered_json s;
  s["command"] = "sweep";
  s["out"] = a.out;
  s["artifacts"] = {"sweep.csv", "best.json", "best_model.json"};
  s["points"] = points.size();
  s["failed"] = failed;
  s["best_point"] = *best;
  s["validation_ndcg@10"] = val.ndcg_at_10;
  s["test_ndcg@10"] = test.ndcg_at_10;
  s["test_hit@1"] = test.hit_at_1;
  return s;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal collaborative filtering: simulate, split, train, eval, sweep", "ccf"};
  app.require_subcommand(1, 1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic world and its logs");
  simulate->add_option("--config", sim.config, "SimulateConfig JSON")->required();
  simulate->add_option("--out", sim.out, "Output directory")->required();

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "Split a rating log for training");
  split->add_option("--input", split_args.input, "Rating log TSV")->required();
  split->add_option("--test", split_args.test, "Randomized-trial test log TSV");
  split->add_option("--out", split_args.out, "Output directory")->required();
  split->add_option("--seed", split_args.seed, "Split seed");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", train_args.config, "TrainConfig JSON")->required();
  train->add_option("--data", train_args.data, "Split directory")->required();
  train->add_option("--out", train_args.out, "Checkpoint path")->required();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--model", eval_args.model, "Checkpoint path")->required();
  eval->add_option("--data", eval_args.data, "Split directory")->required();
  eval->add_option("--partition", eval_args.partition, "validation or test")
      ->required()
      ->check(CLI::IsMember({"validation", "test"}));
  eval->add_option("--out", eval_args.out, "metrics.json path");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Grid search on validation nDCG@10");
  sweep->add_option("--config", sweep_args.config, "SweepConfig JSON")->required();
  sweep->add_option("--data", sweep_args.data, "Split directory")->required();
  sweep->add_option("--out", sweep_args.out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    ordered_json summary;
    if (*simulate) summary = RunSimulate(sim);
    if (*split) summary = RunSplit(split_args);
    if (*train) summary = RunTrain(train_args);
    if (*eval) summary = RunEval(eval_args);
    if (*sweep) summary = RunSweep(sweep_args);
    out << summary.dump() << '\n';
    return kExitOk;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace ccf::cli
