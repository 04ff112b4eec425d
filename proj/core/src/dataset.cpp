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

#include "ccf/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ccf/error.hpp"
#include "ccf/random.hpp"

namespace ccf {
namespace {

bool ParseInt64(std::string_view field, std::int64_t* out) {
  // Accept "881250949" as well as "3.0"-style floats with a zero fraction.
  const char* begin = field.data();
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  if (ec != std::errc()) return false;
  if (ptr == end) return true;
  if (*ptr != '.') return false;
  for (++ptr; ptr != end; ++ptr) {
    if (*ptr != '0') return false;
  }
  return true;
}

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos
                                            ? std::string_view::npos
                                            : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

struct RawRow {
  std::int64_t user = 0;
  std::int64_t item = 0;
  std::int64_t rating = 0;
  std::int64_t timestamp = 0;
};

std::vector<RawRow> ParseRawRows(std::istream& in, const std::string& source) {
  std::vector<RawRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = SplitFields(line);
    RawRow row;
    if (!ParseInt64(fields[0], &row.user)) {
      if (line_no == 1) continue;  // header
      throw InvalidInput(source + ":" + std::to_string(line_no) +
                         ": non-numeric user id");
    }
    if (fields.size() < 3 || fields.size() > 4) {
      throw InvalidInput(source + ":" + std::to_string(line_no) +
                         ": expected 3 or 4 tab-separated columns, got " +
                         std::to_string(fields.size()));
    }
    if (!ParseInt64(fields[1], &row.item) || !ParseInt64(fields[2], &row.rating) ||
        (fields.size() == 4 && !ParseInt64(fields[3], &row.timestamp))) {
      throw InvalidInput(source + ":" + std::to_string(line_no) +
                         ": malformed numeric field");
    }
    rows.push_back(row);
  }
  return rows;
}

int LabelFor(std::int64_t rating, bool binary, const std::string& source) {
  if (binary) {
    if (rating != 0 && rating != 1) {
      throw InvalidInput(source + ": rating " + std::to_string(rating) +
                         " in a 0/1 labelled log");
    }
    return static_cast<int>(rating);
  }
  if (rating < 1 || rating > 5) {
    throw InvalidInput(source + ": rating " + std::to_string(rating) +
                       " outside 1..5");
  }
  return Binarize(static_cast<int>(rating));
}

}  // namespace

const char* PartitionName(Partition p) {
  switch (p) {
    case Partition::kTrain:
      return "train";
    case Partition::kValidation:
      return "validation";
    case Partition::kTest:
      return "test";
  }
  return "?";
}

Partition ParsePartition(const std::string& name) {
  if (name == "train") return Partition::kTrain;
  if (name == "validation" || name == "valid") return Partition::kValidation;
  if (name == "test") return Partition::kTest;
  throw InvalidInput("unknown partition '" + name +
                     "' (expected train, validation or test)");
}

int Binarize(int rating) {
  if (rating < 1 || rating > 5) {
    throw InvalidInput("rating " + std::to_string(rating) + " outside 1..5");
  }
  return rating >= kPositiveRatingThreshold ? 1 : 0;
}

std::vector<Interaction> ParseTsv(std::istream& in, const std::string& source_name) {
  std::vector<Interaction> out;
  for (const RawRow& r : ParseRawRows(in, source_name)) {
    Interaction x;
    x.user = static_cast<UserId>(r.user);
    x.item = static_cast<ItemId>(r.item);
    x.rating = static_cast<int>(r.rating);
    x.timestamp = r.timestamp;
    out.push_back(x);
  }
  return out;
}

std::vector<RatingLog> ReadRawLogs(const std::vector<std::filesystem::path>& paths) {
  std::vector<std::vector<RawRow>> per_file;
  bool binary = false;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());
    per_file.push_back(ParseRawRows(in, path.string()));
    for (const RawRow& r : per_file.back()) binary = binary || r.rating == 0;
  }
  std::map<std::int64_t, UserId> users;
  std::map<std::int64_t, ItemId> items;
  for (const auto& rows : per_file) {
    for (const RawRow& r : rows) {
      users.emplace(r.user, 0);
      items.emplace(r.item, 0);
    }
  }
  UserId next_user = 0;
  for (auto& [raw, id] : users) id = next_user++;
  ItemId next_item = 0;
  for (auto& [raw, id] : items) id = next_item++;

  std::vector<RatingLog> logs;
  for (std::size_t f = 0; f < per_file.size(); ++f) {
    RatingLog log;
    log.num_users = static_cast<int>(users.size());
    log.num_items = static_cast<int>(items.size());
    log.binary = binary;
    log.interactions.reserve(per_file[f].size());
    for (const RawRow& r : per_file[f]) {
      Interaction x;
      x.user = users.at(r.user);
      x.item = items.at(r.item);
      x.rating = static_cast<int>(r.rating);
      x.timestamp = r.timestamp;
      x.label = LabelFor(r.rating, binary, paths[f].string());
      log.interactions.push_back(x);
    }
    logs.push_back(std::move(log));
  }
  return logs;
}

SplitDataset::SplitDataset(int num_users, int num_items,
                           std::vector<Interaction> train,
                           std::vector<Interaction> validation,
                           std::vector<Interaction> test, int max_history,
                           bool binary)
    : num_users_(num_users),
      num_items_(num_items),
      max_history_(max_history),
      binary_(binary),
      train_(std::move(train)),
      validation_(std::move(validation)),
      test_(std::move(test)) {
  if (num_users < 1 || num_items < 1) {
    throw InvalidInput("dataset needs at least one user and one item");
  }
  if (max_history < 1) throw InvalidInput("max_history must be >= 1");
  CheckIds(train_, "train");
  CheckIds(validation_, "validation");
  CheckIds(test_, "test");
  Index();
}

void SplitDataset::CheckIds(const std::vector<Interaction>& part,
                            const char* name) const {
  for (const Interaction& x : part) {
    if (x.user < 0 || x.user >= num_users_ || x.item < 0 || x.item >= num_items_) {
      throw InvalidInput(std::string(name) + ": interaction (" +
                         std::to_string(x.user) + ", " + std::to_string(x.item) +
                         ") outside the catalog");
    }
  }
}

void SplitDataset::Index() {
  struct Keyed {
    std::int64_t timestamp;
    int partition;
    std::size_t order;
    Event event;
    UserId user;
  };
  std::vector<Keyed> all;
  all.reserve(train_.size() + validation_.size() + test_.size());
  const std::vector<Interaction>* parts[] = {&train_, &validation_, &test_};
  for (int p = 0; p < 3; ++p) {
    for (std::size_t i = 0; i < parts[p]->size(); ++i) {
      const Interaction& x = (*parts[p])[i];
      all.push_back({x.timestamp, p, i,
                     Event{x.item, x.timestamp, x.label, static_cast<Partition>(p)},
                     x.user});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Keyed& a, const Keyed& b) {
    if (a.user != b.user) return a.user < b.user;
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    if (a.partition != b.partition) return a.partition < b.partition;
    return a.order < b.order;
  });
  timeline_offsets_.assign(num_users_ + 1, 0);
  timeline_events_.clear();
  timeline_events_.reserve(all.size());
  for (const Keyed& k : all) {
    ++timeline_offsets_[k.user + 1];
    timeline_events_.push_back(k.event);
  }
  std::partial_sum(timeline_offsets_.begin(), timeline_offsets_.end(),
                   timeline_offsets_.begin());

  positive_offsets_.assign(num_users_ + 1, 0);
  positive_items_.clear();
  popularity_.assign(num_items_, 0);
  examples_.clear();
  for (UserId u = 0; u < num_users_; ++u) {
    const auto events = timeline(u);
    std::vector<ItemId> pos;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const Event& e = events[i];
      if (e.partition != Partition::kTrain) continue;
      ++popularity_[e.item];
      if (e.label == 1) {
        pos.push_back(e.item);
        examples_.push_back({u, e.item, static_cast<std::int32_t>(i)});
      }
    }
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    positive_items_.insert(positive_items_.end(), pos.begin(), pos.end());
    positive_offsets_[u + 1] = positive_items_.size();
  }
}

const std::vector<Interaction>& SplitDataset::partition(Partition p) const {
  switch (p) {
    case Partition::kTrain:
      return train_;
    case Partition::kValidation:
      return validation_;
    case Partition::kTest:
      return test_;
  }
  return train_;
}

std::span<const SplitDataset::Event> SplitDataset::timeline(UserId user) const {
  return std::span<const Event>(timeline_events_)
      .subspan(timeline_offsets_[user],
               timeline_offsets_[user + 1] - timeline_offsets_[user]);
}

History SplitDataset::HistoryOf(UserId user, std::size_t before_index) const {
  if (user < 0 || user >= num_users_) {
    throw InvalidInput("unknown user " + std::to_string(user));
  }
  const auto events = timeline(user);
  const std::size_t end = std::min(before_index, events.size());
  const std::size_t begin =
      end > static_cast<std::size_t>(max_history_) ? end - max_history_ : 0;
  History h;
  h.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) h.push_back(events[i].item);
  return h;
}

std::span<const ItemId> SplitDataset::train_positives(UserId user) const {
  return std::span<const ItemId>(positive_items_)
      .subspan(positive_offsets_[user],
               positive_offsets_[user + 1] - positive_offsets_[user]);
}

bool SplitDataset::IsTrainPositive(UserId user, ItemId item) const {
  const auto pos = train_positives(user);
  return std::binary_search(pos.begin(), pos.end(), item);
}

std::vector<ItemId> SplitDataset::SampleNegatives(UserId user, ItemId target,
                                                  int count,
                                                  std::uint64_t seed) const {
  if (user < 0 || user >= num_users_) {
    throw InvalidInput("unknown user " + std::to_string(user));
  }
  if (count < 0) throw InvalidInput("negative sample count must be >= 0");
  const bool target_excluded_separately =
      target >= 0 && target < num_items_ && !IsTrainPositive(user, target);
  const int eligible = num_items_ - static_cast<int>(train_positives(user).size()) -
                       (target_excluded_separately ? 1 : 0);
  if (count > eligible) {
    throw InvalidInput("user " + std::to_string(user) + " needs " +
                       std::to_string(count) + " negatives but only " +
                       std::to_string(eligible) + " items are eligible (short by " +
                       std::to_string(count - eligible) + ")");
  }
  Rng rng(seed);
  std::vector<ItemId> out;
  out.reserve(count);
  auto is_excluded = [&](ItemId v) { return v == target || IsTrainPositive(user, v); };
  if (4 * static_cast<std::int64_t>(count) >= eligible) {
    std::vector<ItemId> pool;
    pool.reserve(eligible);
    for (ItemId v = 0; v < num_items_; ++v) {
      if (!is_excluded(v)) pool.push_back(v);
    }
    for (int i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out.push_back(pool[i]);
    }
    return out;
  }
  std::uniform_int_distribution<ItemId> pick(0, num_items_ - 1);
  while (static_cast<int>(out.size()) < count) {
    const ItemId v = pick(rng);
    if (is_excluded(v) || std::find(out.begin(), out.end(), v) != out.end()) continue;
    out.push_back(v);
  }
  return out;
}

std::vector<std::int32_t> SplitDataset::HeldOutPositives(UserId user,
                                                         Partition p) const {
  std::vector<std::int32_t> out;
  const auto events = timeline(user);
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].partition == p && events[i].label == 1) {
      out.push_back(static_cast<std::int32_t>(i));
    }
  }
  return out;
}

SplitDataset LeaveOneOutSplit(const RatingLog& log, int max_history) {
  if (log.interactions.empty()) throw InvalidInput("empty interaction log");
  std::vector<std::vector<std::size_t>> by_user(log.num_users);
  for (std::size_t i = 0; i < log.interactions.size(); ++i) {
    by_user[log.interactions[i].user].push_back(i);
  }
  std::vector<int> assignment(log.interactions.size(), 0);  // 0 train, 1 valid, 2 test
  for (auto& rows : by_user) {
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      return log.interactions[a].timestamp < log.interactions[b].timestamp;
    });
    std::vector<std::size_t> positives;
    for (std::size_t r : rows) {
      if (log.interactions[r].label == 1) positives.push_back(r);
    }
    if (positives.size() < 3) continue;
    assignment[positives[positives.size() - 1]] = 2;
    assignment[positives[positives.size() - 2]] = 1;
  }
  std::vector<Interaction> parts[3];
  for (std::size_t i = 0; i < log.interactions.size(); ++i) {
    parts[assignment[i]].push_back(log.interactions[i]);
  }
  return SplitDataset(log.num_users, log.num_items, std::move(parts[0]),
                      std::move(parts[1]), std::move(parts[2]), max_history,
                      log.binary);
}

RandomizedSplit RandomizedTrialSplit(const RatingLog& train_log,
                                     const RatingLog& test_log,
                                     std::uint64_t seed, int max_history) {
  if (train_log.num_users != test_log.num_users ||
      train_log.num_items != test_log.num_items) {
    throw InvalidInput("train and test logs must share one id space");
  }
  std::vector<std::vector<std::size_t>> positives(train_log.num_users);
  for (std::size_t i = 0; i < train_log.interactions.size(); ++i) {
    const Interaction& x = train_log.interactions[i];
    if (x.label == 1) positives[x.user].push_back(i);
  }
  std::vector<char> held_out(train_log.interactions.size(), 0);
  RandomizedSplit out;
  for (UserId u = 0; u < train_log.num_users; ++u) {
    if (positives[u].empty()) {
      ++out.skipped_users;
      continue;
    }
    Rng rng = MakeRng(seed, {stream::kSplit, static_cast<std::uint64_t>(u)});
    std::uniform_int_distribution<std::size_t> pick(0, positives[u].size() - 1);
    held_out[positives[u][pick(rng)]] = 1;
  }
  std::vector<Interaction> train, validation;
  for (std::size_t i = 0; i < train_log.interactions.size(); ++i) {
    (held_out[i] ? validation : train).push_back(train_log.interactions[i]);
  }
  out.dataset = SplitDataset(train_log.num_users, train_log.num_items,
                             std::move(train), std::move(validation),
                             test_log.interactions, max_history,
                             train_log.binary || test_log.binary);
  return out;
}

void WriteTsv(const std::filesystem::path& path, const std::vector<Interaction>& rows,
              bool binary) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  for (const Interaction& x : rows) {
    out << x.user << '\t' << x.item << '\t' << (binary ? x.label : x.rating) << '\t'
        << x.timestamp << '\n';
  }
  if (!out) throw RuntimeFailure("write failed for " + path.string());
}

void WriteSplit(const std::filesystem::path& dir, const SplitDataset& data,
                std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  WriteTsv(dir / "train.tsv", data.train(), data.binary());
  WriteTsv(dir / "valid.tsv", data.validation(), data.binary());
  WriteTsv(dir / "test.tsv", data.test(), data.binary());
  nlohmann::ordered_json meta;
  meta["num_users"] = data.num_users();
  meta["num_items"] = data.num_items();
  meta["max_history"] = data.max_history();
  meta["seed"] = seed;
  std::ofstream out(dir / "meta.json");
  out << meta.dump(2) << '\n';
  if (!out) throw RuntimeFailure("cannot write " + (dir / "meta.json").string());
}

SplitDataset ReadSplit(const std::filesystem::path& dir, SplitMeta* meta_out) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw InvalidInput("missing " + (dir / "meta.json").string());
  SplitMeta meta;
  try {
    const auto j = nlohmann::json::parse(meta_in);
    meta.num_users = j.at("num_users").get<int>();
    meta.num_items = j.at("num_items").get<int>();
    meta.max_history = j.at("max_history").get<int>();
    meta.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("bad meta.json: " + std::string(e.what()));
  }
  std::vector<Interaction> parts[3];
  const char* names[] = {"train.tsv", "valid.tsv", "test.tsv"};
  bool binary = false;
  for (int p = 0; p < 3; ++p) {
    std::ifstream in(dir / names[p]);
    if (!in) throw InvalidInput("missing " + (dir / names[p]).string());
    parts[p] = ParseTsv(in, (dir / names[p]).string());
    for (const Interaction& x : parts[p]) binary = binary || x.rating == 0;
  }
  for (int p = 0; p < 3; ++p) {
    for (Interaction& x : parts[p]) x.label = LabelFor(x.rating, binary, names[p]);
  }
  if (meta_out != nullptr) *meta_out = meta;
  return SplitDataset(meta.num_users, meta.num_items, std::move(parts[0]),
                      std::move(parts[1]), std::move(parts[2]), meta.max_history,
                      binary);
}

}  // namespace ccf
