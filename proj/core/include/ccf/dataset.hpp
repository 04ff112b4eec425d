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

// Rating-log ingestion, binarization, leave-one-out and randomized-trial
// splits, per-user chronological histories and deterministic negative
// sampling.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ccf {

using UserId = std::int32_t;
using ItemId = std::int32_t;

// Chronologically ordered item ids; may contain negative-feedback items.
using History = std::vector<ItemId>;

inline constexpr int kDefaultMaxHistory = 10;
inline constexpr int kPositiveRatingThreshold = 4;

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  int rating = 0;
  std::int64_t timestamp = 0;
  int label = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

enum class Partition { kTrain, kValidation, kTest };

const char* PartitionName(Partition p);
// Accepts "train", "validation"/"valid", "test".
Partition ParsePartition(const std::string& name);

// 1 iff rating >= 4. Throws InvalidInput outside 1..5.
int Binarize(int rating);

// A parsed log with dense ids. `binary` is true when ratings were already 0/1
// labels rather than 1..5 stars.
struct RatingLog {
  std::vector<Interaction> interactions;
  int num_users = 0;
  int num_items = 0;
  bool binary = false;
};

// Reads one or more TSV logs (`user<TAB>item<TAB>rating<TAB>timestamp`, optional
// header line whose first field is non-numeric) into a shared dense id space:
// raw ids are mapped to 0-based indices in ascending numeric order over the
// union of all files. A log containing any rating 0 is read as pre-binarized
// (ratings must then be 0/1); otherwise ratings must be 1..5 and are binarized.
std::vector<RatingLog> ReadRawLogs(const std::vector<std::filesystem::path>& paths);

// Parses a single stream with ids taken verbatim as indices.
std::vector<Interaction> ParseTsv(std::istream& in, const std::string& source_name);

class SplitDataset {
 public:
  struct Event {
    ItemId item = 0;
    std::int64_t timestamp = 0;
    int label = 0;
    Partition partition = Partition::kTrain;
  };

  // One positive training interaction, addressed by its position in the
  // user's timeline.
  struct TrainExample {
    UserId user = 0;
    ItemId item = 0;
    std::int32_t position = 0;
  };

  SplitDataset() = default;
  SplitDataset(int num_users, int num_items, std::vector<Interaction> train,
               std::vector<Interaction> validation, std::vector<Interaction> test,
               int max_history = kDefaultMaxHistory, bool binary = false);

  int num_users() const { return num_users_; }
  int num_items() const { return num_items_; }
  int max_history() const { return max_history_; }
  bool binary() const { return binary_; }

  const std::vector<Interaction>& train() const { return train_; }
  const std::vector<Interaction>& validation() const { return validation_; }
  const std::vector<Interaction>& test() const { return test_; }
  const std::vector<Interaction>& partition(Partition p) const;

  // All of a user's interactions across partitions, sorted by timestamp with
  // ties kept in train, validation, test, then input order.
  std::span<const Event> timeline(UserId user) const;

  // Items of the most recent `max_history` timeline events strictly before
  // `before_index`, oldest first.
  History HistoryOf(UserId user, std::size_t before_index) const;

  // Sorted, de-duplicated positive train items of a user.
  std::span<const ItemId> train_positives(UserId user) const;
  bool IsTrainPositive(UserId user, ItemId item) const;

  // Train interaction count per item (all labels).
  std::span<const int> item_popularity() const { return popularity_; }

  const std::vector<TrainExample>& train_examples() const { return examples_; }

  // `count` distinct items that are neither train-positive for the user nor the
  // target, as a pure function of the arguments. Negative-feedback and
  // never-seen items are both eligible.
  std::vector<ItemId> SampleNegatives(UserId user, ItemId target, int count,
                                      std::uint64_t seed) const;

  // Positions (timeline indices) of the positive events of `user` in a
  // held-out partition.
  std::vector<std::int32_t> HeldOutPositives(UserId user, Partition p) const;

 private:
  void Index();
  void CheckIds(const std::vector<Interaction>& part, const char* name) const;

  int num_users_ = 0;
  int num_items_ = 0;
  int max_history_ = kDefaultMaxHistory;
  bool binary_ = false;
  std::vector<Interaction> train_, validation_, test_;
  std::vector<std::size_t> timeline_offsets_;
  std::vector<Event> timeline_events_;
  std::vector<std::size_t> positive_offsets_;
  std::vector<ItemId> positive_items_;
  std::vector<int> popularity_;
  std::vector<TrainExample> examples_;
};

// Per user with at least three positives: latest positive -> test,
// second-latest -> validation, the rest -> train. Other users keep everything
// in train and are not evaluated. Throws InvalidInput on an empty log.
SplitDataset LeaveOneOutSplit(const RatingLog& log,
                              int max_history = kDefaultMaxHistory);

struct RandomizedSplit {
  SplitDataset dataset;
  // Users without any train positive; they get no validation interaction.
  int skipped_users = 0;
};

// Validation = one seeded uniformly chosen positive per user taken out of the
// train log; test = `test_log` verbatim.
RandomizedSplit RandomizedTrialSplit(const RatingLog& train_log,
                                     const RatingLog& test_log,
                                     std::uint64_t seed,
                                     int max_history = kDefaultMaxHistory);

// Split artifacts: train.tsv, valid.tsv, test.tsv and meta.json.
struct SplitMeta {
  int num_users = 0;
  int num_items = 0;
  int max_history = kDefaultMaxHistory;
  std::uint64_t seed = 0;
};

void WriteSplit(const std::filesystem::path& dir, const SplitDataset& data,
                std::uint64_t seed);
void WriteTsv(const std::filesystem::path& path,
              const std::vector<Interaction>& rows, bool binary);
SplitDataset ReadSplit(const std::filesystem::path& dir, SplitMeta* meta = nullptr);

}  // namespace ccf
