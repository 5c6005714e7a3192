#pragma once

#include "collabrec/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace collabrec::data {

struct Interaction {
  UserIdx user = 0;
  ItemIdx item = 0;
  double rating = 0;
  int label = 0;  // [rating >= threshold]
  Timestamp timestamp = 0;
};

struct Catalog {
  std::vector<std::string> item_titles;  // dense item index -> title
  std::unordered_map<std::string, UserIdx> user_id_map;
  std::unordered_map<std::string, ItemIdx> item_id_map;

  int n_users() const { return static_cast<int>(user_id_map.size()); }
  int n_items() const { return static_cast<int>(item_id_map.size()); }
};

struct SplitDataset {
  std::vector<Interaction> train, valid, test;
  Timestamp t1 = 0, t2 = 0;

  const std::vector<Interaction>& split(const std::string& name) const;
  size_t total() const { return train.size() + valid.size() + test.size(); }
};

struct Sample {
  UserIdx user = 0;
  ItemIdx target_item = 0;
  std::vector<ItemIdx> history;  // <= kMaxHistory liked items, oldest first
  int label = 0;
  Timestamp timestamp = 0;
};

inline constexpr int kMaxHistory = 10;

enum class EntityKind { User, Item };
enum class WarmCold { Warm, Cold };

struct WarmColdTags {
  int k = 1;
  std::vector<WarmCold> users;  // indexed by dense user index
  std::vector<WarmCold> items;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ratings file: raw_user <sep> raw_item <sep> rating <sep> timestamp.
// Labels are binarized at `threshold`; dense indices assigned in first
// appearance order; duplicate (user, item) pairs keep the latest occurrence.
std::pair<Catalog, std::vector<Interaction>> load_ratings(
    const std::string& ratings_path, const std::optional<std::string>& titles_path,
    double threshold, const std::string& sep = "::");

// Titles file: raw_item <sep> title [<sep> ignored...]. Items without a
// title fall back to "item <raw-id>".
void load_titles(const std::string& titles_path, const std::string& sep,
                 Catalog& catalog);

// Partition by timestamp: train < t1 <= valid < t2 <= test, each split
// ordered ascending by timestamp. Emits a warning string for empty splits.
SplitDataset temporal_split(std::vector<Interaction> interactions, Timestamp t1,
                            Timestamp t2, std::string* warning = nullptr);

// Timestamp boundaries at the given fractions (e.g. 0.8/0.9 for 80/10/10).
std::pair<Timestamp, Timestamp> percentile_boundaries(
    const std::vector<Interaction>& interactions, double f1, double f2);

struct SplitSamples {
  std::vector<Sample> train, valid, test;
};

// One Sample per interaction. Histories hold only liked (label 1) items
// strictly earlier in time, truncated to the kMaxHistory most recent,
// ordered oldest first. Training histories come from train interactions
// only; valid/test histories from all earlier interactions.
SplitSamples build_samples(const SplitDataset& split, const Catalog& catalog);

// Cold iff train-split interaction count < k.
WarmColdTags warm_cold_partition(const SplitDataset& split, int n_users,
                                 int n_items, int k = 1);

// Write interactions back out in the ratings-file schema (rating chosen so
// that re-binarization at `threshold` reproduces the label).
void export_ratings(const std::string& path, const std::vector<Interaction>& all,
                    double threshold, const std::string& sep = "::");
void export_titles(const std::string& path, const Catalog& catalog,
                   const std::string& sep = "::");

// Content hash over (user, item, label, timestamp) of every interaction.
uint64_t fingerprint(const std::vector<Interaction>& interactions);

}  // namespace collabrec::data
