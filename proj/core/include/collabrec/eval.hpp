#pragma once

#include "collabrec/data.hpp"
#include "collabrec/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace collabrec::eval {

struct ScoredSet {
  std::vector<UserIdx> users;
  std::vector<ItemIdx> items;
  std::vector<double> scores;
  std::vector<int> labels;

  size_t size() const { return scores.size(); }
  void push(UserIdx u, ItemIdx i, double s, int y) {
    users.push_back(u);
    items.push_back(i);
    scores.push_back(s);
    labels.push_back(y);
  }
};

// Probability a random positive outscores a random negative, ties credited
// 0.5, computed via midranks in O(n log n). Empty optional when the input
// has a single class (undefined, deliberately not 0 or 0.5).
std::optional<double> auc(std::span<const double> scores,
                          std::span<const int> labels);

struct UaucResult {
  std::optional<double> value;
  int n_users_counted = 0;  // users having both a positive and a negative
};

// Unweighted mean of per-user AUCs; single-class users are skipped.
UaucResult uauc(const ScoredSet& set);

struct StratumReport {
  std::optional<double> auc;
  std::optional<double> uauc;
  int n_samples = 0;
  int n_users_counted = 0;
};

struct EvalReport {
  StratumReport overall;
  StratumReport warm_item, cold_item, warm_user, cold_user;
  std::string model_id, split;
  uint64_t seed = 0;
};

StratumReport stratum_report(const ScoredSet& set);

// Warm/cold breakdowns keyed by item status (warm_item/cold_item) and by
// user status (warm_user/cold_user), per the train-count partition.
EvalReport warm_cold_report(const ScoredSet& set, const data::WarmColdTags& tags);

// Stable key-value serialization (keys: auc, uauc, n_users_counted,
// warm.auc, ... cold_user.uauc) plus an aligned table for humans.
std::string to_keyvalue(const EvalReport& r);
std::string to_table(const EvalReport& r);

}  // namespace collabrec::eval
