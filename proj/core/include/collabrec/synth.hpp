#pragma once

#include "collabrec/data.hpp"
#include "collabrec/types.hpp"

#include <string>
#include <vector>

namespace collabrec::data {

enum class SignalMode { Collaborative, Textual, Mixed };

SignalMode signal_mode_from_string(const std::string& s);
std::string to_string(SignalMode m);

struct SynthConfig {
  int n_users = 100;
  int n_items = 100;
  int latent_rank = 4;
  SignalMode signal_mode = SignalMode::Collaborative;
  double noise_temperature = 5.0;
  uint64_t seed = 1;
  int n_events = 10000;
  // Fraction of items whose interactions are confined to the test window,
  // so they are unseen at train time.
  double cold_item_fraction = 0.0;
  // Mean of each user-factor coordinate (before the 1/sqrt(r) scale).
  // Zero gives a fully symmetric population; a positive value skews item
  // popularity the way real rating data is skewed, since items aligned
  // with the population mean then attract more positives.
  double user_factor_mean = 0.0;
  // Mixed mode only: logit contribution of a keyword match (+) or
  // mismatch (-), weighing the text channel against the factor channel.
  double text_bonus = 1.0;
};

// Ground truth kept alongside the generated dataset so tests can evaluate
// against the Bayes-optimal scores.
struct SynthResult {
  SynthConfig config;
  Catalog catalog;
  SplitDataset split;
  MatD user_factors;            // n_users x r, entries N(0,1)/sqrt(r)
  MatD item_factors;            // n_items x r
  std::vector<int> item_keyword;  // 0/1, textual & mixed modes
  std::vector<int> user_pref;     // 0/1, textual & mixed modes
  std::vector<bool> item_is_cold;
  int n_cold_items = 0;

  // Bayes-optimal score (higher = more likely positive) for a pair.
  double true_score(UserIdx u, ItemIdx i) const;
};

SynthResult synth_generate(const SynthConfig& config);

}  // namespace collabrec::data
