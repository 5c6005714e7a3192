#include "collabrec/synth.hpp"

#include "collabrec/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace collabrec::data {

namespace {

constexpr Timestamp kSpan = 1000000;
constexpr Timestamp kT1 = 800000;
constexpr Timestamp kT2 = 900000;
constexpr const char* kKeywords[2] = {"alpha", "beta"};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

SignalMode signal_mode_from_string(const std::string& s) {
  if (s == "collaborative") return SignalMode::Collaborative;
  if (s == "textual") return SignalMode::Textual;
  if (s == "mixed") return SignalMode::Mixed;
  throw std::invalid_argument("unknown signal mode: " + s);
}

std::string to_string(SignalMode m) {
  switch (m) {
    case SignalMode::Collaborative: return "collaborative";
    case SignalMode::Textual: return "textual";
    case SignalMode::Mixed: return "mixed";
  }
  return "?";
}

double SynthResult::true_score(UserIdx u, ItemIdx i) const {
  double dot = user_factors.row(u).dot(item_factors.row(i));
  switch (config.signal_mode) {
    case SignalMode::Collaborative:
      return config.noise_temperature * dot;
    case SignalMode::Textual:
      return item_keyword[i] == user_pref[u] ? 1.0 : -1.0;
    case SignalMode::Mixed:
      return config.noise_temperature * dot +
             config.text_bonus * (item_keyword[i] == user_pref[u] ? 1.0 : -1.0);
  }
  return 0.0;
}

SynthResult synth_generate(const SynthConfig& config) {
  if (config.latent_rank < 1) throw std::invalid_argument("latent_rank >= 1");
  if (!(config.noise_temperature > 0))
    throw std::invalid_argument("noise_temperature > 0");
  if (config.n_users < 1 || config.n_items < 1 || config.n_events < 1)
    throw std::invalid_argument("counts must be positive");
  if (static_cast<int64_t>(config.n_events) >
      static_cast<int64_t>(config.n_users) * config.n_items)
    throw std::invalid_argument("n_events exceeds distinct (user,item) pairs");

  SynthResult out;
  out.config = config;
  Rng rng(config.seed);

  const double scale = 1.0 / std::sqrt(static_cast<double>(config.latent_rank));
  out.user_factors =
      gaussian_matrix<double>(rng, config.n_users, config.latent_rank, scale);
  out.user_factors.array() += config.user_factor_mean * scale;
  out.item_factors =
      gaussian_matrix<double>(rng, config.n_items, config.latent_rank, scale);

  std::uniform_int_distribution<int> coin(0, 1);
  out.item_keyword.resize(config.n_items);
  out.user_pref.resize(config.n_users);
  for (auto& k : out.item_keyword) k = coin(rng);
  for (auto& p : out.user_pref) p = coin(rng);

  out.item_is_cold.assign(config.n_items, false);
  out.n_cold_items =
      static_cast<int>(config.cold_item_fraction * config.n_items);
  if (out.n_cold_items > 0) {
    // Random distinct cold items, drawn without replacement.
    std::vector<int> perm(config.n_items);
    for (int i = 0; i < config.n_items; ++i) perm[i] = i;
    for (int i = 0; i < out.n_cold_items; ++i) {
      std::uniform_int_distribution<int> pick(i, config.n_items - 1);
      std::swap(perm[i], perm[pick(rng)]);
      out.item_is_cold[perm[i]] = true;
    }
  }

  // Titles are the only text channel, so each mode meters exactly what it
  // leaks. Collaborative: one shared constant string -- zero information,
  // any lift over the text-only model is attributable to the injected
  // collaborative vectors. Textual: keyword plus item identity. Mixed:
  // keyword only, so the text channel carries the item's category but not
  // its identity (the identity signal stays exclusive to the factors).
  out.catalog.item_titles.resize(config.n_items);
  for (int i = 0; i < config.n_items; ++i) {
    std::string title = "an item";
    if (config.signal_mode == SignalMode::Textual)
      title = "item-" + std::to_string(i) + " " + kKeywords[out.item_keyword[i]];
    else if (config.signal_mode == SignalMode::Mixed)
      title = std::string("an ") + kKeywords[out.item_keyword[i]] + " item";
    out.catalog.item_titles[i] = title;
    out.catalog.item_id_map.emplace(std::to_string(i), i);
  }
  for (int u = 0; u < config.n_users; ++u)
    out.catalog.user_id_map.emplace(std::to_string(u), u);

  std::uniform_int_distribution<int> pick_user(0, config.n_users - 1);
  std::uniform_int_distribution<int> pick_item(0, config.n_items - 1);
  std::uniform_int_distribution<Timestamp> any_time(0, kSpan - 1);
  std::uniform_int_distribution<Timestamp> test_time(kT2, kSpan - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::unordered_set<int64_t> seen;
  std::vector<Interaction> interactions;
  interactions.reserve(config.n_events);
  while (static_cast<int>(interactions.size()) < config.n_events) {
    int u = pick_user(rng);
    int i = pick_item(rng);
    int64_t key = static_cast<int64_t>(u) * config.n_items + i;
    if (!seen.insert(key).second) continue;
    Interaction it;
    it.user = u;
    it.item = i;
    it.timestamp = out.item_is_cold[i] ? test_time(rng) : any_time(rng);
    double score = out.true_score(u, i);
    int label;
    if (config.signal_mode == SignalMode::Textual)
      label = score > 0 ? 1 : 0;  // deterministic keyword rule
    else
      label = unif(rng) < sigmoid(score) ? 1 : 0;
    it.label = label;
    it.rating = label ? 5 : 1;
    interactions.push_back(it);
  }

  out.split = temporal_split(std::move(interactions), kT1, kT2);
  return out;
}

}  // namespace collabrec::data
