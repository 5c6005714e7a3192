#include "collabrec/data.hpp"

#include "collabrec/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace collabrec::data {

namespace {

std::vector<std::string> split_fields(const std::string& line,
                                      const std::string& sep) {
  std::vector<std::string> out;
  if (sep.empty()) {
    out.push_back(line);
    return out;
  }
  size_t pos = 0;
  while (true) {
    size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
  return out;
}

[[noreturn]] void parse_fail(const std::string& path, size_t line_no,
                             const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
}

std::string format_rating(double r) {
  if (r == std::floor(r) && std::abs(r) < 1e15) {
    std::ostringstream os;
    os << static_cast<long long>(r);
    return os.str();
  }
  std::ostringstream os;
  os << r;
  return os.str();
}

}  // namespace

const std::vector<Interaction>& SplitDataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "valid") return valid;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split: " + name);
}

std::pair<Catalog, std::vector<Interaction>> load_ratings(
    const std::string& ratings_path, const std::optional<std::string>& titles_path,
    double threshold, const std::string& sep) {
  std::ifstream in(ratings_path);
  if (!in) throw ParseError("cannot open ratings file: " + ratings_path);

  Catalog catalog;
  std::vector<std::string> item_raw_ids;
  std::vector<Interaction> interactions;

  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line, sep);
    if (fields.size() < 4)
      parse_fail(ratings_path, line_no, "expected 4 fields, got " +
                                            std::to_string(fields.size()));
    Interaction it;
    try {
      it.rating = std::stod(fields[2]);
      it.timestamp = std::stoll(fields[3]);
    } catch (const std::exception&) {
      parse_fail(ratings_path, line_no, "malformed rating or timestamp");
    }
    it.label = it.rating >= threshold ? 1 : 0;

    auto [uit, unew] = catalog.user_id_map.try_emplace(
        fields[0], static_cast<UserIdx>(catalog.user_id_map.size()));
    it.user = uit->second;
    auto [iit, inew] = catalog.item_id_map.try_emplace(
        fields[1], static_cast<ItemIdx>(catalog.item_id_map.size()));
    it.item = iit->second;
    if (inew) item_raw_ids.push_back(fields[1]);
    interactions.push_back(it);
  }
  if (interactions.empty())
    throw ParseError("empty ratings file: " + ratings_path);

  // Duplicate (user, item) pairs: keep the latest occurrence only.
  {
    std::unordered_map<int64_t, size_t> best;  // pair key -> kept index
    for (size_t idx = 0; idx < interactions.size(); ++idx) {
      const auto& it = interactions[idx];
      int64_t key = static_cast<int64_t>(it.user) *
                        static_cast<int64_t>(catalog.n_items()) +
                    it.item;
      auto found = best.find(key);
      if (found == best.end()) {
        best.emplace(key, idx);
      } else if (interactions[found->second].timestamp <= it.timestamp) {
        found->second = idx;
      }
    }
    if (best.size() != interactions.size()) {
      std::vector<bool> keep(interactions.size(), false);
      for (auto& [k, idx] : best) keep[idx] = true;
      std::vector<Interaction> deduped;
      deduped.reserve(best.size());
      for (size_t idx = 0; idx < interactions.size(); ++idx)
        if (keep[idx]) deduped.push_back(interactions[idx]);
      interactions = std::move(deduped);
    }
  }

  catalog.item_titles.resize(item_raw_ids.size());
  for (size_t i = 0; i < item_raw_ids.size(); ++i)
    catalog.item_titles[i] = "item " + item_raw_ids[i];
  if (titles_path) load_titles(*titles_path, sep, catalog);
  return {std::move(catalog), std::move(interactions)};
}

void load_titles(const std::string& titles_path, const std::string& sep,
                 Catalog& catalog) {
  std::ifstream in(titles_path);
  if (!in) throw ParseError("cannot open titles file: " + titles_path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line, sep);
    if (fields.size() < 2)
      parse_fail(titles_path, line_no, "expected at least 2 fields");
    auto it = catalog.item_id_map.find(fields[0]);
    if (it == catalog.item_id_map.end()) continue;  // item never rated
    if (!fields[1].empty()) catalog.item_titles[it->second] = fields[1];
  }
}

SplitDataset temporal_split(std::vector<Interaction> interactions, Timestamp t1,
                            Timestamp t2, std::string* warning) {
  if (t1 >= t2) throw std::invalid_argument("temporal_split: t1 >= t2");
  std::stable_sort(interactions.begin(), interactions.end(),
                   [](const Interaction& a, const Interaction& b) {
                     return a.timestamp < b.timestamp;
                   });
  SplitDataset out;
  out.t1 = t1;
  out.t2 = t2;
  for (auto& it : interactions) {
    if (it.timestamp < t1)
      out.train.push_back(it);
    else if (it.timestamp < t2)
      out.valid.push_back(it);
    else
      out.test.push_back(it);
  }
  if (warning) {
    std::string w;
    if (out.train.empty()) w += "train split is empty; ";
    if (out.valid.empty()) w += "valid split is empty; ";
    if (out.test.empty()) w += "test split is empty; ";
    *warning = w;
  }
  return out;
}

std::pair<Timestamp, Timestamp> percentile_boundaries(
    const std::vector<Interaction>& interactions, double f1, double f2) {
  if (interactions.empty())
    throw std::invalid_argument("percentile_boundaries: no interactions");
  if (!(f1 > 0 && f1 < f2 && f2 < 1))
    throw std::invalid_argument("percentile_boundaries: need 0 < f1 < f2 < 1");
  std::vector<Timestamp> ts;
  ts.reserve(interactions.size());
  for (auto& it : interactions) ts.push_back(it.timestamp);
  std::sort(ts.begin(), ts.end());
  auto at = [&](double f) {
    size_t idx = static_cast<size_t>(f * static_cast<double>(ts.size()));
    idx = std::min(idx, ts.size() - 1);
    return ts[idx];
  };
  return {at(f1), at(f2)};
}

SplitSamples build_samples(const SplitDataset& split, const Catalog& catalog) {
  struct Liked {
    Timestamp ts;
    ItemIdx item;
    int split_rank;  // 0 train, 1 valid, 2 test
    size_t ord;      // insertion order tiebreak
  };
  std::vector<std::vector<Liked>> liked(catalog.n_users());
  size_t ord = 0;
  auto collect = [&](const std::vector<Interaction>& v, int rank) {
    for (const auto& it : v) {
      if (it.label == 1)
        liked[it.user].push_back({it.timestamp, it.item, rank, ord});
      ++ord;
    }
  };
  collect(split.train, 0);
  collect(split.valid, 1);
  collect(split.test, 2);
  for (auto& v : liked)
    std::sort(v.begin(), v.end(), [](const Liked& a, const Liked& b) {
      return a.ts != b.ts ? a.ts < b.ts : a.ord < b.ord;
    });

  auto make = [&](const std::vector<Interaction>& v, bool train_only) {
    std::vector<Sample> out;
    out.reserve(v.size());
    for (const auto& it : v) {
      Sample s;
      s.user = it.user;
      s.target_item = it.item;
      s.label = it.label;
      s.timestamp = it.timestamp;
      const auto& cand = liked[it.user];
      std::vector<ItemIdx> hist;
      for (const auto& c : cand) {
        if (c.ts >= it.timestamp) break;
        if (train_only && c.split_rank != 0) continue;
        hist.push_back(c.item);
      }
      if (hist.size() > kMaxHistory)
        hist.erase(hist.begin(),
                   hist.begin() + (hist.size() - kMaxHistory));
      s.history = std::move(hist);
      out.push_back(std::move(s));
    }
    return out;
  };

  SplitSamples out;
  out.train = make(split.train, /*train_only=*/true);
  out.valid = make(split.valid, /*train_only=*/false);
  out.test = make(split.test, /*train_only=*/false);
  return out;
}

WarmColdTags warm_cold_partition(const SplitDataset& split, int n_users,
                                 int n_items, int k) {
  std::vector<int> ucount(n_users, 0), icount(n_items, 0);
  for (const auto& it : split.train) {
    ++ucount[it.user];
    ++icount[it.item];
  }
  WarmColdTags tags;
  tags.k = k;
  tags.users.resize(n_users);
  tags.items.resize(n_items);
  for (int u = 0; u < n_users; ++u)
    tags.users[u] = ucount[u] < k ? WarmCold::Cold : WarmCold::Warm;
  for (int i = 0; i < n_items; ++i)
    tags.items[i] = icount[i] < k ? WarmCold::Cold : WarmCold::Warm;
  return tags;
}

void export_ratings(const std::string& path, const std::vector<Interaction>& all,
                    double threshold, const std::string& sep) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write ratings file: " + path);
  for (const auto& it : all) {
    double r = it.rating;
    // Guard against inconsistent rating/label pairs in caller-built data.
    if ((r >= threshold) != (it.label == 1))
      r = it.label == 1 ? threshold : threshold - 1;
    out << it.user << sep << it.item << sep << format_rating(r) << sep
        << it.timestamp << "\n";
  }
}

void export_titles(const std::string& path, const Catalog& catalog,
                   const std::string& sep) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write titles file: " + path);
  std::vector<const std::string*> raw(catalog.n_items(), nullptr);
  for (const auto& [raw_id, idx] : catalog.item_id_map) raw[idx] = &raw_id;
  for (int i = 0; i < catalog.n_items(); ++i)
    out << (raw[i] ? *raw[i] : std::to_string(i)) << sep
        << catalog.item_titles[i] << "\n";
}

uint64_t fingerprint(const std::vector<Interaction>& interactions) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& it : interactions) {
    int64_t fields[4] = {it.user, it.item, it.label, it.timestamp};
    h = fnv1a64_bytes(fields, sizeof(fields), h);
  }
  return h;
}

}  // namespace collabrec::data
