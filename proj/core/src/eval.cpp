#include "collabrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

namespace collabrec::eval {

std::optional<double> auc(std::span<const double> scores,
                          std::span<const int> labels) {
  const size_t n = scores.size();
  if (n != labels.size()) throw std::invalid_argument("auc: length mismatch");
  size_t n_pos = 0;
  for (int y : labels) n_pos += (y == 1);
  size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Midranks over tie groups; sum ranks of positives.
  double pos_rank_sum = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += midrank;
    i = j;
  }
  double u_stat = pos_rank_sum -
                  static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1) / 2;
  return u_stat / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

UaucResult uauc(const ScoredSet& set) {
  if (set.size() == 0) throw std::invalid_argument("uauc: empty set");
  std::map<UserIdx, std::pair<std::vector<double>, std::vector<int>>> per_user;
  for (size_t i = 0; i < set.size(); ++i) {
    auto& [s, y] = per_user[set.users[i]];
    s.push_back(set.scores[i]);
    y.push_back(set.labels[i]);
  }
  double total = 0;
  int counted = 0;
  for (const auto& [u, sy] : per_user) {
    auto a = auc(sy.first, sy.second);
    if (a) {
      total += *a;
      ++counted;
    }
  }
  UaucResult r;
  r.n_users_counted = counted;
  if (counted > 0) r.value = total / counted;
  return r;
}

StratumReport stratum_report(const ScoredSet& set) {
  StratumReport r;
  r.n_samples = static_cast<int>(set.size());
  if (set.size() == 0) return r;
  r.auc = auc(set.scores, set.labels);
  auto u = uauc(set);
  r.uauc = u.value;
  r.n_users_counted = u.n_users_counted;
  return r;
}

EvalReport warm_cold_report(const ScoredSet& set, const data::WarmColdTags& tags) {
  EvalReport rep;
  rep.overall = stratum_report(set);
  ScoredSet wi, ci, wu, cu;
  for (size_t i = 0; i < set.size(); ++i) {
    ItemIdx it = set.items[i];
    UserIdx us = set.users[i];
    if (it < 0 || it >= static_cast<ItemIdx>(tags.items.size()) || us < 0 ||
        us >= static_cast<UserIdx>(tags.users.size()))
      throw std::out_of_range("warm_cold_report: entity not covered by tags");
    auto& by_item = tags.items[it] == data::WarmCold::Warm ? wi : ci;
    auto& by_user = tags.users[us] == data::WarmCold::Warm ? wu : cu;
    by_item.push(us, it, set.scores[i], set.labels[i]);
    by_user.push(us, it, set.scores[i], set.labels[i]);
  }
  rep.warm_item = stratum_report(wi);
  rep.cold_item = stratum_report(ci);
  rep.warm_user = stratum_report(wu);
  rep.cold_user = stratum_report(cu);
  return rep;
}

namespace {

std::string fmt(const std::optional<double>& v) {
  if (!v) return "undefined";
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << *v;
  return os.str();
}

void emit(std::ostringstream& os, const std::string& prefix,
          const StratumReport& s) {
  os << prefix << "auc = " << fmt(s.auc) << "\n";
  os << prefix << "uauc = " << fmt(s.uauc) << "\n";
  os << prefix << "n_samples = " << s.n_samples << "\n";
  os << prefix << "n_users_counted = " << s.n_users_counted << "\n";
}

}  // namespace

std::string to_keyvalue(const EvalReport& r) {
  std::ostringstream os;
  os << "model_id = " << r.model_id << "\n";
  os << "split = " << r.split << "\n";
  os << "seed = " << r.seed << "\n";
  emit(os, "", r.overall);
  emit(os, "warm.", r.warm_item);
  emit(os, "cold.", r.cold_item);
  emit(os, "warm_user.", r.warm_user);
  emit(os, "cold_user.", r.cold_user);
  return os.str();
}

std::string to_table(const EvalReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "stratum" << std::setw(12) << "auc"
     << std::setw(12) << "uauc" << std::setw(10) << "samples" << std::setw(8)
     << "users" << "\n";
  auto row = [&](const char* name, const StratumReport& s) {
    os << std::left << std::setw(12) << name << std::setw(12) << fmt(s.auc)
       << std::setw(12) << fmt(s.uauc) << std::setw(10) << s.n_samples
       << std::setw(8) << s.n_users_counted << "\n";
  };
  row("overall", r.overall);
  row("warm_item", r.warm_item);
  row("cold_item", r.cold_item);
  row("warm_user", r.warm_user);
  row("cold_user", r.cold_user);
  return os.str();
}

}  // namespace collabrec::eval
