#pragma once

// Shared helpers for the test suite: central-difference gradient checks and
// a brute-force ranking-quality oracle that the fast implementations are
// compared against.

#include "collabrec/autodiff.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace testutil {

using collabrec::ad::Param;

inline double rel_err(double a, double b) {
  double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

// Central-difference check of d loss / d param against the analytic gradient
// accumulated by one backward pass. `loss` must rebuild the computation from
// the current parameter values on every call.
struct GradCheckResult {
  double max_rel_err = 0;
  int n_checked = 0;
};

inline GradCheckResult fd_gradcheck(std::vector<Param<double>*> params,
                                    const std::function<double()>& loss,
                                    const std::function<void()>& backward,
                                    double eps = 1e-4) {
  for (auto* p : params) p->zero_grad();
  backward();

  GradCheckResult out;
  for (auto* p : params) {
    if (!p->trainable) continue;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double orig = p->value.data()[i];
      p->value.data()[i] = orig + eps;
      double up = loss();
      p->value.data()[i] = orig - eps;
      double down = loss();
      p->value.data()[i] = orig;
      double fd = (up - down) / (2 * eps);
      double an = p->grad.size() > 0 ? p->grad.data()[i] : 0.0;
      // treat tiny gradients as matching-to-absolute-tolerance
      double err = (std::abs(fd) < 1e-7 && std::abs(an) < 1e-7)
                       ? 0.0
                       : rel_err(fd, an);
      out.max_rel_err = std::max(out.max_rel_err, err);
      ++out.n_checked;
    }
  }
  return out;
}

// O(n^2) pairwise oracle: fraction of (positive, negative) pairs ranked
// correctly, ties counting one half.
inline double brute_force_auc(std::span<const double> scores,
                              std::span<const int> labels) {
  double wins = 0;
  long pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace testutil
