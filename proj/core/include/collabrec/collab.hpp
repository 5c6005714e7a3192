#pragma once

// Conventional collaborative backbones: matrix factorization and a
// LightGCN-style propagation model over the bipartite train graph.
// Training gradients are analytic (the scoring path is shallow); the
// gradient-check tests validate them against finite differences.

#include "collabrec/autodiff.hpp"
#include "collabrec/data.hpp"
#include "collabrec/eval.hpp"
#include "collabrec/optimizer.hpp"
#include "collabrec/rng.hpp"
#include "collabrec/types.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace collabrec::collab {

using collabrec::NumericError;

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <class T>
struct FactorModel {
  ad::Param<T> user_emb{"user_emb", {}};
  ad::Param<T> item_emb{"item_emb", {}};

  int d2() const { return static_cast<int>(user_emb.value.cols()); }
  int n_users() const { return static_cast<int>(user_emb.value.rows()); }
  int n_items() const { return static_cast<int>(item_emb.value.rows()); }

  static FactorModel init(int n_users, int n_items, int d2, Rng& rng,
                          T init_std = T(0.01)) {
    FactorModel m;
    m.user_emb.value = gaussian_matrix<T>(rng, n_users, d2, init_std);
    m.item_emb.value = gaussian_matrix<T>(rng, n_items, d2, init_std);
    return m;
  }
};

template <class T>
T mf_predict(const FactorModel<T>& m, UserIdx u, ItemIdx i) {
  if (u < 0 || u >= m.n_users()) throw std::out_of_range("mf_predict: user");
  if (i < 0 || i >= m.n_items()) throw std::out_of_range("mf_predict: item");
  return sigmoid(T(m.user_emb.value.row(u).dot(m.item_emb.value.row(i))));
}

// Bipartite adjacency with symmetric normalization. Isolated nodes keep
// zero rows (no self loops); the layer-0 term keeps their embedding alive.
template <class T>
struct BipartiteGraph {
  struct Edge {
    UserIdx u;
    ItemIdx i;
    T w;  // 1 / sqrt(deg_u * deg_i)
  };
  std::vector<Edge> edges;
  int n_users = 0, n_items = 0;

  static BipartiteGraph from_train(const std::vector<data::Interaction>& train,
                                   int n_users, int n_items) {
    BipartiteGraph g;
    g.n_users = n_users;
    g.n_items = n_items;
    std::vector<int> du(n_users, 0), di(n_items, 0);
    std::vector<std::pair<UserIdx, ItemIdx>> pairs;
    {
      std::unordered_map<int64_t, bool> seen;
      for (const auto& it : train) {
        int64_t key = static_cast<int64_t>(it.user) * n_items + it.item;
        if (seen.emplace(key, true).second) pairs.emplace_back(it.user, it.item);
      }
    }
    for (auto& [u, i] : pairs) {
      ++du[u];
      ++di[i];
    }
    g.edges.reserve(pairs.size());
    for (auto& [u, i] : pairs)
      g.edges.push_back({u, i, T(1) / std::sqrt(T(du[u]) * T(di[i]))});
    return g;
  }

  // One propagation step: users aggregate items and vice versa.
  void step(const MatT<T>& u_in, const MatT<T>& i_in, MatT<T>& u_out,
            MatT<T>& i_out) const {
    u_out = MatT<T>::Zero(u_in.rows(), u_in.cols());
    i_out = MatT<T>::Zero(i_in.rows(), i_in.cols());
    for (const auto& e : edges) {
      u_out.row(e.u) += e.w * i_in.row(e.i);
      i_out.row(e.i) += e.w * u_in.row(e.u);
    }
  }

  // Mean of layers 0..L. The operator is symmetric, so the same routine
  // maps gradients w.r.t. the propagated embeddings back to layer 0.
  void propagate(const MatT<T>& u0, const MatT<T>& i0, int n_layers,
                 MatT<T>& u_out, MatT<T>& i_out) const {
    MatT<T> cu = u0, ci = i0;
    MatT<T> au = u0, ai = i0;
    for (int l = 1; l <= n_layers; ++l) {
      MatT<T> nu, ni;
      step(cu, ci, nu, ni);
      cu = std::move(nu);
      ci = std::move(ni);
      au += cu;
      ai += ci;
    }
    u_out = au / T(n_layers + 1);
    i_out = ai / T(n_layers + 1);
  }
};

template <class T>
struct GraphModel {
  FactorModel<T> base;
  BipartiteGraph<T> graph;
  int n_layers = 0;

  mutable MatT<T> prop_user, prop_item;
  mutable bool cache_valid = false;

  void invalidate() const { cache_valid = false; }

  void refresh() const {
    if (cache_valid) return;
    graph.propagate(base.user_emb.value, base.item_emb.value, n_layers,
                    prop_user, prop_item);
    cache_valid = true;
  }

  const MatT<T>& propagated_user() const {
    refresh();
    return prop_user;
  }
  const MatT<T>& propagated_item() const {
    refresh();
    return prop_item;
  }

  T predict(UserIdx u, ItemIdx i) const {
    refresh();
    if (u < 0 || u >= base.n_users()) throw std::out_of_range("predict: user");
    if (i < 0 || i >= base.n_items()) throw std::out_of_range("predict: item");
    return sigmoid(T(prop_user.row(u).dot(prop_item.row(i))));
  }
};

// User / item representation as consumed by the mapping function: the raw
// table row for MF, the propagated row for LightGCN.
template <class T>
Eigen::RowVector<T, Eigen::Dynamic> embed_lookup(const FactorModel<T>& m,
                                                 data::EntityKind kind,
                                                 int index) {
  const auto& table =
      kind == data::EntityKind::User ? m.user_emb.value : m.item_emb.value;
  if (index < 0 || index >= table.rows())
    throw std::out_of_range("embed_lookup: index");
  return table.row(index);
}

template <class T>
Eigen::RowVector<T, Eigen::Dynamic> embed_lookup(const GraphModel<T>& m,
                                                 data::EntityKind kind,
                                                 int index) {
  m.refresh();
  const auto& table =
      kind == data::EntityKind::User ? m.prop_user : m.prop_item;
  if (index < 0 || index >= table.rows())
    throw std::out_of_range("embed_lookup: index");
  return table.row(index);
}

struct CollabTrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;  // coefficient of ||psi||^2 in the objective
  int d2 = 16;
  int epochs = 20;
  int batch_size = 256;
  uint64_t seed = 1;
  int n_layers = 0;  // 0 = plain MF
};

struct CollabEpochLog {
  int epoch = 0;
  double train_loss = 0;
  double valid_auc = 0;
};

template <class T>
struct CollabTrainResult {
  GraphModel<T> model;
  std::vector<CollabEpochLog> log;
  int best_epoch = 0;
  double best_valid_auc = 0;
};

// Mini-batch Adam on mean BCE + weight_decay * ||psi||^2, scored through
// the propagated embeddings (identity propagation when n_layers == 0).
// Returns the epoch-end snapshot with the best validation AUC (ties ->
// earliest epoch).
template <class T>
CollabTrainResult<T> train_backbone(const data::SplitDataset& split,
                                    int n_users, int n_items,
                                    const CollabTrainConfig& cfg) {
  if (split.train.empty())
    throw std::invalid_argument("train_backbone: empty train split");
  Rng rng(cfg.seed);

  CollabTrainResult<T> out;
  GraphModel<T>& model = out.model;
  model.base = FactorModel<T>::init(n_users, n_items, cfg.d2, rng);
  model.graph = BipartiteGraph<T>::from_train(split.train, n_users, n_items);
  model.n_layers = cfg.n_layers;

  std::vector<ad::Param<T>*> params = {&model.base.user_emb,
                                       &model.base.item_emb};
  train::AdamConfig<T> acfg;
  acfg.lr = T(cfg.learning_rate);
  train::Adam<T> opt(params, acfg);

  MatT<T> best_user, best_item;
  double best_auc = -1;
  int best_epoch = -1;

  std::vector<size_t> order(split.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    size_t n_batches = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(),
                            start + static_cast<size_t>(cfg.batch_size));
      const T inv_b = T(1) / T(end - start);
      model.refresh();

      MatT<T> gu = MatT<T>::Zero(n_users, cfg.d2);
      MatT<T> gi = MatT<T>::Zero(n_items, cfg.d2);
      double batch_loss = 0;
      for (size_t k = start; k < end; ++k) {
        const auto& it = split.train[order[k]];
        T p = sigmoid(T(model.prop_user.row(it.user)
                            .dot(model.prop_item.row(it.item))));
        T pc = std::min(std::max(p, T(1e-12)), T(1) - T(1e-12));
        batch_loss += it.label ? -std::log(pc) : -std::log(T(1) - pc);
        T g = (p - T(it.label)) * inv_b;
        gu.row(it.user) += g * model.prop_item.row(it.item);
        gi.row(it.item) += g * model.prop_user.row(it.user);
      }
      batch_loss *= inv_b;
      if (!std::isfinite(batch_loss))
        throw NumericError("train_backbone: non-finite loss at epoch " +
                           std::to_string(epoch));
      epoch_loss += batch_loss;
      ++n_batches;

      // Map propagated-space gradients back to layer 0 (symmetric operator),
      // add the L2 term, step, and invalidate the propagation cache.
      opt.zero_grad();
      model.graph.propagate(gu, gi, cfg.n_layers,
                            model.base.user_emb.grad, model.base.item_emb.grad);
      model.base.user_emb.grad +=
          T(2 * cfg.weight_decay) * model.base.user_emb.value;
      model.base.item_emb.grad +=
          T(2 * cfg.weight_decay) * model.base.item_emb.value;
      opt.step();
      model.invalidate();
    }

    model.refresh();
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(split.valid.size());
    for (const auto& it : split.valid) {
      scores.push_back(static_cast<double>(
          model.prop_user.row(it.user).dot(model.prop_item.row(it.item))));
      labels.push_back(it.label);
    }
    auto va = split.valid.empty() ? std::nullopt : eval::auc(scores, labels);
    double vauc = va.value_or(0.5);

    out.log.push_back({epoch, epoch_loss / static_cast<double>(n_batches), vauc});
    if (vauc > best_auc) {
      best_auc = vauc;
      best_epoch = epoch;
      best_user = model.base.user_emb.value;
      best_item = model.base.item_emb.value;
    }
  }

  model.base.user_emb.value = std::move(best_user);
  model.base.item_emb.value = std::move(best_item);
  model.invalidate();
  out.best_epoch = best_epoch;
  out.best_valid_auc = best_auc;
  return out;
}

}  // namespace collabrec::collab
