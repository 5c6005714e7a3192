#pragma once

// The collaborative-to-token bridge: the mapping MLP g, hybrid sequence
// assembly (token embeddings with mapped collaborative vectors spliced at
// the ID-placeholder positions), and the learnable-ID-token ablation.

#include "collabrec/autodiff.hpp"
#include "collabrec/collab.hpp"
#include "collabrec/lm.hpp"
#include "collabrec/prompt.hpp"
#include "collabrec/rng.hpp"

#include <stdexcept>
#include <vector>

namespace collabrec::bridge {

// One-hidden-layer perceptron projecting d2-wide collaborative vectors into
// the d1-wide token embedding space; hidden width defaults to 10 * d2.
template <class T>
struct MappingMlp {
  ad::Param<T> w1{"mapping.w1", {}};  // d2 x hidden
  ad::Param<T> b1{"mapping.b1", {}};  // 1 x hidden
  ad::Param<T> w2{"mapping.w2", {}};  // hidden x d1
  ad::Param<T> b2{"mapping.b2", {}};  // 1 x d1

  int d2() const { return static_cast<int>(w1.value.rows()); }
  int hidden() const { return static_cast<int>(w1.value.cols()); }
  int d1() const { return static_cast<int>(w2.value.cols()); }

  static MappingMlp init(int d2, int d1, Rng& rng, int hidden = -1,
                         T std = T(0.02)) {
    if (hidden <= 0) hidden = 10 * d2;
    MappingMlp m;
    m.w1.value = gaussian_matrix<T>(rng, d2, hidden, std);
    m.b1.value = MatT<T>::Zero(1, hidden);
    m.w2.value = gaussian_matrix<T>(rng, hidden, d1, std);
    m.b2.value = MatT<T>::Zero(1, d1);
    return m;
  }

  std::vector<ad::Param<T>*> params() { return {&w1, &b1, &w2, &b2}; }
  void set_trainable(bool v) {
    for (auto* p : params()) p->trainable = v;
  }
};

template <class T>
MatT<T> map_collab(const MappingMlp<T>& g, const MatT<T>& v) {
  if (v.rows() != 1 || v.cols() != g.d2())
    throw std::invalid_argument("map_collab: expected 1 x d2 input");
  MatT<T> h = (v * g.w1.value + g.b1.value).cwiseMax(T(0));
  return h * g.w2.value + g.b2.value;
}

template <class T>
ad::Var map_collab_tape(ad::Tape<T>& tape, MappingMlp<T>& g, ad::Var v) {
  ad::Var h = tape.relu(tape.add_rowvec(tape.matmul(v, tape.param(g.w1)),
                                        tape.param(g.b1)));
  return tape.add_rowvec(tape.matmul(h, tape.param(g.w2)), tape.param(g.b2));
}

enum class RowTag { Token, MappedUser, MappedItem };

template <class T>
struct HybridSequence {
  MatT<T> E;  // K x d1
  std::vector<RowTag> provenance;
};

// Directly learnable per-entity d1-wide tokens; the no-backbone ablation.
template <class T>
struct IdTokenTable {
  ad::Param<T> user_tokens{"idtable.user", {}};
  ad::Param<T> item_tokens{"idtable.item", {}};

  static IdTokenTable init(int n_users, int n_items, int d1, Rng& rng,
                           T std = T(0.02)) {
    IdTokenTable t;
    t.user_tokens.value = gaussian_matrix<T>(rng, n_users, d1, std);
    t.item_tokens.value = gaussian_matrix<T>(rng, n_items, d1, std);
    return t;
  }

  std::vector<ad::Param<T>*> params() { return {&user_tokens, &item_tokens}; }
  void set_trainable(bool v) {
    for (auto* p : params()) p->trainable = v;
  }
};

// Gradient-free assembly from explicit collaborative tables (raw MF rows or
// propagated LightGCN rows). Cold entities optionally fall back to the
// table's mean row so text can dominate for unseen ids.
template <class T>
HybridSequence<T> assemble(const TokenizedPrompt& tp,
                           const lm::TransformerLM<T>& model,
                           const MatT<T>& user_table, const MatT<T>& item_table,
                           const MappingMlp<T>& g,
                           const data::WarmColdTags* tags = nullptr) {
  HybridSequence<T> out;
  out.E = lm::embed_tokens(model, tp.ids);
  out.provenance.assign(tp.ids.size(), RowTag::Token);
  const bool full = tp.uid_pos.has_value() || tp.iid_pos.has_value();
  if (!full) return out;
  if (!tp.uid_pos || !tp.iid_pos)
    throw std::invalid_argument("assemble: placeholder positions missing");

  auto pick = [&](const MatT<T>& table, int idx, bool cold) -> MatT<T> {
    if (idx < 0 || idx >= table.rows())
      throw std::out_of_range("assemble: entity index");
    if (cold) return table.colwise().mean();
    return table.row(idx);
  };
  bool ucold = tags && tags->users[tp.user] == data::WarmCold::Cold;
  bool icold = tags && tags->items[tp.item] == data::WarmCold::Cold;
  out.E.row(*tp.uid_pos) = map_collab(g, pick(user_table, tp.user, ucold));
  out.E.row(*tp.iid_pos) = map_collab(g, pick(item_table, tp.item, icold));
  out.provenance[*tp.uid_pos] = RowTag::MappedUser;
  out.provenance[*tp.iid_pos] = RowTag::MappedItem;
  return out;
}

template <class T>
HybridSequence<T> assemble_personalized(const TokenizedPrompt& tp,
                                        const lm::TransformerLM<T>& model,
                                        const IdTokenTable<T>& table) {
  HybridSequence<T> out;
  out.E = lm::embed_tokens(model, tp.ids);
  out.provenance.assign(tp.ids.size(), RowTag::Token);
  if (!tp.uid_pos || !tp.iid_pos)
    throw std::invalid_argument("assemble_personalized: placeholders missing");
  out.E.row(*tp.uid_pos) = table.user_tokens.value.row(tp.user);
  out.E.row(*tp.iid_pos) = table.item_tokens.value.row(tp.item);
  out.provenance[*tp.uid_pos] = RowTag::MappedUser;
  out.provenance[*tp.iid_pos] = RowTag::MappedItem;
  return out;
}

// Differentiable collaborative-vector source for tape-based training.
// Gradients flow into the backbone tables when they are trainable; with
// n_layers > 0 the propagation itself is part of the graph.
template <class T>
class BackboneSource {
 public:
  explicit BackboneSource(collab::GraphModel<T>& model) : model_(&model) {}

  void begin_sample(ad::Tape<T>& tape) {
    tape_ = &tape;
    prop_ = ad::Var{};
    if (model_->n_layers == 0) {
      user_ = tape.param(model_->base.user_emb);
      item_ = tape.param(model_->base.item_emb);
      return;
    }
    if (model_->base.user_emb.trainable || model_->base.item_emb.trainable) {
      ad::Var stacked = tape.concat_rows(tape.param(model_->base.user_emb),
                                         tape.param(model_->base.item_emb));
      const auto* graph = &model_->graph;
      int layers = model_->n_layers;
      int nu = model_->base.n_users();
      auto prop_fn = [graph, layers, nu](const MatT<T>& x) {
        MatT<T> uo, io;
        graph->propagate(x.topRows(nu), x.bottomRows(x.rows() - nu), layers,
                         uo, io);
        MatT<T> out(x.rows(), x.cols());
        out.topRows(nu) = uo;
        out.bottomRows(x.rows() - nu) = io;
        return out;
      };
      prop_ = tape.apply_linear(stacked, prop_fn, prop_fn);
    } else {
      model_->refresh();
      user_ = tape.leaf(model_->prop_user);
      item_ = tape.leaf(model_->prop_item);
    }
  }

  ad::Var user_vec(UserIdx u) {
    if (prop_.valid()) return tape_->gather_rows(prop_, {static_cast<int>(u)});
    return tape_->gather_rows(user_, {static_cast<int>(u)});
  }
  ad::Var item_vec(ItemIdx i) {
    if (prop_.valid())
      return tape_->gather_rows(
          prop_, {static_cast<int>(model_->base.n_users() + i)});
    return tape_->gather_rows(item_, {static_cast<int>(i)});
  }

 private:
  collab::GraphModel<T>* model_;
  ad::Tape<T>* tape_ = nullptr;
  ad::Var user_, item_, prop_;
};

// Tape-based hybrid assembly: token-embedding gather with the two mapped
// rows spliced in at the placeholder positions.
template <class T>
ad::Var assemble_tape(ad::Tape<T>& tape, const TokenizedPrompt& tp,
                      lm::TransformerLM<T>& model, BackboneSource<T>* source,
                      MappingMlp<T>* g) {
  ad::Var E = tape.gather_rows(tape.param(model.token_emb), tp.ids);
  if (!tp.uid_pos && !tp.iid_pos) return E;  // TextOnly
  if (!tp.uid_pos || !tp.iid_pos || !source || !g)
    throw std::invalid_argument("assemble_tape: incomplete Full-variant inputs");
  source->begin_sample(tape);
  ad::Var mu = map_collab_tape(tape, *g, source->user_vec(tp.user));
  ad::Var mi = map_collab_tape(tape, *g, source->item_vec(tp.item));
  E = tape.overwrite_row(E, mu, *tp.uid_pos);
  E = tape.overwrite_row(E, mi, *tp.iid_pos);
  return E;
}

template <class T>
ad::Var assemble_personalized_tape(ad::Tape<T>& tape, const TokenizedPrompt& tp,
                                   lm::TransformerLM<T>& model,
                                   IdTokenTable<T>& table) {
  ad::Var E = tape.gather_rows(tape.param(model.token_emb), tp.ids);
  if (!tp.uid_pos || !tp.iid_pos)
    throw std::invalid_argument("assemble_personalized_tape: placeholders");
  ad::Var ur = tape.gather_rows(tape.param(table.user_tokens),
                                {static_cast<int>(tp.user)});
  ad::Var ir = tape.gather_rows(tape.param(table.item_tokens),
                                {static_cast<int>(tp.item)});
  E = tape.overwrite_row(E, ur, *tp.uid_pos);
  E = tape.overwrite_row(E, ir, *tp.iid_pos);
  return E;
}

}  // namespace collabrec::bridge
