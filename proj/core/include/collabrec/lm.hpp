#pragma once

// Toy causal transformer standing in for the frozen LLM: learned token and
// positional embeddings, pre-LN attention/FFN blocks, untied output head,
// optional LoRA adapters on the attention query/value projections, and a
// two-way Yes/No scoring head.

#include "collabrec/autodiff.hpp"
#include "collabrec/optimizer.hpp"
#include "collabrec/rng.hpp"
#include "collabrec/tokenizer.hpp"
#include "collabrec/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace collabrec::lm {

struct LmConfig {
  int d1 = 64;
  int n_layers = 2;
  int n_heads = 4;
  int max_len = 160;
  int vocab_size = 0;
};

template <class T>
struct LayerWeights {
  ad::Param<T> ln1_g, ln1_b;
  ad::Param<T> wq, bq, wk, bk, wv, bv, wo, bo;
  ad::Param<T> ln2_g, ln2_b;
  ad::Param<T> w1, b1, w2, b2;
};

template <class T>
struct TransformerLM {
  LmConfig cfg;
  ad::Param<T> token_emb;  // |V| x d1
  ad::Param<T> pos_emb;    // max_len x d1
  std::vector<LayerWeights<T>> layers;
  ad::Param<T> final_ln_g, final_ln_b;
  ad::Param<T> head_w, head_b;  // untied output projection, d1 x |V|

  static TransformerLM init(const LmConfig& cfg, Rng& rng, T std = T(0.02)) {
    if (cfg.vocab_size <= 0) throw std::invalid_argument("vocab_size");
    if (cfg.d1 % cfg.n_heads != 0)
      throw std::invalid_argument("d1 % n_heads != 0");
    TransformerLM m;
    m.cfg = cfg;
    auto gauss = [&](const std::string& name, int r, int c) {
      return ad::Param<T>(name, gaussian_matrix<T>(rng, r, c, std));
    };
    auto zeros = [&](const std::string& name, int r, int c) {
      return ad::Param<T>(name, MatT<T>::Zero(r, c));
    };
    auto ones = [&](const std::string& name, int c) {
      return ad::Param<T>(name, MatT<T>::Ones(1, c));
    };
    m.token_emb = gauss("token_emb", cfg.vocab_size, cfg.d1);
    m.pos_emb = gauss("pos_emb", cfg.max_len, cfg.d1);
    const int h = 4 * cfg.d1;
    for (int l = 0; l < cfg.n_layers; ++l) {
      std::string p = "layer." + std::to_string(l) + ".";
      LayerWeights<T> w{
          ones(p + "ln1.g", cfg.d1), zeros(p + "ln1.b", 1, cfg.d1),
          gauss(p + "attn.wq", cfg.d1, cfg.d1), zeros(p + "attn.bq", 1, cfg.d1),
          gauss(p + "attn.wk", cfg.d1, cfg.d1), zeros(p + "attn.bk", 1, cfg.d1),
          gauss(p + "attn.wv", cfg.d1, cfg.d1), zeros(p + "attn.bv", 1, cfg.d1),
          gauss(p + "attn.wo", cfg.d1, cfg.d1), zeros(p + "attn.bo", 1, cfg.d1),
          ones(p + "ln2.g", cfg.d1), zeros(p + "ln2.b", 1, cfg.d1),
          gauss(p + "mlp.w1", cfg.d1, h), zeros(p + "mlp.b1", 1, h),
          gauss(p + "mlp.w2", h, cfg.d1), zeros(p + "mlp.b2", 1, cfg.d1)};
      m.layers.push_back(std::move(w));
    }
    m.final_ln_g = ones("final.ln.g", cfg.d1);
    m.final_ln_b = zeros("final.ln.b", 1, cfg.d1);
    m.head_w = gauss("head.w", cfg.d1, cfg.vocab_size);
    m.head_b = zeros("head.b", 1, cfg.vocab_size);
    return m;
  }

  std::vector<ad::Param<T>*> params() {
    std::vector<ad::Param<T>*> out = {&token_emb, &pos_emb};
    for (auto& l : layers)
      for (auto* p : {&l.ln1_g, &l.ln1_b, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv,
                      &l.bv, &l.wo, &l.bo, &l.ln2_g, &l.ln2_b, &l.w1, &l.b1,
                      &l.w2, &l.b2})
        out.push_back(p);
    out.push_back(&final_ln_g);
    out.push_back(&final_ln_b);
    out.push_back(&head_w);
    out.push_back(&head_b);
    return out;
  }

  void set_trainable(bool v) {
    for (auto* p : params()) p->trainable = v;
  }
};

struct LoraConfig {
  int rank = 8;
  double alpha = 16;
};

// Rank-decomposition update pairs on the attention query and value
// projections of every layer. B starts at zero, so the adapted model is
// exactly the base model at initialization.
template <class T>
struct LoraAdapter {
  LoraConfig cfg;
  struct Pair {
    ad::Param<T> A;  // d1 x r, Gaussian init
    ad::Param<T> B;  // r x d1, zero init
  };
  std::vector<Pair> q, v;

  T scale() const { return T(cfg.alpha / cfg.rank); }

  static LoraAdapter init(const LmConfig& lm_cfg, const LoraConfig& cfg,
                          Rng& rng, T std = T(0.02)) {
    LoraAdapter a;
    a.cfg = cfg;
    for (int l = 0; l < lm_cfg.n_layers; ++l) {
      std::string p = "lora." + std::to_string(l) + ".";
      a.q.push_back({ad::Param<T>(p + "q.A",
                                  gaussian_matrix<T>(rng, lm_cfg.d1, cfg.rank, std)),
                     ad::Param<T>(p + "q.B", MatT<T>::Zero(cfg.rank, lm_cfg.d1))});
      a.v.push_back({ad::Param<T>(p + "v.A",
                                  gaussian_matrix<T>(rng, lm_cfg.d1, cfg.rank, std)),
                     ad::Param<T>(p + "v.B", MatT<T>::Zero(cfg.rank, lm_cfg.d1))});
    }
    return a;
  }

  std::vector<ad::Param<T>*> params() {
    std::vector<ad::Param<T>*> out;
    for (auto& p : q) {
      out.push_back(&p.A);
      out.push_back(&p.B);
    }
    for (auto& p : v) {
      out.push_back(&p.A);
      out.push_back(&p.B);
    }
    return out;
  }

  void set_trainable(bool val) {
    for (auto* p : params()) p->trainable = val;
  }
};

// Pure embedding lookup (positional addition happens inside the forward).
template <class T>
MatT<T> embed_tokens(const TransformerLM<T>& m, const std::vector<int>& ids) {
  MatT<T> out(static_cast<Eigen::Index>(ids.size()), m.cfg.d1);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= m.cfg.vocab_size)
      throw std::out_of_range("embed_tokens: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = m.token_emb.value.row(ids[i]);
  }
  return out;
}

// Transformer body over a raw embedding sequence (K x d1); returns the
// final hidden states (K x d1). Accepting embeddings rather than ids is
// what allows hybrid sequences to be injected.
template <class T>
ad::Var lm_hidden(ad::Tape<T>& tape, TransformerLM<T>& m, ad::Var E,
                  LoraAdapter<T>* lora = nullptr) {
  const Eigen::Index K = tape.value(E).rows();
  if (K > m.cfg.max_len)
    throw std::length_error("sequence exceeds max_len");
  if (tape.value(E).cols() != m.cfg.d1)
    throw std::invalid_argument("lm_hidden: embedding width mismatch");

  std::vector<int> pos(static_cast<size_t>(K));
  for (Eigen::Index i = 0; i < K; ++i) pos[static_cast<size_t>(i)] = static_cast<int>(i);
  ad::Var x = tape.add(E, tape.gather_rows(tape.param(m.pos_emb), pos));

  for (int l = 0; l < m.cfg.n_layers; ++l) {
    auto& w = m.layers[l];
    ad::Var a = tape.layernorm(x, tape.param(w.ln1_g), tape.param(w.ln1_b));
    auto proj = [&](ad::Param<T>& wm, ad::Param<T>& bm,
                    typename LoraAdapter<T>::Pair* lp) {
      ad::Var y = tape.add_rowvec(tape.matmul(a, tape.param(wm)), tape.param(bm));
      if (lp) {
        ad::Var delta = tape.matmul(tape.matmul(a, tape.param(lp->A)),
                                    tape.param(lp->B));
        y = tape.add(y, tape.scale(delta, lora->scale()));
      }
      return y;
    };
    ad::Var q = proj(w.wq, w.bq, lora ? &lora->q[l] : nullptr);
    ad::Var k = proj(w.wk, w.bk, nullptr);
    ad::Var v = proj(w.wv, w.bv, lora ? &lora->v[l] : nullptr);
    ad::Var att = tape.causal_mha(q, k, v, m.cfg.n_heads);
    ad::Var o = tape.add_rowvec(tape.matmul(att, tape.param(w.wo)),
                                tape.param(w.bo));
    x = tape.add(x, o);

    ad::Var a2 = tape.layernorm(x, tape.param(w.ln2_g), tape.param(w.ln2_b));
    ad::Var hmid = tape.gelu(tape.add_rowvec(tape.matmul(a2, tape.param(w.w1)),
                                             tape.param(w.b1)));
    ad::Var mo = tape.add_rowvec(tape.matmul(hmid, tape.param(w.w2)),
                                 tape.param(w.b2));
    x = tape.add(x, mo);
  }
  return tape.layernorm(x, tape.param(m.final_ln_g), tape.param(m.final_ln_b));
}

// Logits over the vocabulary at the final position (1 x |V|).
template <class T>
ad::Var lm_logits_last(ad::Tape<T>& tape, TransformerLM<T>& m, ad::Var E,
                       LoraAdapter<T>* lora = nullptr) {
  ad::Var h = lm_hidden(tape, m, E, lora);
  ad::Var last = tape.row(h, tape.value(h).rows() - 1);
  return tape.add_rowvec(tape.matmul(last, tape.param(m.head_w)),
                         tape.param(m.head_b));
}

// Logits at every position (K x |V|), for next-token pretraining.
template <class T>
ad::Var lm_logits_all(ad::Tape<T>& tape, TransformerLM<T>& m, ad::Var E,
                      LoraAdapter<T>* lora = nullptr) {
  ad::Var h = lm_hidden(tape, m, E, lora);
  return tape.add_rowvec(tape.matmul(h, tape.param(m.head_w)),
                         tape.param(m.head_b));
}

// Gradient-free convenience forward from an embedding sequence.
template <class T>
MatT<T> forward_logits(TransformerLM<T>& m, const MatT<T>& E,
                       LoraAdapter<T>* lora = nullptr) {
  ad::Tape<T> tape;
  return tape.value(lm_logits_last(tape, m, tape.leaf(E), lora));
}

// P(Yes) via a numerically stable two-way softmax over {yes, no}.
template <class T>
T score_yes(const MatT<T>& logits, int yes_id = Tokenizer::kYes,
            int no_id = Tokenizer::kNo) {
  T zy = logits(0, yes_id), zn = logits(0, no_id);
  T mx = std::max(zy, zn);
  T ey = std::exp(zy - mx), en = std::exp(zn - mx);
  return ey / (ey + en);
}

struct PretrainConfig {
  double learning_rate = 1e-3;
  int epochs = 3;
  int batch_size = 32;
  uint64_t seed = 1;
  double clip_norm = 1.0;
};

struct PretrainEpochLog {
  int epoch = 0;
  double train_loss = 0;       // mean next-token cross entropy
  double valid_perplexity = 0; // per-token, on the held-out corpus
};

template <class T>
double corpus_perplexity(TransformerLM<T>& m,
                         const std::vector<std::vector<int>>& corpus) {
  double total = 0;
  long tokens = 0;
  for (const auto& ids : corpus) {
    if (ids.size() < 2) continue;
    ad::Tape<T> tape;
    ad::Var logits = lm_logits_all(tape, m, tape.leaf(embed_tokens(m, ids)));
    std::vector<int> targets(ids.size(), -1);
    for (size_t i = 0; i + 1 < ids.size(); ++i) targets[i] = ids[i + 1];
    ad::Var loss = tape.cross_entropy_rows(logits, targets);
    total += static_cast<double>(tape.value(loss)(0, 0)) *
             static_cast<double>(ids.size() - 1);
    tokens += static_cast<long>(ids.size() - 1);
  }
  return std::exp(total / static_cast<double>(tokens));
}

// Next-token training of the base model on text-only prompt sequences
// (ground-truth answer token appended by the caller). The result is the
// frozen base for every later tuning stage.
template <class T>
std::vector<PretrainEpochLog> pretrain_base(
    TransformerLM<T>& m, const std::vector<std::vector<int>>& train_corpus,
    const std::vector<std::vector<int>>& valid_corpus,
    const PretrainConfig& cfg) {
  if (train_corpus.empty())
    throw std::invalid_argument("pretrain_base: empty corpus");
  Rng rng(cfg.seed);
  m.set_trainable(true);
  train::AdamConfig<T> acfg;
  acfg.lr = T(cfg.learning_rate);
  acfg.clip_norm = T(cfg.clip_norm);
  train::Adam<T> opt(m.params(), acfg);

  std::vector<size_t> order(train_corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<PretrainEpochLog> logs;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    size_t n_batches = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(),
                            start + static_cast<size_t>(cfg.batch_size));
      opt.zero_grad();
      double batch_loss = 0;
      size_t counted = 0;
      for (size_t k = start; k < end; ++k) {
        const auto& ids = train_corpus[order[k]];
        if (ids.size() < 2) continue;
        ad::Tape<T> tape;
        ad::Var E = tape.gather_rows(tape.param(m.token_emb), ids);
        ad::Var logits = lm_logits_all(tape, m, E);
        std::vector<int> targets(ids.size(), -1);
        for (size_t i = 0; i + 1 < ids.size(); ++i) targets[i] = ids[i + 1];
        ad::Var loss = tape.cross_entropy_rows(logits, targets);
        batch_loss += static_cast<double>(tape.value(loss)(0, 0));
        tape.backward(loss);
        ++counted;
      }
      if (counted == 0) continue;
      if (!std::isfinite(batch_loss))
        throw NumericError("pretrain_base: non-finite loss");
      for (auto* p : opt.params())
        if (p->grad.size() > 0) p->grad /= T(counted);
      opt.step();
      epoch_loss += batch_loss / static_cast<double>(counted);
      ++n_batches;
    }
    PretrainEpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(n_batches);
    log.valid_perplexity =
        valid_corpus.empty() ? 0 : corpus_perplexity(m, valid_corpus);
    logs.push_back(log);
  }
  m.set_trainable(false);  // frozen from here on
  return logs;
}

}  // namespace collabrec::lm
