// Acceptance suite: ten end-to-end checks covering gradients, exactness
// invariants, metric oracles, and the directional claims of the method.
// Each criterion prints a single PASS/FAIL line; the process exits 0 only
// if every executed criterion passes.
//
// Usage: acceptance [criterion-number ...]   (default: run all ten)

#include "collabrec/checkpoint.hpp"
#include "collabrec/scorer.hpp"
#include "collabrec/synth.hpp"
#include "collabrec/train.hpp"

#include "test_util.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace collabrec;
using Real = float;
namespace fs = std::filesystem;

namespace {

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

double median3(double a, double b, double c) {
  std::vector<double> v = {a, b, c};
  std::sort(v.begin(), v.end());
  return v[1];
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Shared LM pipeline used by criteria 6-9: synthetic data, MF backbone,
// tokenizer over the train prompts, pretrained toy LM, tuning data.
// ---------------------------------------------------------------------------

struct PipeCfg {
  int n_users = 16, n_items = 64, n_events = 800;
  data::SignalMode mode = data::SignalMode::Collaborative;
  double temperature = 5.0, user_mean = 1.0, text_bonus = 1.0;
  double cold_fraction = 0.0;
  int d2 = 8;
  double collab_lr = 0.05;
  int collab_epochs = 40;
  int pretrain_epochs = 2;
  double pretrain_lr = 1e-3;
  int lora_rank = 8;
  double lora_alpha = 16;
};

struct Pipe {
  data::SynthResult gen;
  data::SplitSamples samples;
  collab::CollabTrainResult<Real> mf;
  lm::Tokenizer tok;
  lm::LmConfig lc;
  lm::TransformerLM<Real> model;
  lm::LoraConfig lora_cfg;
  train::TuneData td;
};

std::unique_ptr<Pipe> build_pipeline(const PipeCfg& cfg, uint64_t seed) {
  auto p = std::make_unique<Pipe>();

  data::SynthConfig sc;
  sc.n_users = cfg.n_users;
  sc.n_items = cfg.n_items;
  sc.latent_rank = 4;
  sc.signal_mode = cfg.mode;
  sc.noise_temperature = cfg.temperature;
  sc.seed = seed;
  sc.n_events = cfg.n_events;
  sc.cold_item_fraction = cfg.cold_fraction;
  sc.user_factor_mean = cfg.user_mean;
  sc.text_bonus = cfg.text_bonus;
  p->gen = data::synth_generate(sc);
  p->samples = data::build_samples(p->gen.split, p->gen.catalog);

  collab::CollabTrainConfig cc;
  cc.d2 = cfg.d2;
  cc.learning_rate = cfg.collab_lr;
  cc.epochs = cfg.collab_epochs;
  cc.batch_size = 64;
  cc.seed = stage_seed(seed, "collab");
  p->mf = collab::train_backbone<Real>(p->gen.split, cfg.n_users, cfg.n_items,
                                       cc);

  std::vector<std::string> corpus;
  for (const auto& s : p->samples.train)
    corpus.push_back(bridge::build_prompt(s, p->gen.catalog,
                                          bridge::PromptVariant::TextOnly));
  auto tok_corpus = corpus;
  tok_corpus.push_back(bridge::build_prompt(p->samples.train.front(),
                                            p->gen.catalog,
                                            bridge::PromptVariant::Full));
  p->tok = lm::Tokenizer::build(tok_corpus);

  p->lc.d1 = 64;
  p->lc.n_layers = 2;
  p->lc.n_heads = 4;
  p->lc.max_len = 160;
  p->lc.vocab_size = p->tok.vocab_size();
  Rng rng(stage_seed(seed, "lm-init"));
  p->model = lm::TransformerLM<Real>::init(p->lc, rng);

  std::vector<std::vector<int>> pretrain_corpus;
  for (size_t i = 0; i < p->samples.train.size(); ++i) {
    auto ids = p->tok.encode(corpus[i]);
    ids.push_back(p->samples.train[i].label ? lm::Tokenizer::kYes
                                            : lm::Tokenizer::kNo);
    pretrain_corpus.push_back(std::move(ids));
  }
  lm::PretrainConfig pc;
  pc.epochs = cfg.pretrain_epochs;
  pc.learning_rate = cfg.pretrain_lr;
  pc.seed = stage_seed(seed, "pretrain");
  lm::pretrain_base(p->model, pretrain_corpus, {}, pc);

  p->lora_cfg.rank = cfg.lora_rank;
  p->lora_cfg.alpha = cfg.lora_alpha;

  p->td.tokenizer = &p->tok;
  p->td.catalog = &p->gen.catalog;
  p->td.train = p->samples.train;
  p->td.valid = p->samples.valid;
  return p;
}

double test_auc(Pipe& p, eval::ModelBundle<Real>& b) {
  auto scored =
      eval::score_model(b, p.tok, p.gen.catalog,
                        std::span<const data::Sample>(p.samples.test));
  return eval::stratum_report(scored).auc.value_or(-1);
}

double test_uauc(Pipe& p, eval::ModelBundle<Real>& b) {
  auto scored =
      eval::score_model(b, p.tok, p.gen.catalog,
                        std::span<const data::Sample>(p.samples.test));
  return eval::stratum_report(scored).uauc.value_or(-1);
}

// ---------------------------------------------------------------------------
// 1. Gradient suite (double precision, central differences).
// ---------------------------------------------------------------------------

Outcome criterion1() {
  auto t0 = std::chrono::steady_clock::now();
  using D = double;
  const double kTol = 1e-3;
  const double kEps = 1e-4;
  double worst = 0;
  int checked = 0;

  // Micro LM + LoRA + mapping + backbone, all trainable, loss through the
  // Full-variant hybrid assembly so every tensor is on the gradient path.
  lm::LmConfig lc;
  lc.d1 = 8;
  lc.n_layers = 2;
  lc.n_heads = 2;
  lc.max_len = 12;
  lc.vocab_size = 12;
  Rng rng(7);
  auto model = lm::TransformerLM<D>::init(lc, rng, D(0.2));
  lm::LoraConfig lcfg;
  lcfg.rank = 2;
  lcfg.alpha = 4;
  auto lora = lm::LoraAdapter<D>::init(lc, lcfg, rng, D(0.2));
  // give LoRA B nonzero values so its gradient path is exercised
  for (auto* p : lora.params()) p->value = gaussian_matrix<D>(rng, p->value.rows(), p->value.cols(), D(0.2));
  auto mapping = bridge::MappingMlp<D>::init(4, lc.d1, rng, 8, D(0.2));

  const int nu = 4, ni = 5;
  std::vector<data::Interaction> train_edges;
  Rng erng(11);
  for (int k = 0; k < 10; ++k) {
    data::Interaction it;
    it.user = static_cast<int>(erng() % nu);
    it.item = static_cast<int>(erng() % ni);
    it.label = static_cast<int>(erng() % 2);
    train_edges.push_back(it);
  }

  bridge::TokenizedPrompt tp;
  tp.ids = {6, 7, lm::Tokenizer::kUid, 8, 9, lm::Tokenizer::kIid, 10, 11};
  tp.uid_pos = 2;
  tp.iid_pos = 5;
  tp.user = 1;
  tp.item = 3;

  auto check_case = [&](collab::GraphModel<D>* backbone,
                        bridge::IdTokenTable<D>* idtable, int label) {
    model.set_trainable(true);
    lora.set_trainable(true);
    mapping.set_trainable(true);
    std::vector<ad::Param<D>*> params = model.params();
    for (auto* p : lora.params()) params.push_back(p);
    if (backbone) {
      backbone->base.user_emb.trainable = true;
      backbone->base.item_emb.trainable = true;
      for (auto* p : mapping.params()) params.push_back(p);
      params.push_back(&backbone->base.user_emb);
      params.push_back(&backbone->base.item_emb);
    }
    if (idtable) {
      idtable->set_trainable(true);
      for (auto* p : idtable->params()) params.push_back(p);
    }

    auto loss_fwd = [&]() {
      ad::Tape<D> tape;
      ad::Var E;
      if (idtable) {
        E = bridge::assemble_personalized_tape(tape, tp, model, *idtable);
      } else {
        bridge::BackboneSource<D> src(*backbone);
        E = bridge::assemble_tape(tape, tp, model, &src, &mapping);
      }
      ad::Var logits = lm::lm_logits_last(tape, model, E, &lora);
      ad::Var prob =
          tape.yes_prob(logits, lm::Tokenizer::kYes, lm::Tokenizer::kNo);
      return static_cast<double>(tape.value(tape.bce(prob, label))(0, 0));
    };
    auto backward = [&]() {
      ad::Tape<D> tape;
      ad::Var E;
      if (idtable) {
        E = bridge::assemble_personalized_tape(tape, tp, model, *idtable);
      } else {
        bridge::BackboneSource<D> src(*backbone);
        E = bridge::assemble_tape(tape, tp, model, &src, &mapping);
      }
      ad::Var logits = lm::lm_logits_last(tape, model, E, &lora);
      ad::Var prob =
          tape.yes_prob(logits, lm::Tokenizer::kYes, lm::Tokenizer::kNo);
      tape.backward(tape.bce(prob, label));
      if (backbone) backbone->invalidate();
    };
    auto res = testutil::fd_gradcheck(params, loss_fwd, backward, kEps);
    worst = std::max(worst, res.max_rel_err);
    checked += res.n_checked;
  };

  // MF path (identity propagation).
  collab::GraphModel<D> mf;
  mf.base = collab::FactorModel<D>::init(nu, ni, 4, rng, D(0.3));
  mf.n_layers = 0;
  check_case(&mf, nullptr, 1);

  // LightGCN path (one propagation layer through the train graph).
  collab::GraphModel<D> gcn;
  gcn.base = collab::FactorModel<D>::init(nu, ni, 4, rng, D(0.3));
  gcn.graph = collab::BipartiteGraph<D>::from_train(train_edges, nu, ni);
  gcn.n_layers = 1;
  check_case(&gcn, nullptr, 0);

  // Personalized-prompt path (IdTokenTable rows).
  auto idtable = bridge::IdTokenTable<D>::init(nu, ni, lc.d1, rng, D(0.2));
  check_case(nullptr, &idtable, 1);

  double secs = elapsed_s(t0);
  std::ostringstream os;
  os << "max rel err " << worst << " over " << checked
     << " coords (tol " << kTol << "), " << secs << "s";
  return {worst < kTol && secs < 120.0, os.str()};
}

// ---------------------------------------------------------------------------
// 2. LoRA identity at B = 0.
// ---------------------------------------------------------------------------

Outcome criterion2() {
  lm::LmConfig lc;
  lc.d1 = 32;
  lc.n_layers = 2;
  lc.n_heads = 4;
  lc.max_len = 40;
  lc.vocab_size = 50;
  Rng rng(21);
  auto model = lm::TransformerLM<Real>::init(lc, rng);
  auto lora = lm::LoraAdapter<Real>::init(lc, {}, rng);  // B zero by design

  double max_diff = 0;
  Rng srng(22);
  for (int t = 0; t < 100; ++t) {
    int len = 3 + static_cast<int>(srng() % 30);
    std::vector<int> ids(len);
    for (auto& id : ids) id = static_cast<int>(srng() % lc.vocab_size);
    MatT<Real> E = lm::embed_tokens(model, ids);
    MatT<Real> base =
        lm::forward_logits(model, E, static_cast<lm::LoraAdapter<Real>*>(nullptr));
    MatT<Real> adapted = lm::forward_logits(model, E, &lora);
    max_diff = std::max(
        max_diff,
        static_cast<double>((base - adapted).cwiseAbs().maxCoeff()));
  }
  std::ostringstream os;
  os << "max |adapted - base| logit diff " << max_diff << " over 100 sequences";
  return {max_diff < 1e-10, os.str()};
}

// ---------------------------------------------------------------------------
// 3. Splice exactness + Step-1 insensitivity to (phi, psi).
// ---------------------------------------------------------------------------

Outcome criterion3() {
  data::SynthConfig sc;
  sc.n_users = 20;
  sc.n_items = 60;
  sc.n_events = 600;
  sc.seed = 31;
  auto gen = data::synth_generate(sc);
  auto samples = data::build_samples(gen.split, gen.catalog);

  std::vector<std::string> corpus;
  for (const auto& s : samples.train)
    corpus.push_back(
        bridge::build_prompt(s, gen.catalog, bridge::PromptVariant::Full));
  auto tok = lm::Tokenizer::build(corpus);

  lm::LmConfig lc;
  lc.d1 = 32;
  lc.n_layers = 2;
  lc.n_heads = 4;
  lc.max_len = 160;
  lc.vocab_size = tok.vocab_size();
  Rng rng(32);
  auto model = lm::TransformerLM<Real>::init(lc, rng);
  auto lora = lm::LoraAdapter<Real>::init(lc, {}, rng);
  auto mf = collab::FactorModel<Real>::init(20, 60, 8, rng, Real(0.5));
  auto mapping = bridge::MappingMlp<Real>::init(8, lc.d1, rng);

  // 100 random Full-variant samples: spliced rows bit-exact.
  std::vector<data::Sample> all = samples.train;
  all.insert(all.end(), samples.test.begin(), samples.test.end());
  Rng pick(33);
  int bad_rows = 0;
  for (int t = 0; t < 100; ++t) {
    const auto& s = all[pick() % all.size()];
    auto tp = bridge::tokenize_prompt(tok, s, gen.catalog,
                                      bridge::PromptVariant::Full, lc.max_len);
    auto hyb = bridge::assemble(tp, model, mf.user_emb.value,
                                mf.item_emb.value, mapping);
    for (int r = 0; r < static_cast<int>(tp.ids.size()); ++r) {
      MatT<Real> expect;
      if (r == *tp.uid_pos)
        expect = bridge::map_collab(
            mapping, MatT<Real>(mf.user_emb.value.row(tp.user)));
      else if (r == *tp.iid_pos)
        expect = bridge::map_collab(
            mapping, MatT<Real>(mf.item_emb.value.row(tp.item)));
      else
        expect = model.token_emb.value.row(tp.ids[r]);
      if (std::memcmp(hyb.E.row(r).data(), expect.data(),
                      sizeof(Real) * lc.d1) != 0)
        ++bad_rows;
    }
  }

  // Step-1 loss on TextOnly prompts: exactly invariant to (phi, psi).
  auto step1_loss = [&]() {
    double total = 0;
    for (size_t i = 0; i < 30 && i < samples.train.size(); ++i) {
      auto tp = bridge::tokenize_prompt(tok, samples.train[i], gen.catalog,
                                        bridge::PromptVariant::TextOnly,
                                        lc.max_len);
      MatT<Real> E = lm::embed_tokens(model, tp.ids);
      double p = lm::score_yes(lm::forward_logits(model, E, &lora));
      total += train::bce_loss(p, samples.train[i].label);
    }
    return total;
  };
  double before = step1_loss();
  Rng scramble(34);
  for (auto* p : mapping.params())
    p->value = gaussian_matrix<Real>(scramble, p->value.rows(),
                                     p->value.cols(), Real(3));
  mf.user_emb.value =
      gaussian_matrix<Real>(scramble, 20, 8, Real(3));
  mf.item_emb.value =
      gaussian_matrix<Real>(scramble, 60, 8, Real(3));
  double after = step1_loss();

  std::ostringstream os;
  os << bad_rows << " mismatched rows / 100 samples; step-1 loss delta "
     << std::abs(before - after);
  return {bad_rows == 0 && before == after, os.str()};
}

// ---------------------------------------------------------------------------
// 4. Metric oracle: fast AUC / UAUC vs O(n^2) brute force.
// ---------------------------------------------------------------------------

double brute_uauc(const eval::ScoredSet& set, int* counted) {
  std::set<UserIdx> users(set.users.begin(), set.users.end());
  double total = 0;
  int n = 0;
  for (auto u : users) {
    std::vector<double> s;
    std::vector<int> y;
    for (size_t i = 0; i < set.size(); ++i)
      if (set.users[i] == u) {
        s.push_back(set.scores[i]);
        y.push_back(set.labels[i]);
      }
    bool has0 = false, has1 = false;
    for (int v : y) (v ? has1 : has0) = true;
    if (!has0 || !has1) continue;
    total += testutil::brute_force_auc(s, y);
    ++n;
  }
  *counted = n;
  return n ? total / n : -1;
}

Outcome criterion4() {
  Rng rng(41);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double max_diff = 0;
  int single_class_ok = 0, single_class_total = 0;

  for (int t = 0; t < 1000; ++t) {
    int n = 1 + static_cast<int>(rng() % 60);
    bool tie_heavy = t % 3 == 0;
    bool force_single = t % 17 == 0;
    double p_pos = 0.05 + 0.9 * unif(rng);
    eval::ScoredSet set;
    for (int i = 0; i < n; ++i) {
      double score = tie_heavy ? std::floor(unif(rng) * 3) / 2.0 : unif(rng);
      int label = force_single ? (t % 2) : (unif(rng) < p_pos ? 1 : 0);
      set.push(static_cast<UserIdx>(rng() % 8), 0, score, label);
    }

    auto fast = eval::auc(set.scores, set.labels);
    bool has0 = false, has1 = false;
    for (int v : set.labels) (v ? has1 : has0) = true;
    if (!has0 || !has1) {
      ++single_class_total;
      if (!fast.has_value()) ++single_class_ok;
      continue;
    }
    double brute = testutil::brute_force_auc(set.scores, set.labels);
    max_diff = std::max(max_diff, std::abs(*fast - brute));

    auto fast_u = eval::uauc(set);
    int brute_n = 0;
    double brute_u = brute_uauc(set, &brute_n);
    if (brute_n == 0) {
      if (fast_u.value.has_value()) return {false, "uauc should be empty"};
    } else {
      if (!fast_u.value.has_value() || fast_u.n_users_counted != brute_n)
        return {false, "uauc user count mismatch"};
      max_diff = std::max(max_diff, std::abs(*fast_u.value - brute_u));
    }
  }

  std::ostringstream os;
  os << "max |fast - brute| " << max_diff << "; single-class skipped "
     << single_class_ok << "/" << single_class_total;
  return {max_diff < 1e-12 && single_class_ok == single_class_total, os.str()};
}

// ---------------------------------------------------------------------------
// 5. Backbone sanity at the reference scale (500 x 500, rank 4, temp 5).
// ---------------------------------------------------------------------------

data::SynthConfig reference_synth(uint64_t seed) {
  data::SynthConfig sc;
  sc.n_users = 500;
  sc.n_items = 500;
  sc.latent_rank = 4;
  sc.noise_temperature = 5.0;
  sc.seed = seed;
  sc.n_events = 25000;  // ~20k land in the train window
  sc.user_factor_mean = 1.0;
  return sc;
}

collab::CollabTrainConfig reference_backbone(uint64_t seed) {
  collab::CollabTrainConfig cc;
  cc.d2 = 4;
  cc.learning_rate = 0.05;
  cc.epochs = 80;
  cc.batch_size = 64;
  cc.seed = stage_seed(seed, "collab");
  return cc;
}

Outcome criterion5() {
  auto t0 = std::chrono::steady_clock::now();
  auto gen = data::synth_generate(reference_synth(1));
  auto mf = collab::train_backbone<Real>(gen.split, 500, 500,
                                         reference_backbone(1));

  std::vector<double> s_mf, s_bayes;
  std::vector<int> y;
  for (const auto& it : gen.split.test) {
    s_mf.push_back(mf.model.predict(it.user, it.item));
    s_bayes.push_back(gen.true_score(it.user, it.item));
    y.push_back(it.label);
  }
  double a_mf = eval::auc(s_mf, y).value_or(-1);
  double a_bayes = eval::auc(s_bayes, y).value_or(-1);
  double secs = elapsed_s(t0);

  std::ostringstream os;
  os << "train " << gen.split.train.size() << " events, MF test AUC " << a_mf
     << ", Bayes " << a_bayes << ", gap " << a_bayes - a_mf << ", " << secs
     << "s";
  return {a_mf >= 0.80 && a_bayes - a_mf <= 0.1 && secs < 180.0, os.str()};
}

// ---------------------------------------------------------------------------
// 6. Core claim: collaborative injection beats the text-only model on the
// reference collaborative data (uninformative constant titles).
// ---------------------------------------------------------------------------

Outcome criterion6() {
  std::vector<double> gains;
  std::ostringstream os;
  for (uint64_t seed : {1, 2, 3}) {
    PipeCfg cfg;
    cfg.n_users = 500;
    cfg.n_items = 500;
    cfg.n_events = 25000;
    cfg.d2 = 4;
    cfg.collab_lr = 0.05;
    cfg.collab_epochs = 80;
    cfg.pretrain_epochs = 1;
    auto p = build_pipeline(cfg, seed);

    Rng lrng(stage_seed(seed, "lora"));
    auto lora = lm::LoraAdapter<Real>::init(p->lc, p->lora_cfg, lrng);
    train::TrainRunConfig t1;
    t1.epochs = 1;
    t1.patience = 100;
    t1.seed = stage_seed(seed, "step1");
    train::run_step1(p->model, lora, p->td, t1);

    eval::ModelBundle<Real> b1;
    b1.model = &p->model;
    b1.lora = &lora;
    b1.variant = bridge::PromptVariant::TextOnly;
    double a1 = test_auc(*p, b1);

    Rng mrng(stage_seed(seed, "mapping"));
    auto mapping = bridge::MappingMlp<Real>::init(cfg.d2, p->lc.d1, mrng);
    train::TrainRunConfig t2;
    t2.learning_rate = 0.01;
    t2.weight_decay = 0;
    t2.batch_size = 32;
    t2.epochs = 1;
    t2.patience = 5;
    t2.seed = stage_seed(seed, "step2");
    train::run_step2(p->model, lora, p->mf.model, mapping, p->td,
                     train::Step2Mode::MappingOnly, t2);

    eval::ModelBundle<Real> b2;
    b2.model = &p->model;
    b2.lora = &lora;
    b2.backbone = &p->mf.model;
    b2.mapping = &mapping;
    b2.variant = bridge::PromptVariant::Full;
    double a2 = test_auc(*p, b2);

    gains.push_back(a2 - a1);
    os << "seed " << seed << ": step1 " << a1 << " -> collabrec " << a2
       << "; ";
  }
  double med = median3(gains[0], gains[1], gains[2]);
  os << "median gain " << med << " (need >= 0.05)";
  return {med >= 0.05, os.str()};
}

// ---------------------------------------------------------------------------
// 7. Text-signal non-regression on textual data.
// ---------------------------------------------------------------------------

Outcome criterion7() {
  std::vector<double> step1_aucs, drops;
  std::ostringstream os;
  for (uint64_t seed : {1, 2, 3}) {
    PipeCfg cfg;
    cfg.mode = data::SignalMode::Textual;
    cfg.pretrain_epochs = 12;
    cfg.pretrain_lr = 2e-3;
    auto p = build_pipeline(cfg, seed);

    Rng lrng(stage_seed(seed, "lora"));
    auto lora = lm::LoraAdapter<Real>::init(p->lc, p->lora_cfg, lrng);
    train::TrainRunConfig t1;
    t1.epochs = 4;
    t1.patience = 5;
    t1.seed = stage_seed(seed, "step1");
    train::run_step1(p->model, lora, p->td, t1);

    eval::ModelBundle<Real> b1;
    b1.model = &p->model;
    b1.lora = &lora;
    b1.variant = bridge::PromptVariant::TextOnly;
    double a1 = test_auc(*p, b1);

    Rng mrng(stage_seed(seed, "mapping"));
    auto mapping = bridge::MappingMlp<Real>::init(cfg.d2, p->lc.d1, mrng);
    train::TrainRunConfig t2;
    t2.learning_rate = 0.01;
    t2.weight_decay = 0;
    t2.batch_size = 32;
    t2.epochs = 12;
    t2.patience = 5;
    t2.seed = stage_seed(seed, "step2");
    train::run_step2(p->model, lora, p->mf.model, mapping, p->td,
                     train::Step2Mode::MappingOnly, t2);

    eval::ModelBundle<Real> b2;
    b2.model = &p->model;
    b2.lora = &lora;
    b2.backbone = &p->mf.model;
    b2.mapping = &mapping;
    b2.variant = bridge::PromptVariant::Full;
    double a2 = test_auc(*p, b2);

    step1_aucs.push_back(a1);
    drops.push_back(a1 - a2);
    os << "seed " << seed << ": step1 " << a1 << ", step2 " << a2 << "; ";
  }
  double med1 = median3(step1_aucs[0], step1_aucs[1], step1_aucs[2]);
  double medd = median3(drops[0], drops[1], drops[2]);
  os << "median step1 " << med1 << " (need >= 0.85), median drop " << medd
     << " (need <= 0.02)";
  return {med1 >= 0.85 && medd <= 0.02, os.str()};
}

// ---------------------------------------------------------------------------
// 8. Ablation orderings on collaborative data (UAUC, median over 3 seeds).
// ---------------------------------------------------------------------------

Outcome criterion8() {
  std::vector<double> two_step, joint, pers;
  std::ostringstream os;
  for (uint64_t seed : {1, 2, 3}) {
    PipeCfg cfg;
    cfg.n_users = 16;
    cfg.n_items = 256;
    cfg.n_events = 1200;
    cfg.user_mean = 0.5;
    cfg.lora_rank = 2;
    cfg.lora_alpha = 4;
    auto p = build_pipeline(cfg, seed);

    train::TrainRunConfig stage;
    stage.learning_rate = 0.01;
    stage.weight_decay = 0;
    stage.batch_size = 32;
    stage.epochs = 20;
    stage.patience = 5;

    // two-step (CollabRec): step1 LoRA, then mapping over the frozen MF
    Rng lrng(stage_seed(seed, "lora"));
    auto lora = lm::LoraAdapter<Real>::init(p->lc, p->lora_cfg, lrng);
    train::TrainRunConfig t1;
    t1.epochs = 2;
    t1.patience = 5;
    t1.seed = stage_seed(seed, "step1");
    train::run_step1(p->model, lora, p->td, t1);
    Rng mrng(stage_seed(seed, "mapping"));
    auto mapping = bridge::MappingMlp<Real>::init(cfg.d2, p->lc.d1, mrng);
    train::TrainRunConfig t2 = stage;
    t2.seed = stage_seed(seed, "step2");
    auto backbone2 = p->mf.model;
    train::run_step2(p->model, lora, backbone2, mapping, p->td,
                     train::Step2Mode::MappingOnly, t2);
    eval::ModelBundle<Real> bt;
    bt.model = &p->model;
    bt.lora = &lora;
    bt.backbone = &backbone2;
    bt.mapping = &mapping;
    bt.variant = bridge::PromptVariant::Full;
    two_step.push_back(test_uauc(*p, bt));

    // joint: LoRA + mapping + randomly initialized backbone, one phase
    Rng jlrng(stage_seed(seed, "lora-joint"));
    auto lora_j = lm::LoraAdapter<Real>::init(p->lc, p->lora_cfg, jlrng);
    Rng jmrng(stage_seed(seed, "mapping-joint"));
    auto mapping_j = bridge::MappingMlp<Real>::init(cfg.d2, p->lc.d1, jmrng);
    collab::GraphModel<Real> backbone_j;
    {
      Rng brng(stage_seed(seed, "backbone-joint-init"));
      backbone_j.base = collab::FactorModel<Real>::init(cfg.n_users,
                                                        cfg.n_items, cfg.d2,
                                                        brng);
      backbone_j.n_layers = 0;
    }
    train::TrainRunConfig tj = stage;
    tj.learning_rate = 0.001;
    tj.seed = stage_seed(seed, "joint");
    train::run_joint(p->model, lora_j, backbone_j, mapping_j, p->td, tj);
    eval::ModelBundle<Real> bj;
    bj.model = &p->model;
    bj.lora = &lora_j;
    bj.backbone = &backbone_j;
    bj.mapping = &mapping_j;
    bj.variant = bridge::PromptVariant::Full;
    joint.push_back(test_uauc(*p, bj));

    // personalized-prompt: LoRA + directly learnable ID tokens
    Rng plrng(stage_seed(seed, "lora-pers"));
    auto lora_p = lm::LoraAdapter<Real>::init(p->lc, p->lora_cfg, plrng);
    Rng irng(stage_seed(seed, "idtable"));
    auto idtable = bridge::IdTokenTable<Real>::init(cfg.n_users, cfg.n_items,
                                                    p->lc.d1, irng);
    train::TrainRunConfig tp = stage;
    tp.learning_rate = 0.001;
    tp.seed = stage_seed(seed, "pers");
    train::run_personalized(p->model, lora_p, idtable, p->td, tp);
    eval::ModelBundle<Real> bp;
    bp.model = &p->model;
    bp.lora = &lora_p;
    bp.idtable = &idtable;
    bp.variant = bridge::PromptVariant::Full;
    pers.push_back(test_uauc(*p, bp));

    os << "seed " << seed << ": two-step " << two_step.back() << ", joint "
       << joint.back() << ", pers " << pers.back() << "; ";
  }
  double m_two = median3(two_step[0], two_step[1], two_step[2]);
  double m_joint = median3(joint[0], joint[1], joint[2]);
  double m_pers = median3(pers[0], pers[1], pers[2]);
  os << "medians: two-step " << m_two << ", joint " << m_joint << ", pers "
     << m_pers;
  return {m_two >= m_joint && m_two >= m_pers, os.str()};
}

// ---------------------------------------------------------------------------
// 9. Warm/cold breakdown with 10% unseen test items.
// ---------------------------------------------------------------------------

Outcome criterion9() {
  std::vector<double> warm_diffs;
  std::ostringstream os;
  bool structure_ok = true;
  for (uint64_t seed : {1, 2, 3}) {
    PipeCfg cfg;
    cfg.n_users = 16;
    cfg.n_items = 256;
    cfg.n_events = 1200;
    cfg.mode = data::SignalMode::Mixed;
    cfg.temperature = 2.0;
    cfg.text_bonus = 2.0;
    cfg.cold_fraction = 0.1;
    cfg.pretrain_epochs = 12;
    cfg.pretrain_lr = 2e-3;
    auto p = build_pipeline(cfg, seed);
    auto tags = data::warm_cold_partition(p->gen.split, cfg.n_users,
                                          cfg.n_items, 1);

    eval::ScoredSet mfset;
    for (const auto& s : p->samples.test)
      mfset.push(s.user, s.target_item,
                 p->mf.model.predict(s.user, s.target_item), s.label);
    auto mfrep = eval::warm_cold_report(mfset, tags);

    Rng lrng(stage_seed(seed, "lora"));
    auto lora = lm::LoraAdapter<Real>::init(p->lc, p->lora_cfg, lrng);
    train::TrainRunConfig t1;
    t1.epochs = 4;
    t1.patience = 5;
    t1.seed = stage_seed(seed, "step1");
    train::run_step1(p->model, lora, p->td, t1);

    Rng mrng(stage_seed(seed, "mapping"));
    auto mapping = bridge::MappingMlp<Real>::init(cfg.d2, p->lc.d1, mrng);
    train::TrainRunConfig t2;
    t2.learning_rate = 0.01;
    t2.weight_decay = 0;
    t2.batch_size = 32;
    t2.epochs = 12;
    t2.patience = 5;
    t2.seed = stage_seed(seed, "step2");
    train::run_step2(p->model, lora, p->mf.model, mapping, p->td,
                     train::Step2Mode::MappingOnly, t2);

    eval::ModelBundle<Real> b;
    b.model = &p->model;
    b.lora = &lora;
    b.backbone = &p->mf.model;
    b.mapping = &mapping;
    b.variant = bridge::PromptVariant::Full;
    b.tags = &tags;
    auto scored =
        eval::score_model(b, p->tok, p->gen.catalog,
                          std::span<const data::Sample>(p->samples.test));
    auto rep = eval::warm_cold_report(scored, tags);

    bool cold_nonempty = rep.cold_item.n_samples > 0;
    bool partitions = rep.warm_item.n_samples + rep.cold_item.n_samples ==
                      static_cast<int>(p->samples.test.size());
    structure_ok = structure_ok && cold_nonempty && partitions;

    double cw = rep.warm_item.auc.value_or(-1);
    double mw = mfrep.warm_item.auc.value_or(-1);
    warm_diffs.push_back(cw - mw);
    os << "seed " << seed << ": warm/cold n " << rep.warm_item.n_samples
       << "/" << rep.cold_item.n_samples << ", collabrec warm " << cw
       << " vs mf warm " << mw << "; ";
  }
  double med = median3(warm_diffs[0], warm_diffs[1], warm_diffs[2]);
  os << "median warm-item AUC diff " << med << " (need >= 0)";
  return {structure_ok && med >= 0, os.str()};
}

// ---------------------------------------------------------------------------
// 10. Determinism & persistence.
// ---------------------------------------------------------------------------

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// One small but complete pipeline run; serializes every stage into `dir`
// and returns a printable metrics digest.
std::string pipeline_run(const fs::path& dir, uint64_t seed) {
  fs::create_directories(dir);
  PipeCfg cfg;
  cfg.n_users = 16;
  cfg.n_items = 64;
  cfg.n_events = 400;
  cfg.collab_epochs = 10;
  cfg.pretrain_epochs = 1;
  auto p = build_pipeline(cfg, seed);

  Rng lrng(stage_seed(seed, "lora"));
  auto lora = lm::LoraAdapter<Real>::init(p->lc, p->lora_cfg, lrng);
  train::TrainRunConfig t1;
  t1.epochs = 1;
  t1.patience = 5;
  t1.seed = stage_seed(seed, "step1");
  train::run_step1(p->model, lora, p->td, t1);

  Rng mrng(stage_seed(seed, "mapping"));
  auto mapping = bridge::MappingMlp<Real>::init(cfg.d2, p->lc.d1, mrng);
  train::TrainRunConfig t2;
  t2.learning_rate = 0.01;
  t2.weight_decay = 0;
  t2.epochs = 2;
  t2.patience = 5;
  t2.seed = stage_seed(seed, "step2");
  train::run_step2(p->model, lora, p->mf.model, mapping, p->td,
                   train::Step2Mode::MappingOnly, t2);

  io::TensorMap collab_t;
  io::add_params<Real>(collab_t, {&p->mf.model.base.user_emb,
                                  &p->mf.model.base.item_emb});
  io::save_checkpoint((dir / "collab.ckpt").string(), collab_t);

  io::TensorMap lm_t;
  std::vector<const ad::Param<Real>*> lm_params;
  for (auto* q : p->model.params()) lm_params.push_back(q);
  for (auto* q : lora.params()) lm_params.push_back(q);
  for (auto* q : mapping.params()) lm_params.push_back(q);
  io::add_params<Real>(lm_t, lm_params);
  io::save_checkpoint((dir / "model.ckpt").string(), lm_t);

  eval::ModelBundle<Real> b;
  b.model = &p->model;
  b.lora = &lora;
  b.backbone = &p->mf.model;
  b.mapping = &mapping;
  b.variant = bridge::PromptVariant::Full;
  auto scored =
      eval::score_model(b, p->tok, p->gen.catalog,
                        std::span<const data::Sample>(p->samples.test));
  auto rep = eval::stratum_report(scored);

  std::ostringstream metrics;
  metrics.precision(17);
  metrics << "auc=" << rep.auc.value_or(-1)
          << " uauc=" << rep.uauc.value_or(-1) << " n=" << rep.n_samples;
  return metrics.str();
}

Outcome criterion10() {
  fs::path base =
      fs::temp_directory_path() /
      ("collabrec-accept-" + std::to_string(std::random_device{}()));
  fs::create_directories(base);
  std::ostringstream os;
  bool ok = true;

  std::string m1 = pipeline_run(base / "run1", 5);
  std::string m2 = pipeline_run(base / "run2", 5);
  bool metrics_eq = m1 == m2;
  bool ckpt_eq =
      file_bytes(base / "run1" / "collab.ckpt") ==
          file_bytes(base / "run2" / "collab.ckpt") &&
      file_bytes(base / "run1" / "model.ckpt") ==
          file_bytes(base / "run2" / "model.ckpt");
  os << "re-run metrics " << (metrics_eq ? "identical" : "DIFFER")
     << ", checkpoints " << (ckpt_eq ? "bit-identical" : "DIFFER");
  ok = ok && metrics_eq && ckpt_eq;

  // byte-exact round trip
  auto loaded = io::load_checkpoint((base / "run1" / "model.ckpt").string());
  io::save_checkpoint((base / "roundtrip.ckpt").string(), loaded);
  bool rt = file_bytes(base / "run1" / "model.ckpt") ==
            file_bytes(base / "roundtrip.ckpt");
  os << "; round-trip " << (rt ? "byte-exact" : "DIFFERS");
  ok = ok && rt;

  // corruption detection: flip one payload byte
  {
    std::string bytes = file_bytes(base / "run1" / "model.ckpt");
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x5a);
    std::ofstream out(base / "corrupt.ckpt", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    bool threw = false;
    try {
      io::load_checkpoint((base / "corrupt.ckpt").string());
    } catch (const io::CheckpointError&) {
      threw = true;
    }
    os << "; corruption " << (threw ? "detected" : "MISSED");
    ok = ok && threw;
  }

  std::error_code ec;
  fs::remove_all(base, ec);
  return {ok, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::function<Outcome()>> criteria = {
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9, criterion10};
  static const char* names[] = {
      "gradient suite",         "lora identity",
      "splice exactness",       "metric oracle",
      "backbone sanity",        "core claim",
      "text non-regression",    "ablation orderings",
      "warm/cold breakdown",    "determinism & persistence"};

  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty())
    for (int i = 1; i <= 10; ++i) which.push_back(i);

  bool all_pass = true;
  for (int k : which) {
    if (k < 1 || k > 10) {
      std::fprintf(stderr, "unknown criterion %d\n", k);
      return 1;
    }
    Outcome o;
    try {
      o = criteria[static_cast<size_t>(k - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%2d] %s: %s — %s\n", k, o.pass ? "PASS" : "FAIL", names[k - 1],
                o.detail.c_str());
    std::fflush(stdout);
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
