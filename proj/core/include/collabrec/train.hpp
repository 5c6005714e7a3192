#pragma once

// The two-step tuning strategy and its ablations. Each stage declares its
// trainable parameter set; everything else is frozen by construction (the
// tape never writes gradients into non-trainable parameters, the optimizer
// never updates them).

#include "collabrec/bridge.hpp"
#include "collabrec/optimizer.hpp"
#include "collabrec/scorer.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace collabrec::train {

enum class TuneStage {
  Step1_Lora,         // trainable: LoRA only, TextOnly prompts
  Step2_MappingOnly,  // trainable: mapping only, Full prompts
  Step2_FromScratch,  // trainable: mapping + backbone (both fresh), Full
  Joint_Ablation,     // trainable: LoRA + mapping + backbone, Full
  Personalized,       // trainable: LoRA + ID-token table, Full
};

std::string to_string(TuneStage s);
TuneStage tune_stage_from_string(const std::string& s);

struct TrainRunConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;  // decoupled, trainable set only
  int epochs = 20;
  int batch_size = 32;
  uint64_t seed = 1;
  int patience = 5;  // early stop on validation AUC
  double clip_norm = 1.0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double valid_auc = 0;
  double valid_uauc = 0;
};

struct TuneResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_valid_auc = 0;
};

// Index of the maximal validation AUC; ties break to the earliest epoch.
inline size_t select_best(const std::vector<double>& valid_aucs) {
  if (valid_aucs.empty()) throw std::invalid_argument("select_best: empty");
  size_t best = 0;
  for (size_t i = 1; i < valid_aucs.size(); ++i)
    if (valid_aucs[i] > valid_aucs[best]) best = i;
  return best;
}

struct TuneData {
  const lm::Tokenizer* tokenizer = nullptr;
  const data::Catalog* catalog = nullptr;
  std::vector<data::Sample> train, valid;
};

namespace detail {

struct PreparedSplit {
  std::vector<bridge::TokenizedPrompt> prompts;
  std::vector<int> labels;
};

inline PreparedSplit prepare(const TuneData& d,
                         const std::vector<data::Sample>& samples,
                         bridge::PromptVariant variant, int max_len) {
  PreparedSplit out;
  out.prompts.reserve(samples.size());
  for (const auto& s : samples) {
    out.prompts.push_back(
        bridge::tokenize_prompt(*d.tokenizer, s, *d.catalog, variant, max_len));
    out.labels.push_back(s.label);
  }
  return out;
}

// Shared mini-batch loop: per-sample tape forward/backward, Adam over the
// declared trainable set, epoch-end validation scoring, and best-epoch
// checkpoint selection (ties -> earliest).
template <class T>
TuneResult run_tuning(lm::TransformerLM<T>& model, lm::LoraAdapter<T>* lora,
                      collab::GraphModel<T>* backbone,
                      bridge::MappingMlp<T>* mapping,
                      bridge::IdTokenTable<T>* idtable,
                      bridge::PromptVariant variant, const TuneData& d,
                      const TrainRunConfig& cfg,
                      std::vector<ad::Param<T>*> trainable) {
  if (d.train.empty()) throw std::invalid_argument("run_tuning: no train data");
  Rng rng(cfg.seed);

  auto train_set = prepare(d, d.train, variant, model.cfg.max_len);
  auto valid_set = prepare(d, d.valid, variant, model.cfg.max_len);

  AdamConfig<T> acfg;
  acfg.lr = T(cfg.learning_rate);
  acfg.weight_decay = T(cfg.weight_decay);
  acfg.clip_norm = T(cfg.clip_norm);
  Adam<T> opt(trainable, acfg);

  const bool backbone_live =
      backbone && (backbone->base.user_emb.trainable ||
                   backbone->base.item_emb.trainable);

  eval::ModelBundle<T> bundle;
  bundle.model = &model;
  bundle.lora = lora;
  bundle.backbone = backbone;
  bundle.mapping = mapping;
  bundle.idtable = idtable;
  bundle.variant = variant;

  std::vector<size_t> order(train_set.prompts.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  TuneResult out;
  std::vector<MatT<T>> best_values;
  std::vector<double> aucs;
  int since_best = 0;

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
      for (size_t k = start; k < end; ++k) {
        const auto& tp = train_set.prompts[order[k]];
        ad::Tape<T> tape;
        ad::Var E;
        if (variant == bridge::PromptVariant::TextOnly) {
          E = tape.gather_rows(tape.param(model.token_emb), tp.ids);
        } else if (idtable) {
          E = bridge::assemble_personalized_tape(tape, tp, model, *idtable);
        } else {
          bridge::BackboneSource<T> source(*backbone);
          E = bridge::assemble_tape(tape, tp, model, &source, mapping);
        }
        ad::Var logits = lm::lm_logits_last(tape, model, E, lora);
        ad::Var prob = tape.yes_prob(logits, lm::Tokenizer::kYes,
                                     lm::Tokenizer::kNo);
        ad::Var loss = tape.bce(prob, train_set.labels[order[k]]);
        batch_loss += static_cast<double>(tape.value(loss)(0, 0));
        tape.backward(loss);
      }
      const size_t bsz = end - start;
      if (!std::isfinite(batch_loss))
        throw NumericError("run_tuning: non-finite loss");
      for (auto* p : trainable)
        if (p->grad.size() > 0) p->grad /= T(bsz);
      opt.step();
      if (backbone_live) backbone->invalidate();
      epoch_loss += batch_loss / static_cast<double>(bsz);
      ++n_batches;
    }

    double vauc = 0.5, vuauc = 0.5;
    if (!valid_set.prompts.empty()) {
      auto scored =
          eval::score_model(bundle, std::span<const bridge::TokenizedPrompt>(
                                        valid_set.prompts),
                            std::span<const data::Sample>(d.valid),
                            cfg.batch_size);
      auto rep = eval::stratum_report(scored);
      vauc = rep.auc.value_or(0.5);
      vuauc = rep.uauc.value_or(0.5);
    }
    out.log.push_back(
        {epoch, epoch_loss / static_cast<double>(n_batches), vauc, vuauc});
    aucs.push_back(vauc);

    size_t best = select_best(aucs);
    if (best + 1 == static_cast<size_t>(epoch)) {
      best_values.clear();
      for (auto* p : trainable) best_values.push_back(p->value);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  size_t best = select_best(aucs);
  out.best_epoch = static_cast<int>(best) + 1;
  out.best_valid_auc = aucs[best];
  for (size_t i = 0; i < trainable.size(); ++i)
    trainable[i]->value = best_values[i];
  if (backbone_live) backbone->invalidate();
  return out;
}

}  // namespace detail

// Step 1: tune the LoRA adapters on text-only prompts. The base model is
// frozen throughout.
template <class T>
TuneResult run_step1(lm::TransformerLM<T>& model, lm::LoraAdapter<T>& lora,
                     const TuneData& d, const TrainRunConfig& cfg) {
  model.set_trainable(false);
  lora.set_trainable(true);
  return detail::run_tuning<T>(model, &lora, nullptr, nullptr, nullptr,
                               bridge::PromptVariant::TextOnly, d, cfg,
                               lora.params());
}

enum class Step2Mode { MappingOnly, FromScratch };

// Step 2: tune the collaborative module on full prompts with the base
// model and LoRA frozen. MappingOnly trains the mapping over a well-trained
// frozen backbone; FromScratch trains mapping and backbone together (the
// caller passes a freshly initialized backbone).
template <class T>
TuneResult run_step2(lm::TransformerLM<T>& model, lm::LoraAdapter<T>& lora,
                     collab::GraphModel<T>& backbone,
                     bridge::MappingMlp<T>& mapping, const TuneData& d,
                     Step2Mode mode, const TrainRunConfig& cfg) {
  model.set_trainable(false);
  lora.set_trainable(false);
  mapping.set_trainable(true);
  bool train_backbone = mode == Step2Mode::FromScratch;
  backbone.base.user_emb.trainable = train_backbone;
  backbone.base.item_emb.trainable = train_backbone;

  std::vector<ad::Param<T>*> trainable = mapping.params();
  if (train_backbone) {
    trainable.push_back(&backbone.base.user_emb);
    trainable.push_back(&backbone.base.item_emb);
  }
  return detail::run_tuning<T>(model, &lora, &backbone, &mapping, nullptr,
                               bridge::PromptVariant::Full, d, cfg, trainable);
}

// Joint ablation: single-phase tuning of LoRA, mapping, and backbone on
// full prompts (no text-only curriculum).
template <class T>
TuneResult run_joint(lm::TransformerLM<T>& model, lm::LoraAdapter<T>& lora,
                     collab::GraphModel<T>& backbone,
                     bridge::MappingMlp<T>& mapping, const TuneData& d,
                     const TrainRunConfig& cfg) {
  model.set_trainable(false);
  lora.set_trainable(true);
  mapping.set_trainable(true);
  backbone.base.user_emb.trainable = true;
  backbone.base.item_emb.trainable = true;

  std::vector<ad::Param<T>*> trainable = lora.params();
  for (auto* p : mapping.params()) trainable.push_back(p);
  trainable.push_back(&backbone.base.user_emb);
  trainable.push_back(&backbone.base.item_emb);
  return detail::run_tuning<T>(model, &lora, &backbone, &mapping, nullptr,
                               bridge::PromptVariant::Full, d, cfg, trainable);
}

// Personalized-prompt ablation: LoRA plus directly learnable per-entity
// ID tokens, no backbone and no mapping, tuned jointly on full prompts.
template <class T>
TuneResult run_personalized(lm::TransformerLM<T>& model,
                            lm::LoraAdapter<T>& lora,
                            bridge::IdTokenTable<T>& idtable,
                            const TuneData& d, const TrainRunConfig& cfg) {
  model.set_trainable(false);
  lora.set_trainable(true);
  idtable.set_trainable(true);

  std::vector<ad::Param<T>*> trainable = lora.params();
  for (auto* p : idtable.params()) trainable.push_back(p);
  return detail::run_tuning<T>(model, &lora, nullptr, nullptr, &idtable,
                               bridge::PromptVariant::Full, d, cfg, trainable);
}

// Standalone BCE with boundary clamping at 1e-12.
inline double bce_loss(double p, int y) {
  double pc = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
  return y ? -std::log(pc) : -std::log(1.0 - pc);
}

}  // namespace collabrec::train
