#pragma once

#include "collabrec/bridge.hpp"
#include "collabrec/eval.hpp"
#include "collabrec/lm.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace collabrec::eval {

// Everything needed to score samples: which prompt variant to assemble and
// which injection path (backbone + mapping, or the ID-token table) to use.
template <class T>
struct ModelBundle {
  lm::TransformerLM<T>* model = nullptr;
  lm::LoraAdapter<T>* lora = nullptr;           // optional
  collab::GraphModel<T>* backbone = nullptr;    // Full variant, mapping path
  bridge::MappingMlp<T>* mapping = nullptr;
  bridge::IdTokenTable<T>* idtable = nullptr;   // Full variant, ablation path
  bridge::PromptVariant variant = bridge::PromptVariant::TextOnly;
  const data::WarmColdTags* tags = nullptr;     // cold -> mean embedding
};

template <class T>
double score_sample(const ModelBundle<T>& b, const bridge::TokenizedPrompt& tp) {
  MatT<T> E;
  if (b.variant == bridge::PromptVariant::TextOnly) {
    E = lm::embed_tokens(*b.model, tp.ids);
  } else if (b.idtable) {
    E = bridge::assemble_personalized(tp, *b.model, *b.idtable).E;
  } else {
    if (!b.backbone || !b.mapping)
      throw std::invalid_argument("score_sample: Full variant needs backbone+mapping");
    b.backbone->refresh();
    E = bridge::assemble(tp, *b.model, b.backbone->propagated_user(),
                         b.backbone->propagated_item(), *b.mapping, b.tags)
            .E;
  }
  MatT<T> logits = lm::forward_logits(*b.model, E, b.lora);
  return static_cast<double>(lm::score_yes(logits));
}

// Batched scoring; output order matches input order. Batch size only
// shapes the work loop (per-sample forwards are independent).
template <class T>
ScoredSet score_model(const ModelBundle<T>& b,
                      std::span<const bridge::TokenizedPrompt> prompts,
                      std::span<const data::Sample> samples,
                      int batch_size = 32) {
  if (prompts.size() != samples.size())
    throw std::invalid_argument("score_model: prompt/sample count mismatch");
  ScoredSet out;
  for (size_t start = 0; start < prompts.size();
       start += static_cast<size_t>(batch_size)) {
    size_t end = std::min(prompts.size(), start + static_cast<size_t>(batch_size));
    for (size_t i = start; i < end; ++i) {
      try {
        out.push(samples[i].user, samples[i].target_item,
                 score_sample(b, prompts[i]), samples[i].label);
      } catch (const std::exception& e) {
        throw std::runtime_error("score_model: sample " + std::to_string(i) +
                                 ": " + e.what());
      }
    }
  }
  return out;
}

template <class T>
ScoredSet score_model(const ModelBundle<T>& b, const lm::Tokenizer& tok,
                      const data::Catalog& catalog,
                      std::span<const data::Sample> samples,
                      int batch_size = 32) {
  std::vector<bridge::TokenizedPrompt> prompts;
  prompts.reserve(samples.size());
  for (const auto& s : samples)
    prompts.push_back(
        bridge::tokenize_prompt(tok, s, catalog, b.variant, b.model->cfg.max_len));
  return score_model(b, prompts, samples, batch_size);
}

}  // namespace collabrec::eval
