#include "collabrec/prompt.hpp"

#include <stdexcept>

namespace collabrec::bridge {

namespace {

// Template resource, version v1. The Full variant carries the two ID-feature
// clauses; TextOnly is the same template with them removed verbatim.
constexpr std::string_view kFullTemplate =
    "#Question: A user has given high ratings to the following items: "
    "<HisItemTitleList>. Additionally, we have information about the user's "
    "preferences encoded in the feature <UserID>. Using all available "
    "information, make a prediction about whether the user would enjoy the "
    "item titled <TargetItemTitle> with the feature <TargetItemID>? Answer "
    "with \"Yes\" or \"No\". #Answer:";

constexpr std::string_view kTextOnlyTemplate =
    "#Question: A user has given high ratings to the following items: "
    "<HisItemTitleList>. Using all available "
    "information, make a prediction about whether the user would enjoy the "
    "item titled <TargetItemTitle>? Answer "
    "with \"Yes\" or \"No\". #Answer:";

void replace_once(std::string& s, std::string_view field,
                  const std::string& value) {
  size_t pos = s.find(field);
  if (pos == std::string::npos)
    throw std::logic_error("template field missing: " + std::string(field));
  s.replace(pos, field.size(), value);
}

}  // namespace

std::string_view prompt_template(PromptVariant variant) {
  return variant == PromptVariant::Full ? kFullTemplate : kTextOnlyTemplate;
}

std::string build_prompt(const data::Sample& sample, const data::Catalog& catalog,
                         PromptVariant variant) {
  if (sample.target_item < 0 || sample.target_item >= catalog.n_items())
    throw std::out_of_range("build_prompt: target item");
  std::string titles;
  for (size_t k = 0; k < sample.history.size(); ++k) {
    ItemIdx it = sample.history[k];
    if (it < 0 || it >= catalog.n_items())
      throw std::out_of_range("build_prompt: history item");
    if (k) titles += ", ";
    titles += catalog.item_titles[it];
  }
  std::string prompt(prompt_template(variant));
  replace_once(prompt, "<HisItemTitleList>", titles);
  replace_once(prompt, "<TargetItemTitle>",
               catalog.item_titles[sample.target_item]);
  return prompt;
}

TokenizedPrompt tokenize_prompt(const lm::Tokenizer& tok,
                                const data::Sample& sample,
                                const data::Catalog& catalog,
                                PromptVariant variant, int max_len) {
  TokenizedPrompt tp;
  tp.user = sample.user;
  tp.item = sample.target_item;
  tp.ids = tok.encode(build_prompt(sample, catalog, variant));
  if (static_cast<int>(tp.ids.size()) > max_len)
    throw std::length_error("prompt exceeds max_len (" +
                            std::to_string(tp.ids.size()) + " > " +
                            std::to_string(max_len) + ")");
  for (size_t i = 0; i < tp.ids.size(); ++i) {
    if (tp.ids[i] == lm::Tokenizer::kUid) {
      if (tp.uid_pos)
        throw std::logic_error("duplicate <UserID> placeholder");
      tp.uid_pos = static_cast<int>(i);
    } else if (tp.ids[i] == lm::Tokenizer::kIid) {
      if (tp.iid_pos)
        throw std::logic_error("duplicate <TargetItemID> placeholder");
      tp.iid_pos = static_cast<int>(i);
    }
  }
  if (variant == PromptVariant::Full && (!tp.uid_pos || !tp.iid_pos))
    throw std::logic_error("Full prompt lost an ID placeholder");
  if (variant == PromptVariant::TextOnly && (tp.uid_pos || tp.iid_pos))
    throw std::logic_error("TextOnly prompt contains an ID placeholder");
  return tp;
}

}  // namespace collabrec::bridge
