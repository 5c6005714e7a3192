#pragma once

#include "collabrec/data.hpp"
#include "collabrec/tokenizer.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace collabrec::bridge {

enum class PromptVariant { Full, TextOnly };

// The prompt template is a versioned resource: prompt bytes for a given
// (sample, catalog, variant, version) are stable across builds.
inline constexpr std::string_view kPromptTemplateVersion = "v1";

std::string_view prompt_template(PromptVariant variant);

// Instantiate the template. <HisItemTitleList> becomes a comma-separated
// title list in timestamp order (empty history renders as an empty list);
// ID placeholders stay as the single reserved tokens.
std::string build_prompt(const data::Sample& sample, const data::Catalog& catalog,
                         PromptVariant variant);

struct TokenizedPrompt {
  std::vector<int> ids;
  std::optional<int> uid_pos;  // present iff Full variant
  std::optional<int> iid_pos;
  UserIdx user = 0;
  ItemIdx item = 0;
};

TokenizedPrompt tokenize_prompt(const lm::Tokenizer& tok,
                                const data::Sample& sample,
                                const data::Catalog& catalog,
                                PromptVariant variant, int max_len);

}  // namespace collabrec::bridge
