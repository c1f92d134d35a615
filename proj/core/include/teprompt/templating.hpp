#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "teprompt/corpus.hpp"
#include "teprompt/tokenizer.hpp"

namespace teprompt {

/// Wording and length limits of the concatenated prompt. The SSC template
/// must hold one [Arg1], one [Arg2] and one [MASK] slot; the ACP template one
/// [MASK] slot.
struct TemplateConfig {
  std::size_t max_total_tokens = 150;
  std::size_t max_arg_tokens = 70;
  std::string ssc_text = "The sense between [Arg1] and [Arg2] is [MASK]";
  std::string acp_text = "The implicit connective word is [MASK]";

  /// Checks the slot structure and that the scaffolding plus one token per
  /// argument fits in max_total_tokens. Throws ConfigError.
  void validate(const Tokenizer& tokenizer) const;
  bool operator==(const TemplateConfig&) const = default;
};

/// Which segments a prompt carries. Full is the three-task prompt; the
/// others serve the ablation variants. The Args* layouts prepend
/// "[CLS] [Arg1] arg1 [Arg2] arg2 [SEP]" (no DRR mask) to a single
/// auxiliary template.
enum class PromptLayout { Full, DrrOnly, DrrSsc, DrrAcp, ArgsSsc, ArgsAcp };

bool has_drr_mask(PromptLayout layout);
bool has_ssc(PromptLayout layout);
bool has_acp(PromptLayout layout);

/// A tokenized prompt and the positions the heads read from. Positions of
/// segments absent from the layout are empty.
struct PromptEncoding {
  std::vector<TokenId> token_ids;
  PromptLayout layout = PromptLayout::Full;
  std::optional<std::size_t> drr_mask_pos;
  std::optional<std::size_t> ssc_mask_pos;
  std::optional<std::size_t> acp_mask_pos;
  std::optional<std::size_t> ssc_cls_pos;
  std::optional<std::size_t> acp_cls_pos;
  std::size_t arg1_tok_pos = 0;
  std::size_t arg2_tok_pos = 0;
  /// Argument token spans inside the first segment (post-truncation).
  std::size_t arg1_begin = 0, arg1_len = 0;
  std::size_t arg2_begin = 0, arg2_len = 0;

  std::size_t length() const { return token_ids.size(); }
};

/// Pre-tokenizes the template text once so prompts can be built cheaply for
/// every instance. Holds a reference to the tokenizer, which must outlive it.
class PromptBuilder {
 public:
  PromptBuilder(const TemplateConfig& config, const Tokenizer& tokenizer);

  PromptEncoding build(const DiscourseInstance& instance, PromptLayout layout = PromptLayout::Full) const;
  PromptEncoding build(std::string_view arg1, std::string_view arg2, PromptLayout layout = PromptLayout::Full) const;

  const TemplateConfig& config() const { return config_; }

 private:
  TemplateConfig config_;
  const Tokenizer* tokenizer_;
  std::vector<TokenId> ssc_body_;  // template tokens without [CLS]/[SEP]
  std::vector<TokenId> acp_body_;
  TokenId arg1_id_;
  TokenId arg2_id_;
};

/// Builds the three-part prompt
///   [CLS] [Arg1] a1 [MASK] [Arg2] a2 [SEP] [CLS] ssc [SEP] [CLS] acp [SEP]
/// Arguments are cut at the tail to max_arg_tokens; if the result still
/// overflows max_total_tokens the longer argument is trimmed further.
PromptEncoding build_prompt(const DiscourseInstance& instance, const TemplateConfig& config,
                            const Tokenizer& tokenizer, PromptLayout layout = PromptLayout::Full);

/// Asserts the structural invariants of an encoding (distinct in-range
/// positions, the right token at each, mask/begin counts per layout).
/// Throws std::logic_error describing the first violation.
void check_prompt_invariants(const PromptEncoding& encoding, const Tokenizer& tokenizer,
                             std::size_t max_total_tokens);

}  // namespace teprompt
