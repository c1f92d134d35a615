#include "teprompt/templating.hpp"

#include <algorithm>
#include <stdexcept>

#include "teprompt/errors.hpp"

namespace teprompt {

bool has_drr_mask(PromptLayout layout) {
  return layout != PromptLayout::ArgsSsc && layout != PromptLayout::ArgsAcp;
}

bool has_ssc(PromptLayout layout) {
  return layout == PromptLayout::Full || layout == PromptLayout::DrrSsc || layout == PromptLayout::ArgsSsc;
}

bool has_acp(PromptLayout layout) {
  return layout == PromptLayout::Full || layout == PromptLayout::DrrAcp || layout == PromptLayout::ArgsAcp;
}

namespace {

std::size_t count_of(const std::vector<TokenId>& ids, TokenId id) {
  return static_cast<std::size_t>(std::count(ids.begin(), ids.end(), id));
}

TokenId special_or_throw(const Tokenizer& tokenizer, std::string_view surface) {
  auto id = tokenizer.special_id(surface);
  if (!id) {
    throw ConfigError("tokenizer has no registered special token " + std::string(surface) +
                      "; register [Arg1] and [Arg2] before building prompts");
  }
  return *id;
}

void check_template_slots(const std::vector<TokenId>& body, const Tokenizer& tokenizer, std::string_view name,
                          bool needs_args) {
  const TokenId mask = tokenizer.mask_id();
  if (count_of(body, mask) != 1) {
    throw ConfigError(std::string(name) + " template must contain exactly one [MASK] slot");
  }
  if (count_of(body, tokenizer.cls_id()) != 0 || count_of(body, tokenizer.sep_id()) != 0) {
    throw ConfigError(std::string(name) + " template must not contain [CLS] or [SEP]");
  }
  const TokenId a1 = special_or_throw(tokenizer, kArg1Token);
  const TokenId a2 = special_or_throw(tokenizer, kArg2Token);
  const std::size_t want = needs_args ? 1 : 0;
  if (count_of(body, a1) != want || count_of(body, a2) != want) {
    throw ConfigError(std::string(name) + (needs_args ? " template must contain exactly one [Arg1] and one [Arg2] slot"
                                                       : " template must not contain [Arg1] or [Arg2] slots"));
  }
}

std::size_t scaffold_size(PromptLayout layout, std::size_t ssc_body, std::size_t acp_body) {
  std::size_t n = has_drr_mask(layout) ? 5 : 4;  // [CLS] [Arg1] ([MASK]) [Arg2] [SEP]
  if (has_ssc(layout)) n += ssc_body + 2;
  if (has_acp(layout)) n += acp_body + 2;
  return n;
}

}  // namespace

void TemplateConfig::validate(const Tokenizer& tokenizer) const {
  if (max_arg_tokens == 0) throw ConfigError("max_arg_tokens must be positive");
  if (2 * max_arg_tokens >= max_total_tokens) {
    throw ConfigError("2 * max_arg_tokens (" + std::to_string(2 * max_arg_tokens) +
                      ") must be below max_total_tokens (" + std::to_string(max_total_tokens) + ")");
  }
  const auto ssc = tokenizer.tokenize_template(ssc_text);
  const auto acp = tokenizer.tokenize_template(acp_text);
  check_template_slots(ssc, tokenizer, "SSC", true);
  check_template_slots(acp, tokenizer, "ACP", false);
  const auto fixed = scaffold_size(PromptLayout::Full, ssc.size(), acp.size());
  if (fixed + 2 > max_total_tokens) {
    throw ConfigError("template scaffolding (" + std::to_string(fixed) +
                      " tokens) leaves no room for the arguments within max_total_tokens " +
                      std::to_string(max_total_tokens));
  }
}

PromptBuilder::PromptBuilder(const TemplateConfig& config, const Tokenizer& tokenizer)
    : config_(config), tokenizer_(&tokenizer) {
  config_.validate(tokenizer);
  ssc_body_ = tokenizer.tokenize_template(config_.ssc_text);
  acp_body_ = tokenizer.tokenize_template(config_.acp_text);
  arg1_id_ = special_or_throw(tokenizer, kArg1Token);
  arg2_id_ = special_or_throw(tokenizer, kArg2Token);
}

PromptEncoding PromptBuilder::build(const DiscourseInstance& instance, PromptLayout layout) const {
  return build(instance.arg1, instance.arg2, layout);
}

PromptEncoding PromptBuilder::build(std::string_view arg1, std::string_view arg2, PromptLayout layout) const {
  const Tokenizer& tok = *tokenizer_;
  auto a1 = tok.tokenize(arg1);
  auto a2 = tok.tokenize(arg2);
  if (a1.empty()) throw DataError("argument 1 tokenizes to nothing: \"" + std::string(arg1) + "\"");
  if (a2.empty()) throw DataError("argument 2 tokenizes to nothing: \"" + std::string(arg2) + "\"");

  std::size_t n1 = std::min(a1.size(), config_.max_arg_tokens);
  std::size_t n2 = std::min(a2.size(), config_.max_arg_tokens);
  const std::size_t fixed = scaffold_size(layout, ssc_body_.size(), acp_body_.size());
  const std::size_t budget = config_.max_total_tokens > fixed ? config_.max_total_tokens - fixed : 0;
  while (n1 + n2 > budget) {
    if (n1 >= n2 && n1 > 1) {
      --n1;
    } else if (n2 > 1) {
      --n2;
    } else {
      throw std::logic_error("prompt of " + std::to_string(fixed + n1 + n2) + " tokens exceeds max_total_tokens " +
                             std::to_string(config_.max_total_tokens));
    }
  }

  PromptEncoding enc;
  enc.layout = layout;
  auto& ids = enc.token_ids;
  ids.reserve(fixed + n1 + n2);
  ids.push_back(tok.cls_id());
  enc.arg1_tok_pos = ids.size();
  ids.push_back(arg1_id_);
  enc.arg1_begin = ids.size();
  enc.arg1_len = n1;
  ids.insert(ids.end(), a1.begin(), a1.begin() + static_cast<std::ptrdiff_t>(n1));
  if (has_drr_mask(layout)) {
    enc.drr_mask_pos = ids.size();
    ids.push_back(tok.mask_id());
  }
  enc.arg2_tok_pos = ids.size();
  ids.push_back(arg2_id_);
  enc.arg2_begin = ids.size();
  enc.arg2_len = n2;
  ids.insert(ids.end(), a2.begin(), a2.begin() + static_cast<std::ptrdiff_t>(n2));
  ids.push_back(tok.sep_id());

  auto append_segment = [&](const std::vector<TokenId>& body, std::optional<std::size_t>& cls_pos,
                            std::optional<std::size_t>& mask_pos) {
    cls_pos = ids.size();
    ids.push_back(tok.cls_id());
    const auto offset = ids.size();
    ids.insert(ids.end(), body.begin(), body.end());
    const auto it = std::find(body.begin(), body.end(), tok.mask_id());
    mask_pos = offset + static_cast<std::size_t>(it - body.begin());
    ids.push_back(tok.sep_id());
  };
  if (has_ssc(layout)) append_segment(ssc_body_, enc.ssc_cls_pos, enc.ssc_mask_pos);
  if (has_acp(layout)) append_segment(acp_body_, enc.acp_cls_pos, enc.acp_mask_pos);

  if (ids.size() > config_.max_total_tokens) {
    throw std::logic_error("prompt of " + std::to_string(ids.size()) + " tokens exceeds max_total_tokens " +
                           std::to_string(config_.max_total_tokens));
  }
  return enc;
}

PromptEncoding build_prompt(const DiscourseInstance& instance, const TemplateConfig& config,
                            const Tokenizer& tokenizer, PromptLayout layout) {
  return PromptBuilder(config, tokenizer).build(instance, layout);
}

void check_prompt_invariants(const PromptEncoding& enc, const Tokenizer& tokenizer, std::size_t max_total_tokens) {
  auto fail = [](const std::string& what) { throw std::logic_error("prompt invariant violated: " + what); };
  const auto& ids = enc.token_ids;
  if (enc.length() > max_total_tokens) fail("length exceeds max_total_tokens");

  std::vector<std::size_t> positions = {enc.arg1_tok_pos, enc.arg2_tok_pos};
  auto expect = [&](const std::optional<std::size_t>& pos, bool present, TokenId id, const char* name) {
    if (pos.has_value() != present) fail(std::string(name) + (present ? " missing" : " unexpected"));
    if (!pos) return;
    if (*pos >= ids.size()) fail(std::string(name) + " out of range");
    if (ids[*pos] != id) fail(std::string(name) + " does not hold the expected token");
    positions.push_back(*pos);
  };
  expect(enc.drr_mask_pos, has_drr_mask(enc.layout), tokenizer.mask_id(), "drr_mask_pos");
  expect(enc.ssc_mask_pos, has_ssc(enc.layout), tokenizer.mask_id(), "ssc_mask_pos");
  expect(enc.acp_mask_pos, has_acp(enc.layout), tokenizer.mask_id(), "acp_mask_pos");
  expect(enc.ssc_cls_pos, has_ssc(enc.layout), tokenizer.cls_id(), "ssc_cls_pos");
  expect(enc.acp_cls_pos, has_acp(enc.layout), tokenizer.cls_id(), "acp_cls_pos");

  for (auto p : {enc.arg1_tok_pos, enc.arg2_tok_pos}) {
    if (p >= ids.size()) fail("argument marker out of range");
  }
  if (ids[enc.arg1_tok_pos] != tokenizer.special_id(kArg1Token)) fail("arg1_tok_pos does not hold [Arg1]");
  if (ids[enc.arg2_tok_pos] != tokenizer.special_id(kArg2Token)) fail("arg2_tok_pos does not hold [Arg2]");

  auto sorted = positions;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) fail("recorded positions collide");

  const std::size_t masks = (has_drr_mask(enc.layout) ? 1 : 0) + (has_ssc(enc.layout) ? 1 : 0) +
                            (has_acp(enc.layout) ? 1 : 0);
  const std::size_t begins = 1 + (has_ssc(enc.layout) ? 1 : 0) + (has_acp(enc.layout) ? 1 : 0);
  if (count_of(ids, tokenizer.mask_id()) != masks) fail("wrong number of mask tokens");
  if (count_of(ids, tokenizer.cls_id()) != begins) fail("wrong number of begin tokens");
  if (ids.front() != tokenizer.cls_id()) fail("prompt does not start with the begin token");
}

}  // namespace teprompt
