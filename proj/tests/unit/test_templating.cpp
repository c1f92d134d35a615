#include <gtest/gtest.h>

#include "teprompt/errors.hpp"
#include "teprompt/templating.hpp"
#include "test_support.hpp"

namespace teprompt {
namespace {

using testing::make_instance;

Tokenizer prompt_tokenizer(const std::vector<std::string>& extra = {}) {
  std::vector<std::string> texts = {"The sense between and is", "The implicit connective word is"};
  for (int i = 0; i < 120; ++i) texts.push_back("w" + std::to_string(i));
  texts.insert(texts.end(), extra.begin(), extra.end());
  auto tok = build_word_tokenizer(texts);
  const std::vector<std::string> specials = {"[Arg1]", "[Arg2]"};
  tok.register_special_tokens(specials);
  return tok;
}

std::string words(int n, int offset = 0) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string((i + offset) % 120);
  return s;
}

TEST(BuildPrompt, ThreeSegmentStructure) {
  const auto tok = prompt_tokenizer({"they are confident of getting it", "hesitate to sell"});
  const auto inst = make_instance("They are confident of getting it", "they hesitate to sell", Sense::Contingency, "so");
  const auto enc = build_prompt(inst, TemplateConfig{}, tok);
  const auto expected = tok.tokenize_template(
      "[CLS] [Arg1] they are confident of getting it [MASK] [Arg2] they hesitate to sell [SEP] "
      "[CLS] The sense between [Arg1] and [Arg2] is [MASK] [SEP] "
      "[CLS] The implicit connective word is [MASK] [SEP]");
  EXPECT_EQ(enc.token_ids, expected);
  EXPECT_EQ(enc.arg1_tok_pos, 1u);
  EXPECT_EQ(*enc.drr_mask_pos, 8u);
  EXPECT_EQ(enc.arg2_tok_pos, 9u);
  EXPECT_EQ(enc.token_ids[*enc.ssc_mask_pos], tok.mask_id());
  EXPECT_EQ(enc.token_ids[*enc.acp_cls_pos], tok.cls_id());
  EXPECT_EQ(*enc.acp_mask_pos, enc.length() - 2);
  EXPECT_NO_THROW(check_prompt_invariants(enc, tok, 150));
}

TEST(BuildPrompt, LongArgumentsCutAtTailTo70WhenTheyFit) {
  const auto tok = prompt_tokenizer();
  const auto inst = make_instance(words(100), words(100, 7), Sense::Expansion, "and");
  const auto enc = build_prompt(inst, TemplateConfig{}, tok, PromptLayout::DrrOnly);
  EXPECT_EQ(enc.arg1_len, 70u);
  EXPECT_EQ(enc.arg2_len, 70u);
  EXPECT_EQ(enc.length(), 145u);
  // Leading tokens kept.
  const auto a1 = tok.tokenize(inst.arg1);
  EXPECT_TRUE(std::equal(a1.begin(), a1.begin() + 70, enc.token_ids.begin() + static_cast<long>(enc.arg1_begin)));
}

TEST(BuildPrompt, FullPromptStaysWithinTotalBudget) {
  const auto tok = prompt_tokenizer();
  const auto inst = make_instance(words(100), words(100, 7), Sense::Expansion, "and");
  const auto enc = build_prompt(inst, TemplateConfig{}, tok);
  EXPECT_LE(enc.length(), 150u);
  EXPECT_LE(enc.arg1_len, 70u);
  EXPECT_LE(enc.arg2_len, 70u);
  EXPECT_LE(enc.arg1_len > enc.arg2_len ? enc.arg1_len - enc.arg2_len : enc.arg2_len - enc.arg1_len, 1u);
  EXPECT_EQ(enc.length(), 150u);
  EXPECT_NO_THROW(check_prompt_invariants(enc, tok, 150));
}

TEST(BuildPrompt, OneWordArgumentsOrderPositions) {
  const auto tok = prompt_tokenizer();
  const auto enc = build_prompt(make_instance("w1", "w2", Sense::Temporal, "then"), TemplateConfig{}, tok);
  EXPECT_LT(*enc.drr_mask_pos, *enc.ssc_cls_pos);
  EXPECT_LT(*enc.ssc_cls_pos, *enc.ssc_mask_pos);
  EXPECT_LT(*enc.ssc_mask_pos, *enc.acp_cls_pos);
  EXPECT_LT(*enc.acp_cls_pos, *enc.acp_mask_pos);
  EXPECT_NO_THROW(check_prompt_invariants(enc, tok, 150));
}

TEST(BuildPrompt, LayoutsCarryOnlyTheirSegments) {
  const auto tok = prompt_tokenizer();
  const PromptBuilder builder(TemplateConfig{}, tok);
  const auto inst = make_instance("w1 w2", "w3", Sense::Temporal, "then");
  for (auto layout : {PromptLayout::Full, PromptLayout::DrrOnly, PromptLayout::DrrSsc, PromptLayout::DrrAcp,
                      PromptLayout::ArgsSsc, PromptLayout::ArgsAcp}) {
    const auto enc = builder.build(inst, layout);
    EXPECT_EQ(enc.drr_mask_pos.has_value(), has_drr_mask(layout));
    EXPECT_EQ(enc.ssc_mask_pos.has_value(), has_ssc(layout));
    EXPECT_EQ(enc.acp_mask_pos.has_value(), has_acp(layout));
    EXPECT_NO_THROW(check_prompt_invariants(enc, tok, 150));
  }
  const auto args_ssc = builder.build(inst, PromptLayout::ArgsSsc);
  EXPECT_EQ(args_ssc.token_ids[args_ssc.arg2_tok_pos - 1], *tok.vocab().find("w2"));
}

TEST(BuildPrompt, DecodedArgumentsAndIdempotentTruncation) {
  const auto tok = prompt_tokenizer();
  const PromptBuilder builder(TemplateConfig{}, tok);
  testing::Gen gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n1 = 1 + static_cast<int>(gen.index(110));
    const int n2 = 1 + static_cast<int>(gen.index(110));
    const auto inst = make_instance(words(n1, trial), words(n2, trial + 3), Sense::Expansion, "and");
    const auto enc = builder.build(inst);
    check_prompt_invariants(enc, tok, 150);

    const std::span<const TokenId> ids(enc.token_ids);
    const std::string a1 = tok.decode(ids.subspan(enc.arg1_begin, enc.arg1_len));
    const std::string a2 = tok.decode(ids.subspan(enc.arg2_begin, enc.arg2_len));
    EXPECT_EQ(inst.arg1.substr(0, a1.size()), a1);
    EXPECT_EQ(inst.arg2.substr(0, a2.size()), a2);

    const auto again = builder.build(make_instance(a1, a2, Sense::Expansion, "and"));
    EXPECT_EQ(again.token_ids, enc.token_ids);
  }
}

TEST(BuildPrompt, ArgumentTextCannotAddMasks) {
  const auto tok = prompt_tokenizer();
  const auto enc = build_prompt(make_instance("w1 [MASK] w2", "[CLS] w3", Sense::Comparison, "but"), TemplateConfig{},
                                tok);
  EXPECT_NO_THROW(check_prompt_invariants(enc, tok, 150));
}

TEST(BuildPrompt, EmptyArgumentRejected) {
  const auto tok = prompt_tokenizer();
  EXPECT_THROW(build_prompt(make_instance("  ", "w1", Sense::Comparison, "but"), TemplateConfig{}, tok), DataError);
}

TEST(TemplateConfig, SlotStructureIsChecked) {
  const auto tok = prompt_tokenizer();
  TemplateConfig c;
  EXPECT_NO_THROW(c.validate(tok));
  c.ssc_text = "The sense between [Arg1] and is [MASK]";
  EXPECT_THROW(c.validate(tok), ConfigError);
  c = TemplateConfig{};
  c.acp_text = "The implicit [MASK] connective word is [MASK]";
  EXPECT_THROW(c.validate(tok), ConfigError);
  c = TemplateConfig{};
  c.max_arg_tokens = 75;
  EXPECT_THROW(c.validate(tok), ConfigError);
  c = TemplateConfig{};
  c.max_total_tokens = 20;
  c.max_arg_tokens = 5;
  EXPECT_THROW(c.validate(tok), ConfigError);
}

TEST(TemplateConfig, MissingArgumentTokensRejected) {
  const auto tok = build_word_tokenizer(std::vector<std::string>{"The sense between and is"});
  EXPECT_THROW(TemplateConfig{}.validate(tok), ConfigError);
}

}  // namespace
}  // namespace teprompt
