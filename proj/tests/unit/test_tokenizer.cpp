#include <gtest/gtest.h>

#include "teprompt/errors.hpp"
#include "teprompt/tokenizer.hpp"

namespace teprompt {
namespace {

Tokenizer wordpiece_tokenizer() {
  Vocabulary v({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "how", "##ever", "so", "the", "un", "##aff", "##able",
                ",", "."});
  return Tokenizer(TokenizerKind::WordPiece, std::move(v), true);
}

TEST(Vocabulary, DenseIdsInInsertionOrder) {
  Vocabulary v;
  EXPECT_EQ(v.add("a"), 0);
  EXPECT_EQ(v.add("b"), 1);
  EXPECT_EQ(v.add("a"), 0);
  EXPECT_EQ(v.size(), 2u);
  EXPECT_EQ(v.token(1), "b");
  EXPECT_FALSE(v.find("c").has_value());
}

TEST(Tokenizer, WordPieceGreedyLongestMatch) {
  const auto tok = wordpiece_tokenizer();
  EXPECT_EQ(tok.pieces("However, unaffable."),
            (std::vector<std::string>{"how", "##ever", ",", "un", "##aff", "##able", "."}));
  EXPECT_EQ(tok.pieces("xyz"), std::vector<std::string>{"[UNK]"});
  EXPECT_EQ(tok.decode(tok.tokenize("however so")), "however so");
}

TEST(Tokenizer, PlainTextCannotProduceMaskOrBeginTokens) {
  auto tok = build_word_tokenizer(std::vector<std::string>{"mask cls"});
  for (TokenId id : tok.tokenize("[MASK] [CLS] [SEP]")) {
    EXPECT_NE(id, tok.mask_id());
    EXPECT_NE(id, tok.cls_id());
    EXPECT_NE(id, tok.sep_id());
  }
  const auto t = tok.tokenize_template("[CLS] mask [MASK] [SEP]");
  EXPECT_EQ(t, (std::vector<TokenId>{tok.cls_id(), *tok.vocab().find("mask"), tok.mask_id(), tok.sep_id()}));
}

TEST(Tokenizer, RegisteredSpecialsAreAtomic) {
  auto tok = build_word_tokenizer(std::vector<std::string>{"alpha beta"});
  const std::size_t before = tok.vocab_size();
  const std::vector<std::string> specials = {"[Arg1]", "[Arg2]"};
  const auto ids = tok.register_special_tokens(specials);
  ASSERT_EQ(ids.size(), 2u);
  EXPECT_EQ(ids[0], static_cast<TokenId>(before));
  EXPECT_EQ(ids[1], ids[0] + 1);
  EXPECT_EQ(tok.tokenize("[Arg1]"), std::vector<TokenId>{ids[0]});
  EXPECT_EQ(tok.tokenize("alpha [Arg2] beta"),
            (std::vector<TokenId>{*tok.vocab().find("alpha"), ids[1], *tok.vocab().find("beta")}));
  EXPECT_EQ(tok.special_id("[Arg2]"), ids[1]);
}

TEST(Tokenizer, DuplicateRegistrationFails) {
  auto tok = build_word_tokenizer(std::vector<std::string>{"alpha"});
  const std::vector<std::string> one = {"[Arg1]"};
  tok.register_special_tokens(one);
  EXPECT_THROW(tok.register_special_tokens(one), ConfigError);
  const std::vector<std::string> twice = {"[X]", "[X]"};
  EXPECT_THROW(tok.register_special_tokens(twice), ConfigError);
}

TEST(Tokenizer, WordTokenizerMapsUnseenWordsToUnknown) {
  const auto tok = build_word_tokenizer(std::vector<std::string>{"The cat sat."});
  const auto ids = tok.tokenize("the dog sat");
  ASSERT_EQ(ids.size(), 3u);
  EXPECT_EQ(ids[1], tok.unk_id());
  EXPECT_NE(ids[0], tok.unk_id());
}

TEST(Tokenizer, RequiresCoreSpecials) {
  EXPECT_THROW(Tokenizer(TokenizerKind::Word, Vocabulary({"a", "b"}), true), ConfigError);
}

}  // namespace
}  // namespace teprompt
