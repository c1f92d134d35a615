#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace teprompt {

using TokenId = std::int32_t;

inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kArg1Token = "[Arg1]";
inline constexpr std::string_view kArg2Token = "[Arg2]";

/// Bidirectional token <-> id table. Ids are dense and assigned in
/// insertion order.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  TokenId add(std::string token);
  std::optional<TokenId> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// One token per line, as in BERT's vocab.txt.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

enum class TokenizerKind { Word, WordPiece };

/// Text -> token ids. tokenize() keeps registered special tokens such as
/// [Arg1] atomic but never produces [CLS], [SEP] or [MASK], so argument text
/// containing "[MASK]" cannot inject a mask position. tokenize_template()
/// recognises those three as well.
class Tokenizer {
 public:
  Tokenizer(TokenizerKind kind, Vocabulary vocab, bool lowercase);

  TokenizerKind kind() const { return kind_; }
  bool lowercase() const { return lowercase_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }

  std::vector<TokenId> tokenize(std::string_view text) const;

  /// Surface pieces for `text`, used in error messages ("however" ->
  /// ["how", "##ever"]).
  std::vector<std::string> pieces(std::string_view text) const;

  /// Tokenizes text in which special-token surfaces ([CLS], [SEP], [MASK]
  /// and every registered special) stand as atomic tokens.
  std::vector<TokenId> tokenize_template(std::string_view text) const;

  std::string decode(std::span<const TokenId> ids) const;

  /// Whitespace/punctuation split with case folding, before any subword
  /// segmentation.
  std::vector<std::string> basic_split(std::string_view text) const;

  TokenId cls_id() const { return cls_id_; }
  TokenId sep_id() const { return sep_id_; }
  TokenId mask_id() const { return mask_id_; }
  TokenId unk_id() const { return unk_id_; }

  /// Appends special tokens to the vocabulary. Throws ConfigError if any
  /// surface is already present or repeats within `surfaces`.
  std::vector<TokenId> register_special_tokens(std::span<const std::string> surfaces);
  std::optional<TokenId> special_id(std::string_view surface) const;
  const std::vector<std::string>& registered_specials() const { return registered_; }

 private:
  void wordpiece(const std::string& word, std::vector<std::string>& out) const;

  TokenizerKind kind_;
  Vocabulary vocab_;
  bool lowercase_;
  TokenId cls_id_ = -1;
  TokenId sep_id_ = -1;
  TokenId mask_id_ = -1;
  TokenId unk_id_ = -1;
  std::vector<std::string> registered_;
};

/// Builds a word-level vocabulary: the five BERT-style specials first, then
/// every distinct normalised word of `texts` in first-seen order.
Tokenizer build_word_tokenizer(std::span<const std::string> texts, bool lowercase = true);

}  // namespace teprompt
