#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "teprompt/encoder.hpp"
#include "teprompt/templating.hpp"
#include "teprompt/tokenizer.hpp"

namespace teprompt {

enum class BackboneKind { Toy, Pretrained };

std::string_view to_string(BackboneKind kind);

/// Settings of the desk-scale backbone trained from scratch.
struct ToyBackboneConfig {
  std::size_t d_h = 32;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ffn = 0;  // 0 selects 4 * d_h
  std::size_t max_positions = 160;
  double dropout = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ToyBackboneConfig&) const = default;
};

/// Masked-LM backbone: tokenizer, contextual encoder and weight-tied
/// vocabulary scorer.
class Backbone {
 public:
  Backbone(Tokenizer tokenizer, Encoder encoder, BackboneKind kind, std::string source = {});

  const Tokenizer& tokenizer() const { return tokenizer_; }
  const Encoder& encoder() const { return encoder_; }
  Encoder& encoder() { return encoder_; }

  BackboneKind kind() const { return kind_; }
  /// Directory of the pretrained weights; empty for the toy backbone.
  const std::string& source() const { return source_; }

  std::size_t hidden_dim() const { return encoder_.hidden(); }
  std::size_t vocab_size() const { return encoder_.vocab_size(); }
  /// Vocabulary size before any special tokens were registered.
  std::size_t base_vocab_size() const { return base_vocab_size_; }

  TokenId mask_token_id() const { return tokenizer_.mask_id(); }
  TokenId begin_token_id() const { return tokenizer_.cls_id(); }
  TokenId end_token_id() const { return tokenizer_.sep_id(); }

  std::vector<TokenId> tokenize(std::string_view text) const { return tokenizer_.tokenize(text); }

  /// Adds atomic special tokens and their embedding rows (N(0, 0.02^2)
  /// drawn from `rng`). Returns the new consecutive ids. Throws ConfigError
  /// on duplicates.
  std::vector<TokenId> register_special_tokens(std::span<const std::string> surfaces, Rng& rng);

  /// Hidden-state table (length x d_h) of a prompt; eval mode.
  Matrix encode_prompt(const PromptEncoding& encoding) const;

  Vector mlm_score(const RowVector& h) const { return encoder_.mlm_score(h); }

 private:
  Tokenizer tokenizer_;
  Encoder encoder_;
  BackboneKind kind_;
  std::string source_;
  std::size_t base_vocab_size_;
};

/// Builds a word-level toy backbone whose vocabulary covers `texts`.
Backbone make_toy_backbone(std::span<const std::string> texts, const ToyBackboneConfig& config);

/// Every text a toy vocabulary must cover for the given corpus lists: the
/// arguments, connectives, template wording, and the DRR/SSC answer words.
std::vector<std::string> toy_vocabulary_texts(std::span<const DiscourseInstance> instances,
                                              const TemplateConfig& templates);

/// Loads a BERT-family masked LM from a directory holding config.json,
/// vocab.txt and model.safetensors (tensor names as exported by
/// HuggingFace, with or without the "bert." prefix). Throws DataError or
/// ConfigError.
Backbone load_pretrained_bert(const std::filesystem::path& dir, double dropout = 0.1);

/// Writes `backbone` in the directory layout load_pretrained_bert reads
/// (float32 weights, base vocabulary only). Used for interchange and tests.
void export_bert_directory(const Backbone& backbone, const std::filesystem::path& dir);

}  // namespace teprompt
