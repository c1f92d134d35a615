#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "teprompt/tensor.hpp"
#include "teprompt/tokenizer.hpp"

namespace teprompt {

/// Shape and regularisation settings of a BERT-style post-norm transformer
/// encoder with a weight-tied masked-LM head.
struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden = 32;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ffn = 0;  // 0 selects 4 * hidden
  std::size_t max_positions = 160;
  std::size_t type_vocab = 1;
  double dropout = 0.1;
  double layer_norm_eps = 1e-12;
  double init_std = 0.02;

  std::size_t ffn_dim() const { return ffn == 0 ? 4 * hidden : ffn; }
  /// Throws ConfigError on inconsistent shapes (hidden % heads != 0, ...).
  void validate() const;
};

class Linear {
 public:
  Linear() = default;
  Linear(std::string name, std::size_t in, std::size_t out);

  /// y = x W^T + b, row per token. W is stored out x in.
  Matrix forward(const Matrix& x) const;
  /// Accumulates dW, db; returns dx.
  Matrix backward(const Matrix& x, const Matrix& dy);

  Parameter weight;
  Parameter bias;
};

class LayerNorm {
 public:
  struct Cache {
    Matrix normalized;  // (x - mean) * rstd
    Vector rstd;
  };

  LayerNorm() = default;
  LayerNorm(std::string name, std::size_t dim, double eps);

  Matrix forward(const Matrix& x, Cache* cache) const;
  Matrix backward(const Cache& cache, const Matrix& dy);

  Parameter gamma;
  Parameter beta;
  double eps = 1e-12;
};

/// Per-call activations kept for the backward pass.
struct EncoderTrace {
  struct Layer {
    Matrix input;
    Matrix q, k, v;
    std::vector<Matrix> probs;       // per head, post-softmax
    std::vector<Matrix> attn_masks;  // per head dropout keep-scale; empty when inactive
    Matrix context;
    Matrix attn_out_mask;  // dropout keep-scale, empty when inactive
    LayerNorm::Cache ln1;
    Matrix x1;
    Matrix ffn_pre;
    Matrix ffn_act;
    Matrix ffn_out_mask;
    LayerNorm::Cache ln2;
  };

  std::vector<TokenId> ids;
  Matrix emb_mask;
  LayerNorm::Cache emb_ln;
  std::vector<Layer> layers;
};

/// Activations of the masked-LM transform for a single hidden state.
struct HeadTrace {
  RowVector input;
  RowVector pre;  // dense output before GELU
  RowVector act;
  LayerNorm::Cache ln;
  RowVector transformed;
};

/// Transformer encoder plus MLM head. The head's decoder matrix is the token
/// embedding table (weight tying), so scoring a hidden state against token
/// id j is  E[j] . transform(h) + b[j].
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  std::size_t hidden() const { return config_.hidden; }
  std::size_t vocab_size() const { return config_.vocab_size; }

  /// Contextual states, one row per input id. Dropout is applied only when
  /// `dropout_rng` is non-null; `trace` is filled when non-null.
  Matrix forward(std::span<const TokenId> ids, EncoderTrace* trace = nullptr, Rng* dropout_rng = nullptr) const;
  /// Accumulates parameter gradients given dLoss/dStates.
  void backward(const EncoderTrace& trace, const Matrix& d_states);

  RowVector head_transform(const RowVector& h, HeadTrace* trace = nullptr) const;
  /// Scores of `transformed` (output of head_transform) restricted to `ids`.
  Vector head_scores(const RowVector& transformed, std::span<const TokenId> ids) const;
  /// Full-vocabulary MLM scores of a hidden state.
  Vector mlm_score(const RowVector& h) const;
  /// Backward through head_scores and head_transform; returns dLoss/dh.
  RowVector head_backward(const HeadTrace& trace, std::span<const TokenId> ids, const Vector& d_scores);

  /// Appends `count` embedding rows drawn from N(0, init_std^2) and zero
  /// decoder-bias entries.
  void extend_vocab(std::size_t count, Rng& rng);

  ParameterList parameters();
  std::vector<const Parameter*> parameters() const;

  // Exposed for checkpoint I/O and weight import.
  Parameter word_embeddings;
  Parameter position_embeddings;
  Parameter type_embeddings;
  LayerNorm embedding_norm;
  struct Block {
    Linear query, key, value, attn_out;
    LayerNorm attn_norm;
    Linear ffn_in, ffn_out;
    LayerNorm ffn_norm;
  };
  std::vector<Block> blocks;
  Linear head_dense;
  LayerNorm head_norm;
  Parameter decoder_bias;

 private:
  EncoderConfig config_;
};

double gelu(double x);
double gelu_grad(double x);

}  // namespace teprompt
