#include "teprompt/encoder.hpp"

#include <cmath>
#include <numbers>

#include "teprompt/errors.hpp"

namespace teprompt {

namespace {

using Eigen::Index;

Index idx(std::size_t n) { return static_cast<Index>(n); }

/// Keep-scale mask for inverted dropout: entries are 0 or 1/(1-p).
Matrix dropout_mask(Index rows, Index cols, double p, Rng& rng) {
  Matrix mask(rows, cols);
  const double scale = 1.0 / (1.0 - p);
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < p ? 0.0 : scale;
  return mask;
}

void softmax_rows(Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

Matrix gelu_matrix(const Matrix& x) { return x.unaryExpr([](double v) { return gelu(v); }); }

Matrix gelu_grad_matrix(const Matrix& x) { return x.unaryExpr([](double v) { return gelu_grad(v); }); }

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void EncoderConfig::validate() const {
  if (vocab_size == 0) throw ConfigError("encoder vocab_size must be positive");
  if (hidden == 0 || heads == 0) throw ConfigError("encoder hidden size and head count must be positive");
  if (hidden % heads != 0) {
    throw ConfigError("hidden size " + std::to_string(hidden) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (layers == 0) throw ConfigError("encoder needs at least one layer");
  if (max_positions == 0) throw ConfigError("max_positions must be positive");
  if (type_vocab == 0) throw ConfigError("type_vocab must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

// ---------------------------------------------------------------------------

Linear::Linear(std::string name, std::size_t in, std::size_t out)
    : weight(name + ".weight", idx(out), idx(in)), bias(name + ".bias", 1, idx(out), false) {}

Matrix Linear::forward(const Matrix& x) const {
  Matrix y = x * weight.value.transpose();
  y.rowwise() += bias.value.row(0);
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& dy) {
  weight.grad.noalias() += dy.transpose() * x;
  bias.grad.row(0) += dy.colwise().sum();
  return dy * weight.value;
}

LayerNorm::LayerNorm(std::string name, std::size_t dim, double epsilon)
    : gamma(name + ".weight", 1, idx(dim), false), beta(name + ".bias", 1, idx(dim), false), eps(epsilon) {
  gamma.value.setOnes();
}

Matrix LayerNorm::forward(const Matrix& x, Cache* cache) const {
  const Index n = x.rows();
  const double width = static_cast<double>(x.cols());
  Matrix normalized(n, x.cols());
  Vector rstd(n);
  for (Index r = 0; r < n; ++r) {
    const double mean = x.row(r).sum() / width;
    const auto centered = (x.row(r).array() - mean).eval();
    const double var = centered.square().sum() / width;
    rstd(r) = 1.0 / std::sqrt(var + eps);
    normalized.row(r) = centered * rstd(r);
  }
  Matrix y = normalized.array().rowwise() * gamma.value.row(0).array();
  y.rowwise() += beta.value.row(0);
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->rstd = std::move(rstd);
  }
  return y;
}

Matrix LayerNorm::backward(const Cache& cache, const Matrix& dy) {
  gamma.grad.row(0) += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  beta.grad.row(0) += dy.colwise().sum();
  const double width = static_cast<double>(dy.cols());
  Matrix dxhat = dy.array().rowwise() * gamma.value.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Index r = 0; r < dy.rows(); ++r) {
    const double mean_d = dxhat.row(r).sum() / width;
    const double mean_dx = dxhat.row(r).dot(cache.normalized.row(r)) / width;
    dx.row(r) =
        cache.rstd(r) * (dxhat.row(r).array() - mean_d - cache.normalized.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

// ---------------------------------------------------------------------------

Encoder::Encoder(const EncoderConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const auto d = config_.hidden;
  word_embeddings = Parameter("embeddings.word_embeddings.weight", idx(config_.vocab_size), idx(d));
  position_embeddings = Parameter("embeddings.position_embeddings.weight", idx(config_.max_positions), idx(d));
  type_embeddings = Parameter("embeddings.token_type_embeddings.weight", idx(config_.type_vocab), idx(d));
  embedding_norm = LayerNorm("embeddings.LayerNorm", d, config_.layer_norm_eps);
  blocks.resize(config_.layers);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "encoder.layer." + std::to_string(l) + ".";
    auto& b = blocks[l];
    b.query = Linear(p + "attention.self.query", d, d);
    b.key = Linear(p + "attention.self.key", d, d);
    b.value = Linear(p + "attention.self.value", d, d);
    b.attn_out = Linear(p + "attention.output.dense", d, d);
    b.attn_norm = LayerNorm(p + "attention.output.LayerNorm", d, config_.layer_norm_eps);
    b.ffn_in = Linear(p + "intermediate.dense", d, config_.ffn_dim());
    b.ffn_out = Linear(p + "output.dense", config_.ffn_dim(), d);
    b.ffn_norm = LayerNorm(p + "output.LayerNorm", d, config_.layer_norm_eps);
  }
  head_dense = Linear("cls.predictions.transform.dense", d, d);
  head_norm = LayerNorm("cls.predictions.transform.LayerNorm", d, config_.layer_norm_eps);
  decoder_bias = Parameter("cls.predictions.bias", 1, idx(config_.vocab_size), false);

  Rng rng(seed);
  for (auto* p : parameters()) {
    if (p->decay) p->init_normal(rng, config_.init_std);
  }
}

ParameterList Encoder::parameters() {
  ParameterList out = {&word_embeddings, &position_embeddings, &type_embeddings, &embedding_norm.gamma,
                       &embedding_norm.beta};
  for (auto& b : blocks) {
    for (Linear* lin : {&b.query, &b.key, &b.value, &b.attn_out}) {
      out.push_back(&lin->weight);
      out.push_back(&lin->bias);
    }
    out.push_back(&b.attn_norm.gamma);
    out.push_back(&b.attn_norm.beta);
    for (Linear* lin : {&b.ffn_in, &b.ffn_out}) {
      out.push_back(&lin->weight);
      out.push_back(&lin->bias);
    }
    out.push_back(&b.ffn_norm.gamma);
    out.push_back(&b.ffn_norm.beta);
  }
  out.push_back(&head_dense.weight);
  out.push_back(&head_dense.bias);
  out.push_back(&head_norm.gamma);
  out.push_back(&head_norm.beta);
  out.push_back(&decoder_bias);
  return out;
}

std::vector<const Parameter*> Encoder::parameters() const {
  auto list = const_cast<Encoder*>(this)->parameters();
  return {list.begin(), list.end()};
}

Matrix Encoder::forward(std::span<const TokenId> ids, EncoderTrace* trace, Rng* dropout_rng) const {
  const Index n = idx(ids.size());
  const Index d = idx(config_.hidden);
  if (ids.empty()) throw DataError("cannot encode an empty token sequence");
  if (ids.size() > config_.max_positions) {
    throw DataError("sequence of " + std::to_string(ids.size()) + " tokens exceeds max_positions " +
                    std::to_string(config_.max_positions));
  }
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i) {
    const TokenId id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " +
                      std::to_string(config_.vocab_size));
    }
    x.row(i) = word_embeddings.value.row(id) + position_embeddings.value.row(i) + type_embeddings.value.row(0);
  }
  const bool drop = dropout_rng != nullptr && config_.dropout > 0.0;
  const double p = config_.dropout;

  if (trace != nullptr) {
    trace->ids.assign(ids.begin(), ids.end());
    trace->layers.assign(blocks.size(), {});
  }
  x = embedding_norm.forward(x, trace ? &trace->emb_ln : nullptr);
  if (drop) {
    Matrix mask = dropout_mask(n, d, p, *dropout_rng);
    x.array() *= mask.array();
    if (trace) trace->emb_mask = std::move(mask);
  } else if (trace) {
    trace->emb_mask.resize(0, 0);
  }

  const auto heads = config_.heads;
  const Index dk = d / idx(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& b = blocks[l];
    EncoderTrace::Layer* lt = trace ? &trace->layers[l] : nullptr;
    Matrix q = b.query.forward(x);
    Matrix k = b.key.forward(x);
    Matrix v = b.value.forward(x);
    Matrix context(n, d);
    if (lt) {
      lt->probs.resize(heads);
      lt->attn_masks.assign(drop ? heads : 0, Matrix());
    }
    for (std::size_t h = 0; h < heads; ++h) {
      const Index off = idx(h) * dk;
      Matrix scores = (q.middleCols(off, dk) * k.middleCols(off, dk).transpose()) * scale;
      softmax_rows(scores);
      if (drop) {
        Matrix mask = dropout_mask(n, n, p, *dropout_rng);
        context.middleCols(off, dk) = (scores.array() * mask.array()).matrix() * v.middleCols(off, dk);
        if (lt) lt->attn_masks[h] = std::move(mask);
      } else {
        context.middleCols(off, dk) = scores * v.middleCols(off, dk);
      }
      if (lt) lt->probs[h] = std::move(scores);
    }
    Matrix attn = b.attn_out.forward(context);
    if (drop) {
      Matrix mask = dropout_mask(n, d, p, *dropout_rng);
      attn.array() *= mask.array();
      if (lt) lt->attn_out_mask = std::move(mask);
    }
    Matrix x1 = b.attn_norm.forward(x + attn, lt ? &lt->ln1 : nullptr);
    Matrix pre = b.ffn_in.forward(x1);
    Matrix act = gelu_matrix(pre);
    Matrix ffn = b.ffn_out.forward(act);
    if (drop) {
      Matrix mask = dropout_mask(n, d, p, *dropout_rng);
      ffn.array() *= mask.array();
      if (lt) lt->ffn_out_mask = std::move(mask);
    }
    Matrix x2 = b.ffn_norm.forward(x1 + ffn, lt ? &lt->ln2 : nullptr);
    if (lt) {
      lt->input = std::move(x);
      lt->q = std::move(q);
      lt->k = std::move(k);
      lt->v = std::move(v);
      lt->context = std::move(context);
      lt->x1 = std::move(x1);
      lt->ffn_pre = std::move(pre);
      lt->ffn_act = std::move(act);
      if (!drop) {
        lt->attn_out_mask.resize(0, 0);
        lt->ffn_out_mask.resize(0, 0);
      }
    }
    x = std::move(x2);
  }
  return x;
}

void Encoder::backward(const EncoderTrace& trace, const Matrix& d_states) {
  const Index n = idx(trace.ids.size());
  const Index d = idx(config_.hidden);
  if (d_states.rows() != n || d_states.cols() != d) throw DataError("gradient shape does not match trace");
  const auto heads = config_.heads;
  const Index dk = d / idx(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Matrix dx = d_states;
  for (std::size_t l = blocks.size(); l-- > 0;) {
    auto& b = blocks[l];
    const auto& lt = trace.layers[l];

    Matrix d_sum2 = b.ffn_norm.backward(lt.ln2, dx);
    Matrix d_ffn = d_sum2;
    if (lt.ffn_out_mask.size() > 0) d_ffn.array() *= lt.ffn_out_mask.array();
    Matrix d_act = b.ffn_out.backward(lt.ffn_act, d_ffn);
    Matrix d_pre = d_act.array() * gelu_grad_matrix(lt.ffn_pre).array();
    Matrix d_x1 = d_sum2 + b.ffn_in.backward(lt.x1, d_pre);

    Matrix d_sum1 = b.attn_norm.backward(lt.ln1, d_x1);
    Matrix d_attn = d_sum1;
    if (lt.attn_out_mask.size() > 0) d_attn.array() *= lt.attn_out_mask.array();
    Matrix d_context = b.attn_out.backward(lt.context, d_attn);

    Matrix dq(n, d), dk_all(n, d), dv(n, d);
    for (std::size_t h = 0; h < heads; ++h) {
      const Index off = idx(h) * dk;
      const Matrix& probs = lt.probs[h];
      const bool masked = !lt.attn_masks.empty();
      Matrix dropped = masked ? Matrix(probs.array() * lt.attn_masks[h].array()) : probs;
      Matrix d_dropped = d_context.middleCols(off, dk) * lt.v.middleCols(off, dk).transpose();
      dv.middleCols(off, dk) = dropped.transpose() * d_context.middleCols(off, dk);
      Matrix d_probs = masked ? Matrix(d_dropped.array() * lt.attn_masks[h].array()) : d_dropped;
      const Vector row_dot = (d_probs.array() * probs.array()).rowwise().sum();
      Matrix d_scores = probs.array() * (d_probs.colwise() - row_dot).array();
      dq.middleCols(off, dk) = d_scores * lt.k.middleCols(off, dk) * scale;
      dk_all.middleCols(off, dk) = d_scores.transpose() * lt.q.middleCols(off, dk) * scale;
    }
    dx = d_sum1;
    dx += b.query.backward(lt.input, dq);
    dx += b.key.backward(lt.input, dk_all);
    dx += b.value.backward(lt.input, dv);
  }

  if (trace.emb_mask.size() > 0) dx.array() *= trace.emb_mask.array();
  Matrix d_emb = embedding_norm.backward(trace.emb_ln, dx);
  for (Index i = 0; i < n; ++i) {
    word_embeddings.grad.row(trace.ids[static_cast<std::size_t>(i)]) += d_emb.row(i);
    position_embeddings.grad.row(i) += d_emb.row(i);
  }
  type_embeddings.grad.row(0) += d_emb.colwise().sum();
}

RowVector Encoder::head_transform(const RowVector& h, HeadTrace* trace) const {
  if (h.size() != idx(config_.hidden)) throw DataError("hidden state has the wrong dimension");
  Matrix input = h;
  Matrix pre = head_dense.forward(input);
  Matrix act = gelu_matrix(pre);
  Matrix out = head_norm.forward(act, trace ? &trace->ln : nullptr);
  if (trace) {
    trace->input = h;
    trace->pre = pre.row(0);
    trace->act = act.row(0);
    trace->transformed = out.row(0);
  }
  return out.row(0);
}

Vector Encoder::head_scores(const RowVector& transformed, std::span<const TokenId> ids) const {
  Vector scores(idx(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const TokenId id = ids[j];
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw ConfigError("answer token id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(config_.vocab_size));
    }
    scores(idx(j)) = word_embeddings.value.row(id).dot(transformed) + decoder_bias.value(0, id);
  }
  return scores;
}

Vector Encoder::mlm_score(const RowVector& h) const {
  const RowVector t = head_transform(h);
  Vector scores = word_embeddings.value * t.transpose();
  scores += decoder_bias.value.row(0).transpose();
  return scores;
}

RowVector Encoder::head_backward(const HeadTrace& trace, std::span<const TokenId> ids, const Vector& d_scores) {
  RowVector d_t = RowVector::Zero(idx(config_.hidden));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const double g = d_scores(idx(j));
    if (g == 0.0) continue;
    d_t += g * word_embeddings.value.row(ids[j]);
    word_embeddings.grad.row(ids[j]) += g * trace.transformed;
    decoder_bias.grad(0, ids[j]) += g;
  }
  Matrix d_act = head_norm.backward(trace.ln, Matrix(d_t));
  Matrix d_pre = d_act.array() * trace.pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
  Matrix d_in = head_dense.backward(Matrix(trace.input), d_pre);
  return d_in.row(0);
}

void Encoder::extend_vocab(std::size_t count, Rng& rng) {
  const Index old_rows = word_embeddings.value.rows();
  const Index new_rows = old_rows + idx(count);
  word_embeddings.value.conservativeResize(new_rows, Eigen::NoChange);
  word_embeddings.grad = Matrix::Zero(new_rows, word_embeddings.value.cols());
  for (Index r = old_rows; r < new_rows; ++r) {
    for (Index c = 0; c < word_embeddings.value.cols(); ++c) word_embeddings.value(r, c) = rng.normal(0.0, config_.init_std);
  }
  decoder_bias.value.conservativeResize(Eigen::NoChange, new_rows);
  decoder_bias.value.rightCols(idx(count)).setZero();
  decoder_bias.grad = Matrix::Zero(1, new_rows);
  config_.vocab_size = static_cast<std::size_t>(new_rows);
}

}  // namespace teprompt
