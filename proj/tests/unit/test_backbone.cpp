#include <cmath>
#include <cstring>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "teprompt/backbone.hpp"
#include "teprompt/errors.hpp"
#include "teprompt/safetensors.hpp"
#include "test_support.hpp"

namespace teprompt {
namespace {

using Table = std::vector<std::vector<double>>;

// Scalar-loop reference of the encoder forward pass and MLM head, written
// directly from the BERT layer definition.
struct Reference {
  const Encoder& e;

  std::vector<double> linear(const Linear& l, const std::vector<double>& x) const {
    std::vector<double> y(static_cast<std::size_t>(l.weight.value.rows()));
    for (std::size_t o = 0; o < y.size(); ++o) {
      double s = l.bias.value(0, static_cast<Eigen::Index>(o));
      for (std::size_t i = 0; i < x.size(); ++i) s += l.weight.value(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) * x[i];
      y[o] = s;
    }
    return y;
  }

  std::vector<double> norm(const LayerNorm& ln, const std::vector<double>& x) const {
    double mean = 0, var = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      y[i] = (x[i] - mean) / std::sqrt(var + ln.eps) * ln.gamma.value(0, k) + ln.beta.value(0, k);
    }
    return y;
  }

  static double gelu_ref(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

  Table forward(const std::vector<TokenId>& ids) const {
    const std::size_t n = ids.size(), d = e.hidden();
    Table x(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        const auto cc = static_cast<Eigen::Index>(c);
        x[i][c] = e.word_embeddings.value(ids[i], cc) + e.position_embeddings.value(static_cast<Eigen::Index>(i), cc) +
                  e.type_embeddings.value(0, cc);
      }
      x[i] = norm(e.embedding_norm, x[i]);
    }
    const std::size_t heads = e.config().heads, dh = d / heads;
    for (const auto& b : e.blocks) {
      Table q(n), k(n), v(n), ctx(n, std::vector<double>(d, 0.0));
      for (std::size_t i = 0; i < n; ++i) {
        q[i] = linear(b.query, x[i]);
        k[i] = linear(b.key, x[i]);
        v[i] = linear(b.value, x[i]);
      }
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < n; ++i) {
          std::vector<double> s(n);
          double mx = -1e300;
          for (std::size_t j = 0; j < n; ++j) {
            double dot = 0;
            for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) dot += q[i][c] * k[j][c];
            s[j] = dot / std::sqrt(static_cast<double>(dh));
            mx = std::max(mx, s[j]);
          }
          double z = 0;
          for (auto& sj : s) z += (sj = std::exp(sj - mx));
          for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) ctx[i][c] += s[j] / z * v[j][c];
          }
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        auto a = linear(b.attn_out, ctx[i]);
        for (std::size_t c = 0; c < d; ++c) a[c] += x[i][c];
        const auto x1 = norm(b.attn_norm, a);
        auto f = linear(b.ffn_in, x1);
        for (auto& fv : f) fv = gelu_ref(fv);
        auto o = linear(b.ffn_out, f);
        for (std::size_t c = 0; c < d; ++c) o[c] += x1[c];
        x[i] = norm(b.ffn_norm, o);
      }
    }
    return x;
  }

  std::vector<double> mlm(const std::vector<double>& h) const {
    auto t = linear(e.head_dense, h);
    for (auto& tv : t) tv = gelu_ref(tv);
    t = norm(e.head_norm, t);
    std::vector<double> scores(e.vocab_size());
    for (std::size_t w = 0; w < scores.size(); ++w) {
      double s = e.decoder_bias.value(0, static_cast<Eigen::Index>(w));
      for (std::size_t c = 0; c < t.size(); ++c) s += e.word_embeddings.value(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(c)) * t[c];
      scores[w] = s;
    }
    return scores;
  }
};

Backbone toy(std::size_t d_h = 8, std::size_t layers = 2, double dropout = 0.1) {
  ToyBackboneConfig cfg;
  cfg.d_h = d_h;
  cfg.layers = layers;
  cfg.heads = 2;
  cfg.dropout = dropout;
  cfg.seed = 17;
  auto bb = make_toy_backbone(std::vector<std::string>{"alpha beta gamma delta so because then and but"}, cfg);
  // Non-trivial layer-norm and bias values so the reference exercises them.
  Rng rng(3);
  for (auto* p : bb.encoder().parameters()) {
    if (!p->decay) p->init_normal(rng, 0.3);
  }
  return bb;
}

TEST(Encoder, MatchesScalarReference) {
  const auto bb = toy(8, 2);
  const std::vector<TokenId> ids = {2, 5, 6, 4, 7, 8, 3};
  const Matrix h = bb.encoder().forward(ids);
  ASSERT_EQ(h.rows(), 7);
  ASSERT_EQ(h.cols(), 8);
  const Reference ref{bb.encoder()};
  const auto expect = ref.forward(ids);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t c = 0; c < 8; ++c) {
      EXPECT_NEAR(h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)), expect[i][c], 1e-10);
    }
  }
  const auto scores = bb.mlm_score(h.row(2));
  const auto expect_scores = ref.mlm(expect[2]);
  ASSERT_EQ(static_cast<std::size_t>(scores.size()), bb.vocab_size());
  for (std::size_t w = 0; w < expect_scores.size(); ++w) EXPECT_NEAR(scores(static_cast<Eigen::Index>(w)), expect_scores[w], 1e-10);
}

TEST(Encoder, RestrictedScoresEqualFullScoresAtThoseIds) {
  const auto bb = toy();
  const Matrix h = bb.encoder().forward(std::vector<TokenId>{2, 5, 4, 3});
  const RowVector state = h.row(2);
  const auto full = bb.mlm_score(state);
  const std::vector<TokenId> ids = {9, 5, 11};
  const auto part = bb.encoder().head_scores(bb.encoder().head_transform(state), ids);
  for (std::size_t j = 0; j < ids.size(); ++j) EXPECT_DOUBLE_EQ(part(static_cast<Eigen::Index>(j)), full(ids[j]));
  const std::vector<TokenId> bad = {static_cast<TokenId>(bb.vocab_size())};
  EXPECT_THROW(bb.encoder().head_scores(bb.encoder().head_transform(state), bad), ConfigError);
}

TEST(Backbone, EvalIsDeterministicAndDropoutIsNot) {
  const auto bb = toy();
  const std::vector<TokenId> ids = {2, 5, 6, 4, 7, 3};
  const Matrix a = bb.encoder().forward(ids);
  const Matrix b = bb.encoder().forward(ids);
  EXPECT_TRUE((a.array() == b.array()).all());
  Rng rng(1);
  const Matrix c = bb.encoder().forward(ids, nullptr, &rng);
  EXPECT_FALSE((a.array() == c.array()).all());
}

TEST(Backbone, RegisterSpecialsExtendsVocabularyAndEmbeddings) {
  auto bb = toy();
  const auto before = bb.vocab_size();
  Rng rng(4);
  const std::vector<std::string> specials = {"[Arg1]", "[Arg2]"};
  const auto ids = bb.register_special_tokens(specials, rng);
  EXPECT_EQ(ids, (std::vector<TokenId>{static_cast<TokenId>(before), static_cast<TokenId>(before + 1)}));
  EXPECT_EQ(bb.vocab_size(), before + 2);
  EXPECT_EQ(bb.encoder().word_embeddings.value.rows(), static_cast<Eigen::Index>(before + 2));
  EXPECT_EQ(bb.base_vocab_size(), before);
  EXPECT_EQ(bb.tokenize("[Arg1]"), std::vector<TokenId>{ids[0]});
  const double norm = bb.encoder().word_embeddings.value.row(ids[0]).norm();
  EXPECT_GT(norm, 0.0);
  EXPECT_LT(norm, 0.5);
  EXPECT_THROW(bb.register_special_tokens(specials, rng), ConfigError);
}

TEST(Backbone, EncodePromptShapeAndOutOfVocabulary) {
  auto bb = toy(32, 1);
  PromptEncoding enc;
  enc.token_ids = {2, 5, 6, 3};
  const Matrix h = bb.encode_prompt(enc);
  EXPECT_EQ(h.rows(), 4);
  EXPECT_EQ(h.cols(), 32);
  enc.token_ids.push_back(static_cast<TokenId>(bb.vocab_size()));
  EXPECT_THROW(bb.encode_prompt(enc), DataError);
}

TEST(Backbone, ToyConfigValidation) {
  ToyBackboneConfig cfg;
  cfg.d_h = 30;
  cfg.heads = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ToyBackboneConfig{};
  cfg.layers = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Pretrained, ExportedDirectoryLoadsToTheSameEncoder) {
  const auto bb = toy(8, 2);
  const auto dir = testing::temp_dir("bert_export");
  export_bert_directory(bb, dir);
  const auto loaded = load_pretrained_bert(dir);
  EXPECT_EQ(loaded.kind(), BackboneKind::Pretrained);
  EXPECT_EQ(loaded.vocab_size(), bb.vocab_size());
  EXPECT_EQ(loaded.tokenize("alpha so beta"), bb.tokenize("alpha so beta"));
  const std::vector<TokenId> ids = {2, 5, 6, 4, 7, 3};
  const Matrix a = bb.encoder().forward(ids);
  const Matrix b = loaded.encoder().forward(ids);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Pretrained, AcceptsUnprefixedAndLegacyNormNames) {
  const auto bb = toy(8, 1);
  const auto dir = testing::temp_dir("bert_legacy");
  export_bert_directory(bb, dir);
  auto tensors = read_safetensors(dir / "model.safetensors");
  std::map<std::string, Matrix> renamed;
  for (const auto& [name, t] : tensors) {
    std::string n = name.starts_with("bert.") ? name.substr(5) : name;
    if (n.ends_with("LayerNorm.weight")) n = n.substr(0, n.size() - 6) + "gamma";
    if (n.ends_with("LayerNorm.bias")) n = n.substr(0, n.size() - 4) + "beta";
    renamed.emplace(n, t.as_matrix());
  }
  std::map<std::string, const Matrix*> view;
  for (const auto& [n, m] : renamed) view.emplace(n, &m);
  write_safetensors(dir / "model.safetensors", view, TensorDtype::F32);
  const auto loaded = load_pretrained_bert(dir);
  const std::vector<TokenId> ids = {2, 5, 3};
  EXPECT_LT((bb.encoder().forward(ids) - loaded.encoder().forward(ids)).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Pretrained, MissingTensorAndBadConfigAreReported) {
  const auto bb = toy(8, 1);
  const auto dir = testing::temp_dir("bert_missing");
  export_bert_directory(bb, dir);
  auto tensors = read_safetensors(dir / "model.safetensors");
  std::map<std::string, Matrix> kept;
  for (const auto& [name, t] : tensors) {
    if (name.find("layer.0.attention.self.query.weight") == std::string::npos) kept.emplace(name, t.as_matrix());
  }
  std::map<std::string, const Matrix*> view;
  for (const auto& [n, m] : kept) view.emplace(n, &m);
  write_safetensors(dir / "model.safetensors", view, TensorDtype::F32);
  EXPECT_THROW(load_pretrained_bert(dir), DataError);
  EXPECT_THROW(load_pretrained_bert(testing::temp_dir("bert_nothing")), DataError);
}

TEST(Pretrained, ByteLevelBpeVocabularyIsRejected) {
  const auto bb = toy(8, 1);
  const auto dir = testing::temp_dir("bert_bpe");
  export_bert_directory(bb, dir);
  std::filesystem::rename(dir / "vocab.txt", dir / "vocab.json");
  EXPECT_THROW(load_pretrained_bert(dir), ConfigError);
}

TEST(Safetensors, RoundTripExactInDouble) {
  const auto dir = testing::temp_dir("st_roundtrip");
  Matrix m(2, 3);
  m << 1.5, -2.25, 3e-300, 0.1, 7.0, -0.0;
  Matrix v(1, 4);
  v << 1, 2, 3, 4;
  write_safetensors(dir / "t.safetensors", {{"m", &m}, {"v", &v}});
  const auto got = read_safetensors(dir / "t.safetensors");
  EXPECT_EQ(got.at("m").shape, (std::vector<std::int64_t>{2, 3}));
  EXPECT_EQ(got.at("v").shape, (std::vector<std::int64_t>{4}));
  EXPECT_TRUE((got.at("m").as_matrix().array() == m.array()).all());
  EXPECT_TRUE((got.at("v").as_matrix().array() == v.array()).all());
}

// Half-precision payloads built byte by byte: 1.0, -2.0 (F16) and 0.5, 3.0 (BF16).
TEST(Safetensors, ReadsHalfPrecision) {
  const auto dir = testing::temp_dir("st_half");
  const nlohmann::json header = {{"h", {{"dtype", "F16"}, {"shape", {2}}, {"data_offsets", {0, 4}}}},
                                 {"b", {{"dtype", "BF16"}, {"shape", {2}}, {"data_offsets", {4, 8}}}}};
  const std::string text = header.dump();
  std::ofstream out(dir / "h.safetensors", std::ios::binary);
  const std::uint64_t len = text.size();
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((len >> (8 * i)) & 0xff));
  out << text;
  for (std::uint16_t half : {0x3C00, 0xC000, 0x3F00, 0x4040}) {
    out.put(static_cast<char>(half & 0xff));
    out.put(static_cast<char>(half >> 8));
  }
  out.close();
  const auto got = read_safetensors(dir / "h.safetensors");
  EXPECT_EQ(got.at("h").data, (std::vector<double>{1.0, -2.0}));
  EXPECT_EQ(got.at("b").data, (std::vector<double>{0.5, 3.0}));
}

TEST(Safetensors, TruncatedFileIsRejected) {
  const auto dir = testing::temp_dir("st_bad");
  std::ofstream(dir / "bad.safetensors", std::ios::binary) << "abc";
  EXPECT_THROW(read_safetensors(dir / "bad.safetensors"), DataError);
}

}  // namespace
}  // namespace teprompt
