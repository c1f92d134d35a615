#include "teprompt/backbone.hpp"

#include <fstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "teprompt/errors.hpp"
#include "teprompt/safetensors.hpp"
#include "teprompt/verbalizer.hpp"

namespace teprompt {

std::string_view to_string(BackboneKind kind) { return kind == BackboneKind::Toy ? "toy" : "pretrained"; }

void ToyBackboneConfig::validate() const {
  if (d_h == 0 || heads == 0 || d_h % heads != 0) {
    throw ConfigError("toy backbone d_h (" + std::to_string(d_h) + ") must be a positive multiple of heads (" +
                      std::to_string(heads) + ")");
  }
  if (layers == 0) throw ConfigError("toy backbone needs at least one layer");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

Backbone::Backbone(Tokenizer tokenizer, Encoder encoder, BackboneKind kind, std::string source)
    : tokenizer_(std::move(tokenizer)),
      encoder_(std::move(encoder)),
      kind_(kind),
      source_(std::move(source)),
      base_vocab_size_(tokenizer_.vocab_size() - tokenizer_.registered_specials().size()) {
  if (tokenizer_.vocab_size() != encoder_.vocab_size()) {
    throw ConfigError("tokenizer vocabulary (" + std::to_string(tokenizer_.vocab_size()) +
                      ") and embedding table (" + std::to_string(encoder_.vocab_size()) + ") disagree in size");
  }
}

std::vector<TokenId> Backbone::register_special_tokens(std::span<const std::string> surfaces, Rng& rng) {
  auto ids = tokenizer_.register_special_tokens(surfaces);
  encoder_.extend_vocab(ids.size(), rng);
  return ids;
}

Matrix Backbone::encode_prompt(const PromptEncoding& encoding) const {
  for (TokenId id : encoding.token_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size()) {
      throw DataError("prompt token id " + std::to_string(id) + " outside vocabulary of size " +
                      std::to_string(vocab_size()));
    }
  }
  return encoder_.forward(encoding.token_ids);
}

std::vector<std::string> toy_vocabulary_texts(std::span<const DiscourseInstance> instances,
                                              const TemplateConfig& templates) {
  std::vector<std::string> texts;
  texts.reserve(instances.size() * 3 + 32);
  for (const auto& [sense, words] : drr_answer_table()) {
    for (auto w : words) texts.emplace_back(w);
  }
  for (Sense s : kAllSenses) texts.emplace_back(to_string(s));
  auto strip_slots = [](std::string text) {
    for (auto slot : {kArg1Token, kArg2Token, kMaskToken}) {
      for (auto pos = text.find(slot); pos != std::string::npos; pos = text.find(slot)) {
        text.replace(pos, slot.size(), " ");
      }
    }
    return text;
  };
  texts.push_back(strip_slots(templates.ssc_text));
  texts.push_back(strip_slots(templates.acp_text));
  for (const auto& inst : instances) {
    texts.push_back(inst.arg1);
    texts.push_back(inst.arg2);
    texts.push_back(inst.connective);
  }
  return texts;
}

Backbone make_toy_backbone(std::span<const std::string> texts, const ToyBackboneConfig& config) {
  config.validate();
  Tokenizer tokenizer = build_word_tokenizer(texts);
  EncoderConfig ec;
  ec.vocab_size = tokenizer.vocab_size();
  ec.hidden = config.d_h;
  ec.layers = config.layers;
  ec.heads = config.heads;
  ec.ffn = config.ffn;
  ec.max_positions = config.max_positions;
  ec.dropout = config.dropout;
  ec.layer_norm_eps = 1e-12;
  Encoder encoder(ec, config.seed);
  return Backbone(std::move(tokenizer), std::move(encoder), BackboneKind::Toy);
}

// ---------------------------------------------------------------------------
// BERT-family import/export

namespace {

using TensorMap = std::map<std::string, NamedTensor>;

const NamedTensor& find_tensor(const TensorMap& tensors, const std::string& name,
                               const std::filesystem::path& file) {
  for (const auto& candidate : {"bert." + name, name}) {
    if (auto it = tensors.find(candidate); it != tensors.end()) return it->second;
  }
  // Older checkpoints name layer-norm parameters gamma/beta.
  auto legacy = name;
  if (legacy.ends_with("LayerNorm.weight")) legacy.replace(legacy.size() - 6, 6, "gamma");
  else if (legacy.ends_with("LayerNorm.bias")) legacy.replace(legacy.size() - 4, 4, "beta");
  for (const auto& candidate : {"bert." + legacy, legacy}) {
    if (auto it = tensors.find(candidate); it != tensors.end()) return it->second;
  }
  throw DataError(file.string() + " lacks tensor " + name);
}

void assign(Parameter& param, const NamedTensor& tensor, const std::filesystem::path& file) {
  Matrix m = tensor.as_matrix();
  if (m.rows() != param.value.rows() || m.cols() != param.value.cols()) {
    throw DataError(file.string() + ": tensor for " + param.name + " has shape " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()) + ", expected " + std::to_string(param.value.rows()) + "x" +
                    std::to_string(param.value.cols()));
  }
  param.value = std::move(m);
}

}  // namespace

Backbone load_pretrained_bert(const std::filesystem::path& dir, double dropout) {
  const auto config_path = dir / "config.json";
  std::ifstream in(config_path);
  if (!in) throw DataError("cannot open " + config_path.string());
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(config_path.string() + ": " + e.what());
  }
  if (!std::filesystem::exists(dir / "vocab.txt") && std::filesystem::exists(dir / "vocab.json")) {
    throw ConfigError(dir.string() + " uses a byte-level BPE vocabulary (vocab.json); only WordPiece vocab.txt "
                      "encoders are supported");
  }
  if (cfg.value("hidden_act", std::string("gelu")) != "gelu") {
    throw ConfigError("only exact-GELU BERT encoders are supported (hidden_act = \"" +
                      cfg.value("hidden_act", std::string()) + "\")");
  }

  Vocabulary vocab = Vocabulary::load(dir / "vocab.txt");
  Tokenizer tokenizer(TokenizerKind::WordPiece, std::move(vocab), cfg.value("do_lower_case", true));

  EncoderConfig ec;
  ec.vocab_size = cfg.at("vocab_size").get<std::size_t>();
  ec.hidden = cfg.at("hidden_size").get<std::size_t>();
  ec.layers = cfg.at("num_hidden_layers").get<std::size_t>();
  ec.heads = cfg.at("num_attention_heads").get<std::size_t>();
  ec.ffn = cfg.at("intermediate_size").get<std::size_t>();
  ec.max_positions = cfg.at("max_position_embeddings").get<std::size_t>();
  ec.type_vocab = cfg.value("type_vocab_size", std::size_t{2});
  ec.layer_norm_eps = cfg.value("layer_norm_eps", 1e-12);
  ec.dropout = dropout;
  if (ec.vocab_size != tokenizer.vocab_size()) {
    throw DataError("config.json vocab_size " + std::to_string(ec.vocab_size) + " disagrees with vocab.txt (" +
                    std::to_string(tokenizer.vocab_size()) + " lines)");
  }
  Encoder encoder(ec, 0);

  const auto weights_path = dir / "model.safetensors";
  const auto tensors = read_safetensors(weights_path);
  for (auto* p : encoder.parameters()) assign(*p, find_tensor(tensors, p->name, weights_path), weights_path);
  spdlog::info("loaded pretrained encoder from {} (d_h={}, layers={}, vocab={})", dir.string(), ec.hidden,
               ec.layers, ec.vocab_size);
  return Backbone(std::move(tokenizer), std::move(encoder), BackboneKind::Pretrained, dir.string());
}

void export_bert_directory(const Backbone& backbone, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& enc = backbone.encoder();
  const auto& ec = enc.config();
  const auto base = static_cast<Eigen::Index>(backbone.base_vocab_size());

  nlohmann::ordered_json cfg;
  cfg["model_type"] = "bert";
  cfg["vocab_size"] = backbone.base_vocab_size();
  cfg["hidden_size"] = ec.hidden;
  cfg["num_hidden_layers"] = ec.layers;
  cfg["num_attention_heads"] = ec.heads;
  cfg["intermediate_size"] = ec.ffn_dim();
  cfg["max_position_embeddings"] = ec.max_positions;
  cfg["type_vocab_size"] = ec.type_vocab;
  cfg["layer_norm_eps"] = ec.layer_norm_eps;
  cfg["hidden_act"] = "gelu";
  cfg["do_lower_case"] = backbone.tokenizer().lowercase();
  std::ofstream(dir / "config.json") << cfg.dump(2) << '\n';

  const auto& tokens = backbone.tokenizer().vocab().tokens();
  {
    std::ofstream out(dir / "vocab.txt", std::ios::binary);
    for (Eigen::Index i = 0; i < base; ++i) out << tokens[static_cast<std::size_t>(i)] << '\n';
  }

  std::map<std::string, Matrix> owned;
  for (const auto* p : enc.parameters()) {
    Matrix m = p->value;
    if (p == &enc.word_embeddings) m = p->value.topRows(base);
    if (p == &enc.decoder_bias) m = p->value.leftCols(base);
    const std::string prefix = p->name.starts_with("cls.") ? "" : "bert.";
    owned.emplace(prefix + p->name, std::move(m));
  }
  std::map<std::string, const Matrix*> view;
  for (const auto& [name, m] : owned) view.emplace(name, &m);
  write_safetensors(dir / "model.safetensors", view, TensorDtype::F32, {{"format", "pt"}});
}

}  // namespace teprompt
