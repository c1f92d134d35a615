#include "teprompt/checkpoint.hpp"

#include <fstream>
#include <map>

#include "teprompt/config.hpp"
#include "teprompt/errors.hpp"
#include "teprompt/safetensors.hpp"

namespace teprompt {

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::ordered_json encoder_json(const EncoderConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"hidden", c.hidden},
          {"layers", c.layers},         {"heads", c.heads},
          {"ffn", c.ffn_dim()},         {"max_positions", c.max_positions},
          {"type_vocab", c.type_vocab}, {"dropout", c.dropout},
          {"layer_norm_eps", c.layer_norm_eps}, {"init_std", c.init_std}};
}

EncoderConfig encoder_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ffn = j.at("ffn").get<std::size_t>();
  c.max_positions = j.at("max_positions").get<std::size_t>();
  c.type_vocab = j.at("type_vocab").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
  c.init_std = j.at("init_std").get<double>();
  return c;
}

}  // namespace

void save_checkpoint(const TepromptModel& model, const std::filesystem::path& dir, const CheckpointInfo& info) {
  std::filesystem::create_directories(dir);
  const Backbone& bb = model.backbone();
  const Tokenizer& tok = bb.tokenizer();

  nlohmann::ordered_json m;
  m["format"] = "teprompt-checkpoint";
  m["version"] = kCheckpointVersion;
  m["variant"] = to_string(model.variant());
  m["seed"] = info.seed;
  m["epoch"] = info.epoch;
  m["step"] = info.step;
  m["dev_macro_f1"] = info.dev_macro_f1 ? nlohmann::json(*info.dev_macro_f1) : nlohmann::json(nullptr);
  m["backbone"] = {{"kind", to_string(bb.kind())},
                   {"source", bb.source()},
                   {"tokenizer", tok.kind() == TokenizerKind::Word ? "word" : "wordpiece"},
                   {"lowercase", tok.lowercase()},
                   {"base_vocab_size", bb.base_vocab_size()},
                   {"special_tokens", tok.registered_specials()},
                   {"encoder", encoder_json(bb.encoder().config())}};
  m["template"] = to_json(model.templates());

  nlohmann::ordered_json acp = nlohmann::json::array();
  for (const auto& e : model.spaces().acp.entries()) {
    acp.push_back({{"token", e.token}, {"surface", e.surface}, {"members", e.members}});
  }
  nlohmann::ordered_json senses;
  for (const auto& [surface, sense] : model.spaces().connectives.mapping) {
    nlohmann::ordered_json row{{"sense", to_string(sense)}};
    if (auto it = model.spaces().connectives.frequencies.find(surface);
        it != model.spaces().connectives.frequencies.end()) {
      row["counts"] = it->second;
    }
    senses[surface] = row;
  }
  m["acp_space"] = acp;
  m["connective_senses"] = senses;
  m["config"] = info.config;

  std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';
  tok.vocab().save(dir / "vocab.txt");

  std::map<std::string, const Matrix*> tensors;
  for (const auto* p : model.parameters()) tensors.emplace(p->name, &p->value);
  write_safetensors(dir / "weights.safetensors", tensors, TensorDtype::F64, {{"format", "teprompt"}});
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("no checkpoint at " + dir.string() + " (missing manifest.json)");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }

  try {
    if (m.at("format") != "teprompt-checkpoint" || m.at("version").get<int>() != kCheckpointVersion) {
      throw DataError(manifest_path.string() + " is not a version-" + std::to_string(kCheckpointVersion) +
                      " checkpoint manifest");
    }
    const auto& b = m.at("backbone");
    const Vocabulary full = Vocabulary::load(dir / "vocab.txt");
    const auto base_size = b.at("base_vocab_size").get<std::size_t>();
    if (base_size > full.size()) throw DataError("checkpoint base vocabulary exceeds vocab.txt");
    std::vector<std::string> base(full.tokens().begin(), full.tokens().begin() + static_cast<std::ptrdiff_t>(base_size));
    const auto kind = b.at("tokenizer").get<std::string>() == "word" ? TokenizerKind::Word : TokenizerKind::WordPiece;
    Tokenizer tokenizer(kind, Vocabulary(std::move(base)), b.at("lowercase").get<bool>());
    const auto specials = b.at("special_tokens").get<std::vector<std::string>>();
    tokenizer.register_special_tokens(specials);
    if (tokenizer.vocab().tokens() != full.tokens()) {
      throw DataError(dir.string() + ": vocab.txt does not match the recorded special tokens");
    }

    const EncoderConfig ec = encoder_from_json(b.at("encoder"));
    if (ec.vocab_size != tokenizer.vocab_size()) {
      throw DataError("checkpoint embedding table has " + std::to_string(ec.vocab_size) + " rows but vocab.txt has " +
                      std::to_string(tokenizer.vocab_size()) + " tokens");
    }
    Encoder encoder(ec, 0);
    FusionParameters fusion(ec.hidden, 0);

    const auto weights_path = dir / "weights.safetensors";
    const auto tensors = read_safetensors(weights_path);
    ParameterList params = encoder.parameters();
    for (auto* p : fusion.parameters()) params.push_back(p);
    for (auto* p : params) {
      auto it = tensors.find(p->name);
      if (it == tensors.end()) throw DataError(weights_path.string() + " lacks tensor " + p->name);
      Matrix value = it->second.as_matrix();
      if (value.rows() != p->value.rows() || value.cols() != p->value.cols()) {
        throw DataError(weights_path.string() + ": " + p->name + " has shape " + std::to_string(value.rows()) + "x" +
                        std::to_string(value.cols()) + ", expected " + std::to_string(p->value.rows()) + "x" +
                        std::to_string(p->value.cols()));
      }
      p->value = std::move(value);
    }

    const auto bkind = b.at("kind").get<std::string>() == "toy" ? BackboneKind::Toy : BackboneKind::Pretrained;
    Backbone backbone(std::move(tokenizer), std::move(encoder), bkind, b.value("source", std::string()));

    AnswerSpaces spaces;
    spaces.drr = build_drr_space(backbone.tokenizer());
    spaces.ssc = build_ssc_space(backbone.tokenizer());
    std::vector<AnswerEntry> entries;
    for (const auto& e : m.at("acp_space")) {
      AnswerEntry entry;
      entry.token = e.at("token").get<TokenId>();
      entry.surface = e.at("surface").get<std::string>();
      entry.members = e.at("members").get<std::vector<std::string>>();
      entries.push_back(std::move(entry));
    }
    spaces.acp = make_acp_space(std::move(entries));
    for (const auto& [surface, row] : m.at("connective_senses").items()) {
      spaces.connectives.mapping[surface] = parse_sense_or_throw(row.at("sense").get<std::string>());
      if (row.contains("counts")) {
        spaces.connectives.frequencies[surface] = row.at("counts").get<std::array<std::size_t, kNumSenses>>();
      }
    }

    const TemplateConfig templates = template_config_from_json(m.at("template"));
    const AblationVariant variant = parse_variant_or_throw(m.at("variant").get<std::string>());

    CheckpointInfo info;
    info.seed = m.at("seed").get<std::uint64_t>();
    info.epoch = m.at("epoch").get<std::size_t>();
    info.step = m.at("step").get<std::size_t>();
    if (!m.at("dev_macro_f1").is_null()) info.dev_macro_f1 = m.at("dev_macro_f1").get<double>();
    info.config = m.value("config", nlohmann::json());

    return {TepromptModel(std::move(backbone), templates, std::move(spaces), std::move(fusion), variant),
            std::move(info)};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
}

}  // namespace teprompt
