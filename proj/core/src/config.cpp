#include "teprompt/config.hpp"

#include <fstream>
#include <initializer_list>
#include <string_view>

#include "teprompt/errors.hpp"
#include "teprompt/evaluation.hpp"

namespace teprompt {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

RunConfig default_run_config() {
  RunConfig c;
  c.training.learning_rate = 1e-3;
  c.training.batch_size = 16;
  c.training.epochs = 10;
  return c;
}

void RunConfig::validate() const {
  if (version != kRunConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(version) + " (expected " +
                      std::to_string(kRunConfigVersion) + ")");
  }
  training.validate();
  if (corpus.source.empty()) throw ConfigError("corpus.source is empty");
  if (corpus.source == "synthetic") {
    if (corpus.synthetic.num_train == 0 || corpus.synthetic.num_test == 0) {
      throw ConfigError("synthetic corpus needs positive num_train and num_test");
    }
  } else if (!std::filesystem::exists(corpus.source)) {
    throw ConfigError("corpus source " + corpus.source + " does not exist");
  }
  if (backbone.kind == BackboneKind::Toy) {
    backbone.toy.validate();
    if (backbone.toy.max_positions < templates.max_total_tokens) {
      throw ConfigError("toy backbone max_positions (" + std::to_string(backbone.toy.max_positions) +
                        ") is below template max_total_tokens (" + std::to_string(templates.max_total_tokens) + ")");
    }
  } else if (backbone.pretrained_path.empty() || !std::filesystem::is_directory(backbone.pretrained_path)) {
    throw ConfigError("pretrained backbone directory \"" + backbone.pretrained_path + "\" does not exist");
  }
  if (output_dir.empty()) throw ConfigError("output_dir is empty");
}

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown key \"" + it.key() + "\" in " + std::string(where));
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, std::string_view where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + "." + key + " has the wrong type");
  }
}

}  // namespace

ojson to_json(const TemplateConfig& c) {
  return {{"max_total_tokens", c.max_total_tokens},
          {"max_arg_tokens", c.max_arg_tokens},
          {"ssc_text", c.ssc_text},
          {"acp_text", c.acp_text}};
}

TemplateConfig template_config_from_json(const json& j) {
  check_keys(j, {"max_total_tokens", "max_arg_tokens", "ssc_text", "acp_text"}, "template");
  TemplateConfig c;
  read(j, "max_total_tokens", c.max_total_tokens, "template");
  read(j, "max_arg_tokens", c.max_arg_tokens, "template");
  read(j, "ssc_text", c.ssc_text, "template");
  read(j, "acp_text", c.acp_text, "template");
  return c;
}

ojson to_json(const TrainingConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"beta", c.beta},
          {"gamma", c.gamma},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"weight_decay", c.weight_decay},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"seed", c.seed}};
}

TrainingConfig training_config_from_json(const json& j) {
  check_keys(j,
             {"variant", "beta", "gamma", "learning_rate", "batch_size", "epochs", "weight_decay", "adam_beta1",
              "adam_beta2", "adam_epsilon", "seed"},
             "training");
  TrainingConfig c;
  std::string variant(to_string(c.variant));
  read(j, "variant", variant, "training");
  c.variant = parse_variant_or_throw(variant);
  read(j, "beta", c.beta, "training");
  read(j, "gamma", c.gamma, "training");
  read(j, "learning_rate", c.learning_rate, "training");
  read(j, "batch_size", c.batch_size, "training");
  read(j, "epochs", c.epochs, "training");
  read(j, "weight_decay", c.weight_decay, "training");
  read(j, "adam_beta1", c.adam_beta1, "training");
  read(j, "adam_beta2", c.adam_beta2, "training");
  read(j, "adam_epsilon", c.adam_epsilon, "training");
  read(j, "seed", c.seed, "training");
  return c;
}

ojson to_json(const ToyBackboneConfig& c) {
  return {{"d_h", c.d_h},     {"layers", c.layers},   {"heads", c.heads},
          {"ffn", c.ffn},     {"max_positions", c.max_positions}, {"dropout", c.dropout}};
}

ToyBackboneConfig toy_config_from_json(const json& j) {
  check_keys(j, {"d_h", "layers", "heads", "ffn", "max_positions", "dropout"}, "backbone.toy");
  ToyBackboneConfig c;
  read(j, "d_h", c.d_h, "backbone.toy");
  read(j, "layers", c.layers, "backbone.toy");
  read(j, "heads", c.heads, "backbone.toy");
  read(j, "ffn", c.ffn, "backbone.toy");
  read(j, "max_positions", c.max_positions, "backbone.toy");
  read(j, "dropout", c.dropout, "backbone.toy");
  return c;
}

ojson to_json(const SyntheticOptions& c) {
  return {{"num_train", c.num_train}, {"num_dev", c.num_dev}, {"num_test", c.num_test}, {"seed", c.seed}};
}

SyntheticOptions synthetic_options_from_json(const json& j) {
  check_keys(j, {"num_train", "num_dev", "num_test", "seed"}, "corpus.synthetic");
  SyntheticOptions c;
  read(j, "num_train", c.num_train, "corpus.synthetic");
  read(j, "num_dev", c.num_dev, "corpus.synthetic");
  read(j, "num_test", c.num_test, "corpus.synthetic");
  read(j, "seed", c.seed, "corpus.synthetic");
  return c;
}

ojson to_json(const RunConfig& c) {
  ojson j;
  j["version"] = c.version;
  j["corpus"] = {{"source", c.corpus.source}, {"synthetic", to_json(c.corpus.synthetic)}};
  j["template"] = to_json(c.templates);
  j["training"] = to_json(c.training);
  j["backbone"] = {{"kind", to_string(c.backbone.kind)},
                   {"toy", to_json(c.backbone.toy)},
                   {"pretrained_path", c.backbone.pretrained_path}};
  j["output_dir"] = c.output_dir;
  return j;
}

RunConfig run_config_from_json(const json& j, const RunConfig& base) {
  check_keys(j, {"version", "corpus", "template", "training", "backbone", "output_dir"}, "config");
  RunConfig c = base;
  read(j, "version", c.version, "config");
  if (c.version != kRunConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(c.version));
  }
  // Nested objects are merged field by field over `base`.
  auto merge = [](ojson into, const json& from) {
    for (auto it = from.begin(); it != from.end(); ++it) into[it.key()] = it.value();
    return into;
  };
  if (auto it = j.find("corpus"); it != j.end()) {
    check_keys(*it, {"source", "synthetic"}, "corpus");
    read(*it, "source", c.corpus.source, "corpus");
    if (auto s = it->find("synthetic"); s != it->end()) {
      check_keys(*s, {"num_train", "num_dev", "num_test", "seed"}, "corpus.synthetic");
      c.corpus.synthetic = synthetic_options_from_json(merge(to_json(c.corpus.synthetic), *s));
    }
  }
  if (auto it = j.find("template"); it != j.end()) {
    check_keys(*it, {"max_total_tokens", "max_arg_tokens", "ssc_text", "acp_text"}, "template");
    c.templates = template_config_from_json(merge(to_json(c.templates), *it));
  }
  if (auto it = j.find("training"); it != j.end()) {
    check_keys(*it,
               {"variant", "beta", "gamma", "learning_rate", "batch_size", "epochs", "weight_decay", "adam_beta1",
                "adam_beta2", "adam_epsilon", "seed"},
               "training");
    c.training = training_config_from_json(merge(to_json(c.training), *it));
  }
  if (auto it = j.find("backbone"); it != j.end()) {
    check_keys(*it, {"kind", "toy", "pretrained_path"}, "backbone");
    std::string kind(to_string(c.backbone.kind));
    read(*it, "kind", kind, "backbone");
    if (kind == "toy") c.backbone.kind = BackboneKind::Toy;
    else if (kind == "pretrained") c.backbone.kind = BackboneKind::Pretrained;
    else throw ConfigError("backbone.kind must be \"toy\" or \"pretrained\", not \"" + kind + "\"");
    if (auto t = it->find("toy"); t != it->end()) {
      check_keys(*t, {"d_h", "layers", "heads", "ffn", "max_positions", "dropout"}, "backbone.toy");
      c.backbone.toy = toy_config_from_json(merge(to_json(c.backbone.toy), *t));
    }
    read(*it, "pretrained_path", c.backbone.pretrained_path, "backbone");
  }
  read(j, "output_dir", c.output_dir, "config");
  return c;
}

ojson to_json(const SplitManifest& m) {
  ojson j;
  for (const auto& [name, counts] : {std::pair{"train", &m.train}, std::pair{"dev", &m.dev}, std::pair{"test", &m.test}}) {
    ojson row;
    std::size_t total = 0;
    for (Sense s : kAllSenses) {
      row[std::string(to_string(s))] = (*counts)[index_of(s)];
      total += (*counts)[index_of(s)];
    }
    row["total"] = total;
    j[name] = row;
  }
  j["excluded"] = m.excluded;
  return j;
}

SplitManifest manifest_from_json(const json& j) {
  try {
    SplitManifest m;
    for (Sense s : kAllSenses) {
      const auto key = std::string(to_string(s));
      m.train[index_of(s)] = j.at("train").at(key).get<std::size_t>();
      m.dev[index_of(s)] = j.at("dev").at(key).get<std::size_t>();
      m.test[index_of(s)] = j.at("test").at(key).get<std::size_t>();
    }
    m.excluded = j.value("excluded", std::size_t{0});
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed split manifest: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const std::filesystem::path& path, const RunConfig& config) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json(config).dump(2) << '\n';
}

std::string config_hash(const RunConfig& config) { return fnv1a_hex(to_json(config).dump()); }

}  // namespace teprompt
