#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "teprompt/backbone.hpp"
#include "teprompt/corpus.hpp"
#include "teprompt/templating.hpp"
#include "teprompt/training.hpp"

namespace teprompt {

inline constexpr int kRunConfigVersion = 1;

struct CorpusConfig {
  /// "synthetic", a corpus file split by section, or a directory holding
  /// train/dev/test files (as written by `prepare`).
  std::string source = "synthetic";
  SyntheticOptions synthetic;

  bool operator==(const CorpusConfig&) const = default;
};

struct BackboneConfig {
  BackboneKind kind = BackboneKind::Toy;
  ToyBackboneConfig toy;  // toy.seed is derived from the training seed
  std::string pretrained_path;

  bool operator==(const BackboneConfig&) const = default;
};

/// Everything one command run depends on.
struct RunConfig {
  int version = kRunConfigVersion;
  CorpusConfig corpus;
  TemplateConfig templates;
  TrainingConfig training;
  BackboneConfig backbone;
  std::string output_dir = "runs/teprompt";

  /// Throws ConfigError on invalid values or missing referenced paths.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Defaults for desk-scale runs: the standard loss weights and batch
/// semantics with a learning rate and batch size that suit the toy
/// backbone (lr 1e-3, batch 16, 10 epochs).
RunConfig default_run_config();

// JSON conversion. Readers reject unknown keys and missing required
// fields with ConfigError.
nlohmann::ordered_json to_json(const TemplateConfig& c);
nlohmann::ordered_json to_json(const TrainingConfig& c);
nlohmann::ordered_json to_json(const ToyBackboneConfig& c);
nlohmann::ordered_json to_json(const SyntheticOptions& c);
nlohmann::ordered_json to_json(const RunConfig& c);
nlohmann::ordered_json to_json(const SplitManifest& m);

TemplateConfig template_config_from_json(const nlohmann::json& j);
TrainingConfig training_config_from_json(const nlohmann::json& j);
ToyBackboneConfig toy_config_from_json(const nlohmann::json& j);
SyntheticOptions synthetic_options_from_json(const nlohmann::json& j);
/// Fields absent from `j` keep their values from `base`.
RunConfig run_config_from_json(const nlohmann::json& j, const RunConfig& base = default_run_config());
SplitManifest manifest_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& config);

/// FNV-1a digest of the canonical JSON form.
std::string config_hash(const RunConfig& config);

}  // namespace teprompt
