#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "teprompt/model.hpp"

namespace teprompt {

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::optional<double> dev_macro_f1;
  /// Resolved run configuration (free-form JSON, stored verbatim).
  nlohmann::json config;
};

struct LoadedCheckpoint {
  TepromptModel model;
  CheckpointInfo info;
};

/// Writes manifest.json, vocab.txt and weights.safetensors (float64) into
/// `dir`, creating it if needed.
void save_checkpoint(const TepromptModel& model, const std::filesystem::path& dir, const CheckpointInfo& info);

/// Restores a model saved by save_checkpoint. Throws DataError when files
/// are missing or inconsistent (hidden size, vocabulary size, tensor
/// shapes).
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace teprompt
