#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "teprompt/config.hpp"
#include "teprompt/evaluation.hpp"
#include "teprompt/model.hpp"
#include "teprompt/training.hpp"

namespace teprompt {

struct PreparedCorpus {
  CorpusSplit split;
  SplitManifest manifest;
  /// Differences against the PDTB 3.0 reference counts; only filled for
  /// file sources split by section.
  std::vector<std::string> reference_diff;
};

/// Materialises the configured corpus: synthetic generation, a single file
/// split by section, or a directory with train/dev/test files. Throws
/// DataError when the source cannot be read.
PreparedCorpus load_run_corpus(const CorpusConfig& config);

/// Toy backbone over the training vocabulary or the configured pretrained
/// directory. The toy initialisation derives from the training seed.
Backbone make_backbone(const RunConfig& config, std::span<const DiscourseInstance> train);

/// Backbone plus answer spaces and gates for `variant`.
TepromptModel build_model(const RunConfig& config, AblationVariant variant, std::span<const DiscourseInstance> train);

struct AblationRow {
  AblationVariant variant;
  EvaluationReport report;
  TrainingResult training;
  double seconds = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::optional<AblationVariant> failed_variant;
  std::string error;

  bool complete() const { return !failed_variant; }
  std::vector<EvaluationReport> reports() const;
};

using ModelFactory = std::function<TepromptModel(AblationVariant)>;

/// Trains and tests each variant in turn under `base` (only the variant
/// changes). A failing variant stops the run; the rows finished so far are
/// kept and the failure recorded.
AblationResult run_ablation_matrix(const CorpusSplit& split, const TrainingConfig& base, const ModelFactory& factory,
                                   std::span<const AblationVariant> variants = kAllVariants,
                                   const std::string& config_hash = {});

AblationResult run_ablation_matrix(const CorpusSplit& split, const RunConfig& config,
                                   std::span<const AblationVariant> variants = kAllVariants);

}  // namespace teprompt
