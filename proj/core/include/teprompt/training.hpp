#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "teprompt/corpus.hpp"
#include "teprompt/evaluation.hpp"
#include "teprompt/heads.hpp"
#include "teprompt/model.hpp"
#include "teprompt/variant.hpp"

namespace teprompt {

struct TrainingConfig {
  double beta = 0.3;
  double gamma = 0.4;
  double learning_rate = 1e-5;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 7;
  AblationVariant variant = AblationVariant::Teprompt;

  /// Throws ConfigError on negative weights, zero batch size, etc.
  void validate() const;
  bool operator==(const TrainingConfig&) const = default;
};

/// L_d + beta * L_s + gamma * L_c with the configured weights.
inline double joint_loss(double l_drr, double l_ssc, double l_acp, const TrainingConfig& cfg) {
  return joint_loss(l_drr, l_ssc, l_acp, cfg.beta, cfg.gamma);
}

/// Mean of task_loss over a batch of probability vectors.
double mean_task_loss(std::span<const Vector> probs, std::span<const std::size_t> gold);

/// Loss weights of a variant: DRR carries weight 1 and the auxiliaries beta
/// and gamma; a variant trained on a single auxiliary task weights it 1.
LossWeights loss_weights(const VariantSpec& spec, const TrainingConfig& cfg);

/// Gold answer indices of an instance. DRR: the annotated connective when
/// it is one of its sense's answer words, else the sense's first word. ACP:
/// empty (logged at debug level) when the connective is not in the space.
GoldTargets gold_targets(const DiscourseInstance& instance, const AnswerSpaces& spaces);

/// Adam with decoupled weight decay. Parameters whose `decay` flag is false
/// are not decayed.
class AdamW {
 public:
  AdamW(ParameterList params, double learning_rate, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double epsilon = 1e-8);

  void step();
  std::size_t steps() const { return t_; }
  double learning_rate() const { return lr_; }

 private:
  ParameterList params_;
  std::vector<Matrix> m_, v_;
  double lr_, wd_, b1_, b2_, eps_;
  std::size_t t_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss_drr = 0.0;
  double loss_ssc = 0.0;
  double loss_acp = 0.0;
  double loss = 0.0;
  std::size_t acp_masked = 0;
  std::optional<EvaluationReport> dev;
  double seconds = 0.0;
};

struct TrainingResult {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_dev_macro_f1 = 0.0;
  std::size_t steps = 0;
};

struct TrainingOptions {
  /// Line-delimited JSON records (one header, one per epoch).
  std::ostream* log = nullptr;
  /// Called after each epoch (after the dev evaluation).
  std::function<void(const EpochRecord&)> on_epoch;
  /// Called whenever the dev macro-F1 improves, with the model in its best
  /// state; used to persist checkpoints.
  std::function<void(const TepromptModel&, const EpochRecord&)> on_best;
};

/// Trains `model` on `train` with the weighted joint loss, evaluating `dev`
/// after every epoch. On return the model holds the parameters of the epoch
/// with the best dev macro-F1 (the last epoch when `dev` is empty). Throws
/// TrainingError on a non-finite loss, naming the batch and its instances.
TrainingResult train(TepromptModel& model, std::span<const DiscourseInstance> train_set,
                     std::span<const DiscourseInstance> dev_set, const TrainingConfig& cfg,
                     const TrainingOptions& options = {});

}  // namespace teprompt
