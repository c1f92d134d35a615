#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>

#include "teprompt/backbone.hpp"
#include "teprompt/fusion.hpp"
#include "teprompt/heads.hpp"
#include "teprompt/loss.hpp"
#include "teprompt/templating.hpp"
#include "teprompt/variant.hpp"

namespace teprompt {

/// Unweighted per-head cross-entropies of one instance. Heads whose loss is
/// inactive (or masked) report 0.
struct InstanceLosses {
  double drr = 0.0;
  double ssc = 0.0;
  double acp = 0.0;
  bool acp_masked = false;
};

/// Backbone, fusion gates, answer spaces and prompt template of one model
/// variant.
class TepromptModel {
 public:
  TepromptModel(Backbone backbone, TemplateConfig templates, AnswerSpaces spaces, FusionParameters fusion,
                AblationVariant variant);

  /// Registers [Arg1]/[Arg2] on the backbone (when missing), builds the
  /// answer spaces from `train` and initialises the gates. Every random draw
  /// comes from `seed`.
  static TepromptModel create(Backbone backbone, const TemplateConfig& templates,
                              std::span<const DiscourseInstance> train, AblationVariant variant, std::uint64_t seed);

  const Backbone& backbone() const { return *backbone_; }
  Backbone& backbone() { return *backbone_; }
  const FusionParameters& fusion() const { return fusion_; }
  FusionParameters& fusion() { return fusion_; }
  const AnswerSpaces& spaces() const { return spaces_; }
  const TemplateConfig& templates() const { return builder_->config(); }
  AblationVariant variant() const { return variant_; }
  VariantSpec spec() const { return spec_of(variant_); }

  PromptEncoding encode(const DiscourseInstance& instance) const;
  PromptEncoding encode(std::string_view arg1, std::string_view arg2) const;

  /// Eval-mode head outputs.
  HeadOutputs forward(const PromptEncoding& encoding) const;

  /// Eval-mode weighted loss sum_t weight_t * L_t (used for gradient checks).
  double loss(const PromptEncoding& encoding, const GoldTargets& gold, const LossWeights& weights) const;

  /// One forward/backward pass. Adds scale * d(weighted loss)/d(theta) to
  /// every parameter's grad; dropout is active when `dropout_rng` is given.
  InstanceLosses accumulate_gradients(const PromptEncoding& encoding, const GoldTargets& gold,
                                      const LossWeights& weights, double scale, Rng* dropout_rng);

  /// Encoder parameters followed by the four gate matrices.
  ParameterList parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  std::unique_ptr<Backbone> backbone_;  // heap-held so the builder's tokenizer reference survives moves
  AnswerSpaces spaces_;
  FusionParameters fusion_;
  AblationVariant variant_;
  std::unique_ptr<PromptBuilder> builder_;
};

}  // namespace teprompt
