#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "teprompt/backbone.hpp"
#include "teprompt/fusion.hpp"
#include "teprompt/templating.hpp"
#include "teprompt/variant.hpp"
#include "teprompt/verbalizer.hpp"

namespace teprompt {

/// The three answer spaces plus the connective -> sense map the ACP head
/// verbalizes through.
struct AnswerSpaces {
  AnswerSpace drr;
  AnswerSpace ssc;
  AnswerSpace acp;
  ConnectiveSenseMap connectives;

  const AnswerSpace& get(Task task) const;
};

AnswerSpaces build_answer_spaces(std::span<const DiscourseInstance> train, const Tokenizer& tokenizer);

/// Restricted scores and probabilities of every head present in the prompt
/// (absent heads leave their vectors empty).
struct HeadOutputs {
  Vector drr_scores, ssc_scores, acp_scores;
  Vector drr_probs, ssc_probs, acp_probs;
  /// State the DRR head scored: h~_m, or the raw DRR [MASK] state when the
  /// variant does not fuse.
  Vector fused_state;
  Vector drr_mask_state;

  const Vector& probs(Task task) const;
};

/// Reads the mask and [CLS] rows of `hidden` named by `encoding`, fuses
/// according to `mode`, and scores each head through the backbone's MLM
/// head restricted to its answer space. Auxiliary heads read their raw
/// [MASK] states. Throws ConfigError when an answer id is outside the
/// vocabulary and std::invalid_argument when the layout lacks a state that
/// `mode` needs.
HeadOutputs score_heads(const Matrix& hidden, const PromptEncoding& encoding, const FusionParameters& params,
                        const AnswerSpaces& spaces, const Backbone& backbone, FusionMode mode = FusionMode::TwoGate);

/// Answer-space indices of an instance's gold answers; `acp` is empty when
/// the connective has no ACP entry.
struct GoldTargets {
  std::size_t drr = 0;
  std::size_t ssc = 0;
  std::optional<std::size_t> acp;
};

}  // namespace teprompt
