#include "teprompt/heads.hpp"

#include <stdexcept>
#include <string>

#include "teprompt/errors.hpp"

namespace teprompt {

const AnswerSpace& AnswerSpaces::get(Task task) const {
  switch (task) {
    case Task::Drr: return drr;
    case Task::Ssc: return ssc;
    case Task::Acp: return acp;
  }
  throw std::logic_error("unhandled task");
}

AnswerSpaces build_answer_spaces(std::span<const DiscourseInstance> train, const Tokenizer& tokenizer) {
  AnswerSpaces spaces;
  spaces.drr = build_drr_space(tokenizer);
  spaces.ssc = build_ssc_space(tokenizer);
  auto [acp, map] = build_acp_space(train, tokenizer);
  spaces.acp = std::move(acp);
  spaces.connectives = std::move(map);
  return spaces;
}

const Vector& HeadOutputs::probs(Task task) const {
  switch (task) {
    case Task::Drr: return drr_probs;
    case Task::Ssc: return ssc_probs;
    case Task::Acp: return acp_probs;
  }
  throw std::logic_error("unhandled task");
}

namespace {

Vector row(const Matrix& hidden, std::optional<std::size_t> pos, const char* what) {
  if (!pos) throw std::invalid_argument(std::string("prompt has no ") + what + " position");
  if (*pos >= static_cast<std::size_t>(hidden.rows())) {
    throw std::invalid_argument(std::string(what) + " position " + std::to_string(*pos) + " outside hidden table");
  }
  return hidden.row(static_cast<Eigen::Index>(*pos)).transpose();
}

void check_ids(const AnswerSpace& space, std::size_t vocab_size) {
  for (TokenId id : space.token_ids()) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw ConfigError(std::string(to_string(space.task())) + " answer id " + std::to_string(id) +
                        " is outside the vocabulary (size " + std::to_string(vocab_size) + ")");
    }
  }
}

void score(const Encoder& enc, const Vector& state, const AnswerSpace& space, Vector& scores, Vector& probs) {
  scores = enc.head_scores(enc.head_transform(state.transpose()), space.token_ids());
  probs = softmax(scores);
}

}  // namespace

HeadOutputs score_heads(const Matrix& hidden, const PromptEncoding& encoding, const FusionParameters& params,
                        const AnswerSpaces& spaces, const Backbone& backbone, FusionMode mode) {
  const Encoder& enc = backbone.encoder();
  HeadOutputs out;
  if (encoding.drr_mask_pos) {
    check_ids(spaces.drr, backbone.vocab_size());
    out.drr_mask_state = row(hidden, encoding.drr_mask_pos, "DRR [MASK]");
    switch (mode) {
      case FusionMode::TwoGate: {
        const auto aux = fuse_auxiliary(row(hidden, encoding.ssc_cls_pos, "SSC [CLS]"),
                                        row(hidden, encoding.acp_cls_pos, "ACP [CLS]"), params);
        out.fused_state = fuse_main(out.drr_mask_state, aux.fused, params).fused;
        break;
      }
      case FusionMode::MainGateSsc:
        out.fused_state = fuse_main(out.drr_mask_state, row(hidden, encoding.ssc_cls_pos, "SSC [CLS]"), params).fused;
        break;
      case FusionMode::MainGateAcp:
        out.fused_state = fuse_main(out.drr_mask_state, row(hidden, encoding.acp_cls_pos, "ACP [CLS]"), params).fused;
        break;
      case FusionMode::None:
        out.fused_state = out.drr_mask_state;
        break;
    }
    score(enc, out.fused_state, spaces.drr, out.drr_scores, out.drr_probs);
  }
  if (encoding.ssc_mask_pos) {
    check_ids(spaces.ssc, backbone.vocab_size());
    score(enc, row(hidden, encoding.ssc_mask_pos, "SSC [MASK]"), spaces.ssc, out.ssc_scores, out.ssc_probs);
  }
  if (encoding.acp_mask_pos) {
    check_ids(spaces.acp, backbone.vocab_size());
    score(enc, row(hidden, encoding.acp_mask_pos, "ACP [MASK]"), spaces.acp, out.acp_scores, out.acp_probs);
  }
  return out;
}

}  // namespace teprompt
