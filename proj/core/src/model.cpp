#include "teprompt/model.hpp"

#include <stdexcept>
#include <string>
#include <utility>

#include "teprompt/errors.hpp"

namespace teprompt {

TepromptModel::TepromptModel(Backbone backbone, TemplateConfig templates, AnswerSpaces spaces,
                             FusionParameters fusion, AblationVariant variant)
    : backbone_(std::make_unique<Backbone>(std::move(backbone))),
      spaces_(std::move(spaces)),
      fusion_(std::move(fusion)),
      variant_(variant) {
  fusion_.validate();
  if (fusion_.dim() != backbone_->hidden_dim()) {
    throw ConfigError("gate matrices are " + std::to_string(fusion_.dim()) + "-dimensional but the backbone has d_h = " +
                      std::to_string(backbone_->hidden_dim()));
  }
  templates.validate(backbone_->tokenizer());
  builder_ = std::make_unique<PromptBuilder>(templates, backbone_->tokenizer());
}

TepromptModel TepromptModel::create(Backbone backbone, const TemplateConfig& templates,
                                    std::span<const DiscourseInstance> train, AblationVariant variant,
                                    std::uint64_t seed) {
  const auto& tok = backbone.tokenizer();
  if (!tok.special_id(kArg1Token) || !tok.special_id(kArg2Token)) {
    Rng rng(Rng::mix(seed, 21));
    const std::string surfaces[] = {std::string(kArg1Token), std::string(kArg2Token)};
    backbone.register_special_tokens(surfaces, rng);
  }
  AnswerSpaces spaces = build_answer_spaces(train, backbone.tokenizer());
  FusionParameters fusion(backbone.hidden_dim(), Rng::mix(seed, 22), backbone.encoder().config().init_std);
  return TepromptModel(std::move(backbone), templates, std::move(spaces), std::move(fusion), variant);
}

PromptEncoding TepromptModel::encode(const DiscourseInstance& instance) const {
  return builder_->build(instance, spec().layout);
}

PromptEncoding TepromptModel::encode(std::string_view arg1, std::string_view arg2) const {
  return builder_->build(arg1, arg2, spec().layout);
}

HeadOutputs TepromptModel::forward(const PromptEncoding& encoding) const {
  const Matrix hidden = backbone_->encode_prompt(encoding);
  return score_heads(hidden, encoding, fusion_, spaces_, *backbone_, spec().fusion);
}

double TepromptModel::loss(const PromptEncoding& encoding, const GoldTargets& gold, const LossWeights& weights) const {
  const auto spec = this->spec();
  const HeadOutputs out = forward(encoding);
  double total = 0.0;
  if (spec.drr_loss && weights.drr != 0.0) total += weights.drr * task_loss(out.drr_probs, gold.drr);
  if (spec.ssc_loss && weights.ssc != 0.0) total += weights.ssc * task_loss(out.ssc_probs, gold.ssc);
  if (spec.acp_loss && weights.acp != 0.0 && gold.acp) total += weights.acp * task_loss(out.acp_probs, *gold.acp);
  return total;
}

namespace {

Vector row_of(const Matrix& hidden, std::optional<std::size_t> pos) {
  if (!pos) throw std::invalid_argument("prompt lacks a position the variant reads");
  return hidden.row(static_cast<Eigen::Index>(*pos)).transpose();
}

void add_row(Matrix& d_hidden, std::size_t pos, const Vector& grad) {
  d_hidden.row(static_cast<Eigen::Index>(pos)) += grad.transpose();
}

}  // namespace

InstanceLosses TepromptModel::accumulate_gradients(const PromptEncoding& encoding, const GoldTargets& gold,
                                                   const LossWeights& weights, double scale, Rng* dropout_rng) {
  const auto spec = this->spec();
  Encoder& enc = backbone_->encoder();
  EncoderTrace trace;
  const Matrix hidden = enc.forward(encoding.token_ids, &trace, dropout_rng);
  Matrix d_hidden = Matrix::Zero(hidden.rows(), hidden.cols());
  InstanceLosses losses;

  // Cross-entropy through one MLM-head read: returns dLoss/dstate.
  auto head = [&](const Vector& state, const AnswerSpace& space, std::size_t gold_index, double weight,
                  double& loss_out) -> Vector {
    HeadTrace ht;
    const RowVector transformed = enc.head_transform(state.transpose(), &ht);
    const Vector probs = softmax(enc.head_scores(transformed, space.token_ids()));
    loss_out = task_loss(probs, gold_index);
    Vector d_scores = probs;
    d_scores(static_cast<Eigen::Index>(gold_index)) -= 1.0;
    d_scores *= weight * scale;
    return enc.head_backward(ht, space.token_ids(), d_scores).transpose();
  };

  if (spec.drr_loss && weights.drr != 0.0) {
    const std::size_t drr_pos = *encoding.drr_mask_pos;
    const Vector h_drr = row_of(hidden, encoding.drr_mask_pos);
    GateResult aux, main;
    Vector h_aux, h_ssc_cls, h_acp_cls, state;
    switch (spec.fusion) {
      case FusionMode::TwoGate:
        h_ssc_cls = row_of(hidden, encoding.ssc_cls_pos);
        h_acp_cls = row_of(hidden, encoding.acp_cls_pos);
        aux = fuse_auxiliary(h_ssc_cls, h_acp_cls, fusion_);
        h_aux = aux.fused;
        break;
      case FusionMode::MainGateSsc: h_aux = row_of(hidden, encoding.ssc_cls_pos); break;
      case FusionMode::MainGateAcp: h_aux = row_of(hidden, encoding.acp_cls_pos); break;
      case FusionMode::None: break;
    }
    if (spec.fusion == FusionMode::None) {
      state = h_drr;
    } else {
      main = fuse_main(h_drr, h_aux, fusion_);
      state = main.fused;
    }

    const Vector d_state = head(state, spaces_.drr, gold.drr, weights.drr, losses.drr);

    if (spec.fusion == FusionMode::None) {
      add_row(d_hidden, drr_pos, d_state);
    } else {
      const auto gm = gate_backward(fusion_.w_m.value, fusion_.u_m.value, h_drr, h_aux, main, d_state,
                                    fusion_.w_m.grad, fusion_.u_m.grad);
      add_row(d_hidden, drr_pos, gm.da);
      if (spec.fusion == FusionMode::MainGateSsc) {
        add_row(d_hidden, *encoding.ssc_cls_pos, gm.db);
      } else if (spec.fusion == FusionMode::MainGateAcp) {
        add_row(d_hidden, *encoding.acp_cls_pos, gm.db);
      } else {
        const auto gc = gate_backward(fusion_.w_c.value, fusion_.u_c.value, h_ssc_cls, h_acp_cls, aux, gm.db,
                                      fusion_.w_c.grad, fusion_.u_c.grad);
        add_row(d_hidden, *encoding.ssc_cls_pos, gc.da);
        add_row(d_hidden, *encoding.acp_cls_pos, gc.db);
      }
    }
  }

  if (spec.ssc_loss && weights.ssc != 0.0) {
    const Vector d = head(row_of(hidden, encoding.ssc_mask_pos), spaces_.ssc, gold.ssc, weights.ssc, losses.ssc);
    add_row(d_hidden, *encoding.ssc_mask_pos, d);
  }

  if (spec.acp_loss && weights.acp != 0.0) {
    if (gold.acp) {
      const Vector d = head(row_of(hidden, encoding.acp_mask_pos), spaces_.acp, *gold.acp, weights.acp, losses.acp);
      add_row(d_hidden, *encoding.acp_mask_pos, d);
    } else {
      losses.acp_masked = true;
    }
  }

  enc.backward(trace, d_hidden);
  return losses;
}

ParameterList TepromptModel::parameters() {
  ParameterList params = backbone_->encoder().parameters();
  for (auto* p : fusion_.parameters()) params.push_back(p);
  return params;
}

std::vector<const Parameter*> TepromptModel::parameters() const {
  std::vector<const Parameter*> params = std::as_const(*backbone_).encoder().parameters();
  for (const auto* p : {&fusion_.w_c, &fusion_.u_c, &fusion_.w_m, &fusion_.u_m}) params.push_back(p);
  return params;
}

}  // namespace teprompt
