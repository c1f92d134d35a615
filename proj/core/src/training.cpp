#include "teprompt/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "teprompt/errors.hpp"

namespace teprompt {

void TrainingConfig::validate() const {
  if (!(beta >= 0.0) || !(gamma >= 0.0)) throw ConfigError("loss weights beta and gamma must be non-negative");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a finite non-negative number");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam moment coefficients must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
}

double mean_task_loss(std::span<const Vector> probs, std::span<const std::size_t> gold) {
  if (probs.size() != gold.size()) throw std::invalid_argument("probability and gold lists differ in length");
  if (probs.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) sum += task_loss(probs[i], gold[i]);
  return sum / static_cast<double>(probs.size());
}

LossWeights loss_weights(const VariantSpec& spec, const TrainingConfig& cfg) {
  LossWeights w;
  w.drr = spec.drr_loss ? 1.0 : 0.0;
  w.ssc = spec.ssc_loss ? cfg.beta : 0.0;
  w.acp = spec.acp_loss ? cfg.gamma : 0.0;
  if (!spec.drr_loss) {
    if (spec.ssc_loss && !spec.acp_loss) w.ssc = 1.0;
    if (spec.acp_loss && !spec.ssc_loss) w.acp = 1.0;
  }
  return w;
}

GoldTargets gold_targets(const DiscourseInstance& instance, const AnswerSpaces& spaces) {
  GoldTargets g;
  std::optional<std::size_t> drr;
  if (auto i = spaces.drr.find(instance.connective); i && spaces.drr[*i].sense == instance.sense) drr = i;
  if (!drr) {
    for (std::size_t i = 0; i < spaces.drr.size(); ++i) {
      if (spaces.drr[i].sense == instance.sense) {
        drr = i;
        break;
      }
    }
  }
  g.drr = *drr;
  g.ssc = spaces.ssc.index_of(to_string(instance.sense));
  g.acp = spaces.acp.find(instance.connective);
  if (!g.acp) spdlog::debug("{}: connective \"{}\" not in the ACP answer space; ACP loss masked", instance.id,
                            instance.connective);
  return g;
}

AdamW::AdamW(ParameterList params, double learning_rate, double weight_decay, double beta1, double beta2,
             double epsilon)
    : params_(std::move(params)), lr_(learning_rate), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(epsilon) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (p.value.rows() != m_[i].rows() || p.value.cols() != m_[i].cols()) {
      throw TrainingError("parameter " + p.name + " changed shape under the optimizer");
    }
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * p.grad;
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * p.grad.cwiseProduct(p.grad);
    Matrix update = (m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + eps_);
    if (p.decay && wd_ != 0.0) update += wd_ * p.value;
    p.value -= lr_ * update;
  }
}

namespace {

using Snapshot = std::vector<Matrix>;

Snapshot snapshot(const TepromptModel& model) {
  Snapshot s;
  for (const auto* p : model.parameters()) s.push_back(p->value);
  return s;
}

void restore(TepromptModel& model, const Snapshot& s) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = s[i];
}

nlohmann::ordered_json epoch_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["record"] = "epoch";
  j["epoch"] = r.epoch;
  j["loss_drr"] = r.loss_drr;
  j["loss_ssc"] = r.loss_ssc;
  j["loss_acp"] = r.loss_acp;
  j["loss"] = r.loss;
  j["acp_masked"] = r.acp_masked;
  if (r.dev) {
    j["dev_accuracy"] = r.dev->accuracy;
    j["dev_macro_f1"] = r.dev->macro_f1;
  }
  j["seconds"] = r.seconds;
  return j;
}

}  // namespace

TrainingResult train(TepromptModel& model, std::span<const DiscourseInstance> train_set,
                     std::span<const DiscourseInstance> dev_set, const TrainingConfig& cfg,
                     const TrainingOptions& options) {
  cfg.validate();
  if (cfg.variant != model.variant()) {
    throw ConfigError("training config asks for variant " + std::string(to_string(cfg.variant)) +
                      " but the model was built as " + std::string(to_string(model.variant())));
  }
  if (train_set.empty()) throw DataError("training set is empty");

  const auto spec = model.spec();
  const LossWeights weights = loss_weights(spec, cfg);

  std::vector<PromptEncoding> prompts;
  std::vector<GoldTargets> golds;
  prompts.reserve(train_set.size());
  golds.reserve(train_set.size());
  std::size_t unmapped = 0;
  for (const auto& inst : train_set) {
    prompts.push_back(model.encode(inst));
    golds.push_back(gold_targets(inst, model.spaces()));
    if (!golds.back().acp) ++unmapped;
  }
  if (unmapped > 0) spdlog::info("{} training instances have no ACP answer; their ACP loss is masked", unmapped);

  if (options.log) {
    nlohmann::ordered_json header;
    header["record"] = "header";
    header["variant"] = to_string(cfg.variant);
    header["beta"] = cfg.beta;
    header["gamma"] = cfg.gamma;
    header["learning_rate"] = cfg.learning_rate;
    header["batch_size"] = cfg.batch_size;
    header["epochs"] = cfg.epochs;
    header["weight_decay"] = cfg.weight_decay;
    header["seed"] = cfg.seed;
    header["train_instances"] = train_set.size();
    header["dev_instances"] = dev_set.size();
    *options.log << header.dump() << '\n' << std::flush;
  }

  auto params = model.parameters();
  AdamW optimizer(params, cfg.learning_rate, cfg.weight_decay, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
  Rng order_rng(Rng::mix(cfg.seed, 31));
  Rng dropout_rng(Rng::mix(cfg.seed, 32));

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainingResult result;
  Snapshot best;
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    order_rng.shuffle(std::span<std::size_t>(order));
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t acp_counted = 0;

    for (std::size_t begin = 0, batch = 0; begin < order.size(); begin += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - begin);
      zero_grads(params);
      double batch_loss = 0.0;
      std::vector<double> instance_loss;
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = order[i];
        const auto l = model.accumulate_gradients(prompts[idx], golds[idx], weights, scale, &dropout_rng);
        const double total = weights.drr * l.drr + weights.ssc * l.ssc + weights.acp * l.acp;
        instance_loss.push_back(total);
        batch_loss += total;
        rec.loss_drr += l.drr;
        rec.loss_ssc += l.ssc;
        rec.loss_acp += l.acp;
        if (l.acp_masked) ++rec.acp_masked;
        else if (spec.acp_loss) ++acp_counted;
      }
      if (!std::isfinite(batch_loss)) {
        std::string ids;
        for (std::size_t i = begin; i < end; ++i) {
          spdlog::error("epoch {} batch {}: {} loss {}", epoch, batch, train_set[order[i]].id,
                        instance_loss[i - begin]);
          ids += (ids.empty() ? "" : ", ") + train_set[order[i]].id;
        }
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                            " (instances " + ids + ")");
      }
      optimizer.step();
    }

    const double n = static_cast<double>(train_set.size());
    rec.loss_drr /= n;
    rec.loss_ssc /= n;
    rec.loss_acp = acp_counted ? rec.loss_acp / static_cast<double>(acp_counted) : 0.0;
    rec.loss = joint_loss(rec.loss_drr, rec.loss_ssc, rec.loss_acp, weights.ssc, weights.acp);
    if (!spec.drr_loss) rec.loss = weights.ssc * rec.loss_ssc + weights.acp * rec.loss_acp;

    bool improved = false;
    if (!dev_set.empty()) {
      rec.dev = evaluate(model, dev_set, cfg.seed);
      improved = !have_best || rec.dev->macro_f1 > result.best_dev_macro_f1;
    } else {
      improved = true;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (rec.dev) {
      spdlog::info("epoch {}/{}: loss {:.4f} (drr {:.4f} ssc {:.4f} acp {:.4f}) dev acc {:.4f} macro-F1 {:.4f} [{:.1f}s]",
                   epoch, cfg.epochs, rec.loss, rec.loss_drr, rec.loss_ssc, rec.loss_acp, rec.dev->accuracy,
                   rec.dev->macro_f1, rec.seconds);
    } else {
      spdlog::info("epoch {}/{}: loss {:.4f} (drr {:.4f} ssc {:.4f} acp {:.4f}) [{:.1f}s]", epoch, cfg.epochs, rec.loss,
                   rec.loss_drr, rec.loss_ssc, rec.loss_acp, rec.seconds);
    }
    if (options.log) *options.log << epoch_json(rec).dump() << '\n' << std::flush;

    if (improved) {
      have_best = true;
      result.best_epoch = epoch;
      result.best_dev_macro_f1 = rec.dev ? rec.dev->macro_f1 : 0.0;
      best = snapshot(model);
      if (options.on_best) options.on_best(model, rec);
    }
    result.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }

  if (have_best) restore(model, best);
  result.steps = optimizer.steps();
  return result;
}

}  // namespace teprompt
