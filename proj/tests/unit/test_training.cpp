#include <cmath>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "teprompt/errors.hpp"
#include "teprompt/evaluation.hpp"
#include "teprompt/training.hpp"
#include "test_support.hpp"

namespace teprompt {
namespace {

using testing::make_instance;

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

TEST(TaskLoss, Examples) {
  EXPECT_NEAR(task_loss(Vector::Constant(16, 1.0 / 16), 5), std::log(16.0), 1e-12);
  EXPECT_EQ(task_loss(vec({0, 1, 0}), 1), 0.0);
  EXPECT_NEAR(task_loss(vec({1.0 / 3, 2.0 / 3}), 1), std::log(1.5), 1e-12);
}

TEST(TaskLoss, ZeroProbabilityIsClampedAtTheFloor) {
  EXPECT_NEAR(task_loss(vec({1, 0}), 1), -std::log(kProbabilityFloor), 1e-9);
  EXPECT_THROW(task_loss(vec({0.5, 0.5}), 2), std::out_of_range);
}

TEST(TaskLoss, BatchMeanAveragesInstances) {
  const std::vector<Vector> probs = {vec({0.5, 0.5}), vec({0.25, 0.75})};
  const std::vector<std::size_t> gold = {0, 1};
  EXPECT_NEAR(mean_task_loss(probs, gold), (std::log(2.0) + std::log(4.0 / 3.0)) / 2, 1e-12);
}

TEST(JointLoss, Examples) {
  TrainingConfig cfg;
  EXPECT_EQ(joint_loss(1.0, 0.5, 0.25, cfg), 1.25);
  cfg.beta = cfg.gamma = 0.0;
  testing::Gen gen(5);
  for (int i = 0; i < 100; ++i) {
    const double l = gen.uniform(0, 10);
    EXPECT_EQ(joint_loss(l, gen.uniform(0, 10), gen.uniform(0, 10), cfg), l);
  }
  EXPECT_EQ(joint_loss(0.0, 0.0, 0.0, TrainingConfig{}), 0.0);
}

TEST(LossWeights, FollowTheVariant) {
  TrainingConfig cfg;
  const auto full = loss_weights(spec_of(AblationVariant::Teprompt), cfg);
  EXPECT_EQ(full.drr, 1.0);
  EXPECT_EQ(full.ssc, 0.3);
  EXPECT_EQ(full.acp, 0.4);
  const auto drr = loss_weights(spec_of(AblationVariant::DrrOnly), cfg);
  EXPECT_EQ(drr.ssc, 0.0);
  EXPECT_EQ(drr.acp, 0.0);
  const auto ssc = loss_weights(spec_of(AblationVariant::SscOnly), cfg);
  EXPECT_EQ(ssc.drr, 0.0);
  EXPECT_EQ(ssc.ssc, 1.0);
  const auto plus = loss_weights(spec_of(AblationVariant::DrrPlusAcp), cfg);
  EXPECT_EQ(plus.ssc, 0.0);
  EXPECT_EQ(plus.acp, 0.4);
}

TEST(TrainingConfig, Validation) {
  TrainingConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.beta = -0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainingConfig{};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

std::vector<DiscourseInstance> hand_corpus() {
  return {make_instance("it rained all day", "the match was cancelled", Sense::Contingency, "so", 2, "a"),
          make_instance("he cooked dinner", "she set the table", Sense::Temporal, "meanwhile", 2, "b"),
          make_instance("prices rose", "sales held steady", Sense::Comparison, "however", 2, "c"),
          make_instance("the plan is simple", "we cut costs", Sense::Expansion, "specifically", 2, "d"),
          make_instance("she left early", "she was tired", Sense::Contingency, "because", 2, "e")};
}

TEST(GoldTargets, Examples) {
  const auto train = hand_corpus();
  const auto model = testing::tiny_model(train, AblationVariant::Teprompt);
  const auto& s = model.spaces();
  const auto so = gold_targets(train[0], s);
  EXPECT_EQ(s.drr[so.drr].surface, "so");
  EXPECT_EQ(s.ssc[so.ssc].surface, "Contingency");
  ASSERT_TRUE(so.acp);
  EXPECT_EQ(s.acp[*so.acp].surface, "so");
  const auto meanwhile = gold_targets(train[1], s);
  EXPECT_EQ(s.drr[meanwhile.drr].surface, "simultaneously");
  EXPECT_EQ(s.ssc[meanwhile.ssc].surface, "Temporal");
  ASSERT_TRUE(meanwhile.acp);
  EXPECT_EQ(s.acp[*meanwhile.acp].surface, "meanwhile");
  // An answer word listed under another sense does not become the DRR gold.
  const auto cross = gold_targets(make_instance("a", "b", Sense::Expansion, "so"), s);
  EXPECT_EQ(s.drr[cross.drr].surface, "instead");
  const auto unseen = gold_targets(make_instance("a", "b", Sense::Comparison, "nevertheless"), s);
  EXPECT_FALSE(unseen.acp);
  EXPECT_EQ(s.drr[unseen.drr].surface, "similarly");
}

TEST(Training, UnmappedConnectiveMasksTheAcpLoss) {
  const auto train = hand_corpus();
  auto model = testing::tiny_model(train, AblationVariant::Teprompt);
  const auto inst = make_instance("prices rose", "sales held steady", Sense::Comparison, "nevertheless");
  const auto enc = model.encode(inst);
  const auto gold = gold_targets(inst, model.spaces());
  auto weights = loss_weights(model.spec(), TrainingConfig{});
  for (auto* p : model.parameters()) p->grad.setZero();
  const auto l = model.accumulate_gradients(enc, gold, weights, 1.0, nullptr);
  EXPECT_TRUE(l.acp_masked);
  EXPECT_EQ(l.acp, 0.0);
  std::vector<Matrix> masked;
  for (auto* p : model.parameters()) masked.push_back(p->grad);
  weights.acp = 0.0;
  for (auto* p : model.parameters()) p->grad.setZero();
  model.accumulate_gradients(enc, gold, weights, 1.0, nullptr);
  std::size_t i = 0;
  for (auto* p : model.parameters()) EXPECT_TRUE((p->grad.array() == masked[i++].array()).all()) << p->name;
}

TEST(Training, DrrOnlyReportsNoAuxiliaryLoss) {
  const auto corpus = testing::small_corpus(40, 10);
  auto model = testing::tiny_model(corpus.train, AblationVariant::DrrOnly);
  const auto enc = model.encode(corpus.train[0]);
  const auto l = model.accumulate_gradients(enc, gold_targets(corpus.train[0], model.spaces()),
                                            loss_weights(model.spec(), TrainingConfig{}), 1.0, nullptr);
  EXPECT_GT(l.drr, 0.0);
  EXPECT_EQ(l.ssc, 0.0);
  EXPECT_EQ(l.acp, 0.0);
}

TEST(AdamW, ZeroLearningRateLeavesParametersUnchanged) {
  const auto corpus = testing::small_corpus(40, 10);
  auto model = testing::tiny_model(corpus.train, AblationVariant::Teprompt);
  std::vector<Matrix> before;
  for (auto* p : model.parameters()) {
    before.push_back(p->value);
    p->grad.setConstant(0.7);
  }
  AdamW opt(model.parameters(), 0.0, 0.01);
  opt.step();
  opt.step();
  EXPECT_EQ(opt.steps(), 2u);
  std::size_t i = 0;
  for (auto* p : model.parameters()) EXPECT_TRUE((p->value.array() == before[i++].array()).all()) << p->name;
}

TEST(AdamW, FirstStepMovesByTheLearningRateAndDecaysOnlyFlaggedParameters) {
  Parameter w("w", 1, 2), b("b", 1, 1, false);
  w.value << 2.0, -1.0;
  b.value << 3.0;
  w.grad << 0.5, -4.0;
  b.grad << 0.0;
  AdamW opt({&w, &b}, 0.1, 0.5);
  opt.step();
  // Bias-corrected first step: m_hat / sqrt(v_hat) = sign(g).
  EXPECT_NEAR(w.value(0, 0), 2.0 - 0.1 * (1.0 + 0.5 * 2.0), 1e-7);
  EXPECT_NEAR(w.value(0, 1), -1.0 - 0.1 * (-1.0 + 0.5 * -1.0), 1e-7);
  EXPECT_EQ(b.value(0, 0), 3.0);
}

class TrainingRun : public ::testing::Test {
 protected:
  static TrainingConfig config(AblationVariant v, std::size_t epochs) {
    TrainingConfig cfg;
    cfg.variant = v;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 16;
    cfg.epochs = epochs;
    return cfg;
  }
  CorpusSplit corpus = testing::small_corpus(400, 80, 9);
};

TEST_F(TrainingRun, LossFallsAndDevScoreRises) {
  auto model = testing::tiny_model(corpus.train, AblationVariant::Teprompt, 16);
  std::ostringstream log;
  std::size_t best_calls = 0;
  TrainingOptions opts;
  opts.log = &log;
  opts.on_best = [&](const TepromptModel&, const EpochRecord&) { ++best_calls; };
  auto cfg = config(AblationVariant::Teprompt, 5);
  cfg.learning_rate = 3e-3;
  const auto r = train(model, corpus.train, corpus.dev, cfg, opts);
  ASSERT_EQ(r.epochs.size(), 5u);
  EXPECT_LT(r.epochs[1].loss, r.epochs[0].loss);
  EXPECT_GT(r.best_dev_macro_f1, r.epochs[0].dev->macro_f1);
  EXPECT_GE(best_calls, 1u);
  EXPECT_EQ(r.steps, 5 * ((corpus.train.size() + 15) / 16));
  // The returned model holds the best epoch's parameters.
  EXPECT_DOUBLE_EQ(evaluate(model, corpus.dev, 7).macro_f1, r.best_dev_macro_f1);
  std::istringstream lines(log.str());
  std::string line;
  std::vector<nlohmann::json> records;
  while (std::getline(lines, line)) records.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(records.size(), 6u);
  EXPECT_EQ(records[0]["record"], "header");
  EXPECT_EQ(records[5]["epoch"], 5);
}

TEST_F(TrainingRun, SameSeedIsBitwiseReproducible) {
  auto a = testing::tiny_model(corpus.train, AblationVariant::Teprompt, 8, 0.1);
  auto b = testing::tiny_model(corpus.train, AblationVariant::Teprompt, 8, 0.1);
  const auto ra = train(a, corpus.train, corpus.dev, config(AblationVariant::Teprompt, 2));
  const auto rb = train(b, corpus.train, corpus.dev, config(AblationVariant::Teprompt, 2));
  for (std::size_t e = 0; e < 2; ++e) EXPECT_EQ(ra.epochs[e].loss, rb.epochs[e].loss);
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE((pa[i]->value.array() == pb[i]->value.array()).all());
}

TEST_F(TrainingRun, DrrOnlyIgnoresAuxiliaryWeights) {
  auto a = testing::tiny_model(corpus.train, AblationVariant::DrrOnly, 8);
  auto b = testing::tiny_model(corpus.train, AblationVariant::DrrOnly, 8);
  auto cfg = config(AblationVariant::DrrOnly, 2);
  train(a, corpus.train, {}, cfg);
  cfg.beta = 2.0;
  cfg.gamma = 0.0;
  train(b, corpus.train, {}, cfg);
  for (const auto& inst : corpus.test) EXPECT_EQ(predict(a, inst).sense, predict(b, inst).sense);
}

TEST_F(TrainingRun, RejectsMismatchedVariantEmptySetAndNonFiniteLoss) {
  auto model = testing::tiny_model(corpus.train, AblationVariant::Teprompt, 8);
  EXPECT_THROW(train(model, corpus.train, {}, config(AblationVariant::DrrOnly, 1)), ConfigError);
  EXPECT_THROW(train(model, std::span<const DiscourseInstance>{}, {}, config(AblationVariant::Teprompt, 1)),
               DataError);
  model.backbone().encoder().head_norm.gamma.value.setConstant(std::nan(""));
  try {
    train(model, corpus.train, {}, config(AblationVariant::Teprompt, 1));
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1, batch 0"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace teprompt
