#include <benchmark/benchmark.h>

#include "teprompt/backbone.hpp"
#include "teprompt/fusion.hpp"
#include "teprompt/model.hpp"
#include "teprompt/training.hpp"

namespace {

using namespace teprompt;

struct Fixture {
  CorpusSplit corpus;
  TepromptModel model;
  PromptEncoding encoding;
  GoldTargets gold;

  explicit Fixture(std::size_t d_h)
      : corpus(make_corpus()), model(make_model(corpus, d_h)), encoding(model.encode(corpus.train[0])),
        gold(gold_targets(corpus.train[0], model.spaces())) {}

  static CorpusSplit make_corpus() {
    SyntheticOptions opts;
    opts.num_train = 200;
    opts.num_test = 20;
    return generate_synthetic(opts);
  }

  static TepromptModel make_model(const CorpusSplit& corpus, std::size_t d_h) {
    ToyBackboneConfig cfg;
    cfg.d_h = d_h;
    cfg.dropout = 0.0;
    TemplateConfig templates;
    auto backbone = make_toy_backbone(toy_vocabulary_texts(corpus.train, templates), cfg);
    return TepromptModel::create(std::move(backbone), templates, corpus.train, AblationVariant::Teprompt, 1);
  }
};

void BM_GateForward(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  const Matrix w = Matrix::Random(d, d), u = Matrix::Random(d, d);
  const Vector a = Vector::Random(d), b = Vector::Random(d);
  for (auto _ : state) benchmark::DoNotOptimize(gate_forward(w, u, a, b));
}
BENCHMARK(BM_GateForward)->Arg(32)->Arg(128)->Arg(768);

void BM_PromptBuild(benchmark::State& state) {
  Fixture f(32);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.model.encode(f.corpus.train[i++ % f.corpus.train.size()]));
  }
}
BENCHMARK(BM_PromptBuild);

void BM_Forward(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(f.model.forward(f.encoding));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64);

void BM_ForwardBackward(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)));
  const auto weights = loss_weights(f.model.spec(), TrainingConfig{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.model.accumulate_gradients(f.encoding, f.gold, weights, 1.0, nullptr));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
