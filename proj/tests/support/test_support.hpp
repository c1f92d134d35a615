#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "teprompt/backbone.hpp"
#include "teprompt/corpus.hpp"
#include "teprompt/model.hpp"
#include "teprompt/training.hpp"

namespace teprompt::testing {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("teprompt_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline DiscourseInstance make_instance(std::string arg1, std::string arg2, Sense sense, std::string connective,
                                       int section = 2, std::string id = "x") {
  return {std::move(arg1), std::move(arg2), sense, std::move(connective), section, std::move(id)};
}

/// A small synthetic corpus for fast tests.
inline CorpusSplit small_corpus(std::size_t train = 120, std::size_t test = 40, std::uint64_t seed = 3) {
  SyntheticOptions opts;
  opts.num_train = train;
  opts.num_test = test;
  opts.seed = seed;
  return generate_synthetic(opts);
}

/// Toy model over `train` with a tiny encoder.
inline TepromptModel tiny_model(const std::vector<DiscourseInstance>& train, AblationVariant variant,
                                std::size_t d_h = 8, double dropout = 0.0, std::uint64_t seed = 5) {
  ToyBackboneConfig cfg;
  cfg.d_h = d_h;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.dropout = dropout;
  cfg.seed = seed;
  TemplateConfig templates;
  auto backbone = make_toy_backbone(toy_vocabulary_texts(train, templates), cfg);
  return TepromptModel::create(std::move(backbone), templates, train, variant, seed);
}

/// Independent generator for property tests.
struct Gen {
  std::mt19937_64 engine;
  explicit Gen(std::uint64_t seed) : engine(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine); }
  std::vector<double> vec(std::size_t n, double lo = -3.0, double hi = 3.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }
};

/// Worst disagreement between analytic and central-difference gradients.
/// Relative error is |a - n| / max(|a|, |n|); pairs where both magnitudes
/// fall below `floor` are compared absolutely against the floor instead.
struct GradientCheck {
  double worst_relative = 0.0;
  std::string worst_entry;
  std::size_t checked = 0;
};

/// Checks up to `per_param` entries of every parameter whose name passes
/// `select` (all entries when per_param is 0).
template <typename Select>
GradientCheck check_gradients(TepromptModel& model, const DiscourseInstance& instance, Gen& gen,
                              std::size_t per_param, Select select, double step = 1e-5, double floor = 1e-6) {
  const auto enc = model.encode(instance);
  const auto gold = gold_targets(instance, model.spaces());
  TrainingConfig cfg;
  const auto weights = loss_weights(model.spec(), cfg);
  for (auto* p : model.parameters()) p->grad.setZero();
  model.accumulate_gradients(enc, gold, weights, 1.0, nullptr);
  GradientCheck out;
  for (auto* p : model.parameters()) {
    if (!select(p->name)) continue;
    const auto n = static_cast<std::size_t>(p->value.size());
    std::vector<std::size_t> entries;
    if (per_param == 0 || per_param >= n) {
      for (std::size_t i = 0; i < n; ++i) entries.push_back(i);
    } else {
      for (std::size_t i = 0; i < per_param; ++i) entries.push_back(gen.index(n));
    }
    for (std::size_t e : entries) {
      double& x = p->value.data()[e];
      const double saved = x;
      x = saved + step;
      const double up = model.loss(enc, gold, weights);
      x = saved - step;
      const double down = model.loss(enc, gold, weights);
      x = saved;
      const double numeric = (up - down) / (2 * step);
      const double analytic = p->grad.data()[e];
      const double scale = std::max(std::abs(analytic), std::abs(numeric));
      const double err = std::abs(analytic - numeric) / std::max(scale, floor);
      ++out.checked;
      if (err > out.worst_relative) {
        out.worst_relative = err;
        out.worst_entry = p->name + "[" + std::to_string(e) + "] analytic " + std::to_string(analytic) +
                          " numeric " + std::to_string(numeric);
      }
    }
  }
  return out;
}

}  // namespace teprompt::testing
