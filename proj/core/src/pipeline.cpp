#include "teprompt/pipeline.hpp"

#include <chrono>

#include <spdlog/spdlog.h>

#include "teprompt/errors.hpp"

namespace teprompt {

namespace {

std::filesystem::path find_split_file(const std::filesystem::path& dir, const char* name) {
  for (const char* ext : {".jsonl", ".tsv"}) {
    auto p = dir / (std::string(name) + ext);
    if (std::filesystem::exists(p)) return p;
  }
  throw DataError("corpus directory " + dir.string() + " has no " + name + ".jsonl or " + name + ".tsv");
}

}  // namespace

PreparedCorpus load_run_corpus(const CorpusConfig& config) {
  PreparedCorpus out;
  if (config.source == "synthetic") {
    out.split = generate_synthetic(config.synthetic);
    out.manifest = make_manifest(out.split);
    return out;
  }
  const std::filesystem::path source(config.source);
  if (std::filesystem::is_directory(source)) {
    for (auto [name, target] : {std::pair{"train", &out.split.train}, std::pair{"dev", &out.split.dev},
                                std::pair{"test", &out.split.test}}) {
      const auto path = find_split_file(source, name);
      *target = load_corpus(path, corpus_format_for(path));
    }
    out.manifest = make_manifest(out.split);
    return out;
  }
  if (!std::filesystem::exists(source)) throw DataError("corpus source " + source.string() + " does not exist");
  const auto all = load_corpus(source, corpus_format_for(source));
  auto result = split_by_sections(all);
  out.split = std::move(result.split);
  out.manifest = make_manifest(out.split, result.excluded);
  out.reference_diff = diff_against_pdtb(out.manifest);
  return out;
}

Backbone make_backbone(const RunConfig& config, std::span<const DiscourseInstance> train) {
  if (config.backbone.kind == BackboneKind::Pretrained) {
    return load_pretrained_bert(config.backbone.pretrained_path, config.backbone.toy.dropout);
  }
  ToyBackboneConfig toy = config.backbone.toy;
  toy.seed = Rng::mix(config.training.seed, 1);
  return make_toy_backbone(toy_vocabulary_texts(train, config.templates), toy);
}

TepromptModel build_model(const RunConfig& config, AblationVariant variant, std::span<const DiscourseInstance> train) {
  return TepromptModel::create(make_backbone(config, train), config.templates, train, variant,
                               Rng::mix(config.training.seed, 2));
}

std::vector<EvaluationReport> AblationResult::reports() const {
  std::vector<EvaluationReport> out;
  for (const auto& r : rows) out.push_back(r.report);
  return out;
}

AblationResult run_ablation_matrix(const CorpusSplit& split, const TrainingConfig& base, const ModelFactory& factory,
                                   std::span<const AblationVariant> variants, const std::string& config_hash) {
  AblationResult result;
  for (AblationVariant v : variants) {
    const auto start = std::chrono::steady_clock::now();
    try {
      TrainingConfig cfg = base;
      cfg.variant = v;
      spdlog::info("ablation: training {}", to_string(v));
      TepromptModel model = factory(v);
      AblationRow row{v, {}, train(model, split.train, split.dev, cfg), 0.0};
      row.report = evaluate(model, split.test, cfg.seed, config_hash);
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      spdlog::info("ablation: {} test acc {:.4f} macro-F1 {:.4f} ({:.1f}s)", to_string(v), row.report.accuracy,
                   row.report.macro_f1, row.seconds);
      result.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      spdlog::error("ablation: variant {} failed: {}", to_string(v), e.what());
      result.failed_variant = v;
      result.error = e.what();
      break;
    }
  }
  return result;
}

AblationResult run_ablation_matrix(const CorpusSplit& split, const RunConfig& config,
                                   std::span<const AblationVariant> variants) {
  return run_ablation_matrix(
      split, config.training, [&](AblationVariant v) { return build_model(config, v, split.train); }, variants,
      config_hash(config));
}

}  // namespace teprompt
