#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "teprompt/checkpoint.hpp"
#include "teprompt/config.hpp"
#include "teprompt/errors.hpp"
#include "teprompt/evaluation.hpp"
#include "teprompt/pipeline.hpp"
#include "teprompt/training.hpp"

namespace teprompt::cli {

namespace fs = std::filesystem;

namespace {

/// Flags that override fields of the run config. Unset flags leave the
/// config file (or defaults) untouched.
struct Overrides {
  std::string config_path;
  std::optional<std::string> output;
  std::optional<std::string> corpus;
  std::optional<std::size_t> num_train, num_dev, num_test;
  std::optional<std::uint64_t> data_seed;
  std::optional<std::string> variant;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> lr, beta, gamma, weight_decay;
  std::optional<std::string> backbone;
  std::optional<std::string> pretrained;
  std::optional<std::size_t> d_h, layers, heads;
  std::optional<double> dropout;
  std::optional<std::size_t> max_total_tokens, max_arg_tokens;
};

void add_config_flags(CLI::App& cmd, Overrides& o) {
  cmd.add_option("-c,--config", o.config_path, "Run config JSON file");
  cmd.add_option("-o,--output", o.output, "Output directory");
  cmd.add_option("--corpus", o.corpus, "\"synthetic\", a corpus file, or a prepared corpus directory");
  cmd.add_option("--num-train", o.num_train, "Synthetic training instances");
  cmd.add_option("--num-dev", o.num_dev, "Synthetic dev instances (0: half the test size)");
  cmd.add_option("--num-test", o.num_test, "Synthetic test instances");
  cmd.add_option("--data-seed", o.data_seed, "Synthetic corpus seed");
  cmd.add_option("--variant", o.variant, "Model variant");
  cmd.add_option("--seed", o.seed, "Run seed (initialisation, shuffling, dropout)");
  cmd.add_option("--epochs", o.epochs, "Training epochs");
  cmd.add_option("--batch-size", o.batch_size, "Mini-batch size");
  cmd.add_option("--lr", o.lr, "Learning rate");
  cmd.add_option("--beta", o.beta, "SSC loss weight");
  cmd.add_option("--gamma", o.gamma, "ACP loss weight");
  cmd.add_option("--weight-decay", o.weight_decay, "Decoupled weight decay");
  cmd.add_option("--backbone", o.backbone, "toy | pretrained");
  cmd.add_option("--pretrained", o.pretrained, "Directory with config.json, vocab.txt, model.safetensors");
  cmd.add_option("--d-h", o.d_h, "Toy backbone hidden size");
  cmd.add_option("--layers", o.layers, "Toy backbone layers");
  cmd.add_option("--heads", o.heads, "Toy backbone attention heads");
  cmd.add_option("--dropout", o.dropout, "Backbone dropout");
  cmd.add_option("--max-total-tokens", o.max_total_tokens, "Prompt length limit");
  cmd.add_option("--max-arg-tokens", o.max_arg_tokens, "Per-argument length limit");
}

RunConfig resolve(const Overrides& o, const RunConfig& base = default_run_config()) {
  RunConfig c = o.config_path.empty() ? base : load_run_config(o.config_path);
  if (o.output) c.output_dir = *o.output;
  if (o.corpus) c.corpus.source = *o.corpus;
  if (o.num_train) c.corpus.synthetic.num_train = *o.num_train;
  if (o.num_dev) c.corpus.synthetic.num_dev = *o.num_dev;
  if (o.num_test) c.corpus.synthetic.num_test = *o.num_test;
  if (o.data_seed) c.corpus.synthetic.seed = *o.data_seed;
  if (o.variant) c.training.variant = parse_variant_or_throw(*o.variant);
  if (o.seed) c.training.seed = *o.seed;
  if (o.epochs) c.training.epochs = *o.epochs;
  if (o.batch_size) c.training.batch_size = *o.batch_size;
  if (o.lr) c.training.learning_rate = *o.lr;
  if (o.beta) c.training.beta = *o.beta;
  if (o.gamma) c.training.gamma = *o.gamma;
  if (o.weight_decay) c.training.weight_decay = *o.weight_decay;
  if (o.backbone) {
    if (*o.backbone == "toy") c.backbone.kind = BackboneKind::Toy;
    else if (*o.backbone == "pretrained") c.backbone.kind = BackboneKind::Pretrained;
    else throw ConfigError("--backbone must be toy or pretrained");
  }
  if (o.pretrained) {
    c.backbone.pretrained_path = *o.pretrained;
    if (!o.backbone) c.backbone.kind = BackboneKind::Pretrained;
  }
  if (o.d_h) c.backbone.toy.d_h = *o.d_h;
  if (o.layers) c.backbone.toy.layers = *o.layers;
  if (o.heads) c.backbone.toy.heads = *o.heads;
  if (o.dropout) c.backbone.toy.dropout = *o.dropout;
  if (o.max_total_tokens) c.templates.max_total_tokens = *o.max_total_tokens;
  if (o.max_arg_tokens) c.templates.max_arg_tokens = *o.max_arg_tokens;
  c.validate();
  return c;
}

fs::path prepare_output(const RunConfig& c, const char* command) {
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  save_run_config(dir / (std::string(command) + ".config.json"), c);
  return dir;
}

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void print_manifest(std::ostream& out, const SplitManifest& m) {
  out << "split    Comparison Contingency Expansion Temporal    total\n";
  for (auto [name, counts] : {std::pair{"train", &m.train}, std::pair{"dev", &m.dev}, std::pair{"test", &m.test}}) {
    std::size_t total = 0;
    char line[128];
    for (auto n : *counts) total += n;
    std::snprintf(line, sizeof line, "%-8s %10zu %11zu %9zu %8zu %8zu\n", name, (*counts)[0], (*counts)[1],
                  (*counts)[2], (*counts)[3], total);
    out << line;
  }
  if (m.excluded) out << "excluded (sections 23-24): " << m.excluded << '\n';
}

// ---------------------------------------------------------------------------

int cmd_prepare(const Overrides& o, std::ostream& out) {
  const RunConfig c = resolve(o);
  const fs::path dir = prepare_output(c, "prepare");
  const PreparedCorpus corpus = load_run_corpus(c.corpus);
  const fs::path corpus_dir = dir / "corpus";
  fs::create_directories(corpus_dir);
  save_corpus(corpus_dir / "train.jsonl", corpus.split.train, CorpusFormat::Jsonl);
  save_corpus(corpus_dir / "dev.jsonl", corpus.split.dev, CorpusFormat::Jsonl);
  save_corpus(corpus_dir / "test.jsonl", corpus.split.test, CorpusFormat::Jsonl);

  auto manifest = to_json(corpus.manifest);
  manifest["source"] = c.corpus.source;
  manifest["reference_mismatches"] = corpus.reference_diff;
  std::ofstream(corpus_dir / "manifest.json") << manifest.dump(2) << '\n';

  print_manifest(out, corpus.manifest);
  if (c.corpus.source != "synthetic" && !fs::is_directory(c.corpus.source)) {
    if (corpus.reference_diff.empty()) {
      out << "split counts match the PDTB 3.0 reference\n";
    } else {
      out << "differences from the PDTB 3.0 reference:\n";
      for (const auto& d : corpus.reference_diff) out << "  " << d << '\n';
    }
  }
  out << "wrote " << corpus_dir.string() << '\n';
  return kOk;
}

int cmd_train(const Overrides& o, std::ostream& out) {
  const RunConfig c = resolve(o);
  const fs::path dir = prepare_output(c, "train");
  const PreparedCorpus corpus = load_run_corpus(c.corpus);
  TepromptModel model = build_model(c, c.training.variant, corpus.split.train);

  out << "variant " << to_string(c.training.variant) << ", beta " << c.training.beta << ", gamma "
      << c.training.gamma << ", lr " << c.training.learning_rate << ", batch " << c.training.batch_size << ", epochs "
      << c.training.epochs << ", seed " << c.training.seed << '\n';

  std::ofstream log(dir / "train_log.jsonl");
  CheckpointInfo info;
  info.seed = c.training.seed;
  info.config = to_json(c);
  const fs::path ckpt = dir / "checkpoint";
  TrainingOptions options;
  options.log = &log;
  std::size_t steps_per_epoch = (corpus.split.train.size() + c.training.batch_size - 1) / c.training.batch_size;
  options.on_best = [&](const TepromptModel& m, const EpochRecord& rec) {
    info.epoch = rec.epoch;
    info.step = rec.epoch * steps_per_epoch;
    info.dev_macro_f1 = rec.dev ? std::optional<double>(rec.dev->macro_f1) : std::nullopt;
    save_checkpoint(m, ckpt, info);
  };
  const TrainingResult result = train(model, corpus.split.train, corpus.split.dev, c.training, options);

  for (const auto& rec : result.epochs) {
    out << "epoch " << rec.epoch << ": loss " << fixed(rec.loss);
    if (rec.dev) out << ", dev acc " << fixed(rec.dev->accuracy) << ", dev macro-F1 " << fixed(rec.dev->macro_f1);
    out << '\n';
  }
  const auto& best = result.epochs.at(result.best_epoch - 1);
  if (best.dev) {
    out << "best epoch " << result.best_epoch << ": dev acc " << fixed(best.dev->accuracy) << ", dev macro-F1 "
        << fixed(best.dev->macro_f1) << '\n';
  }
  out << "checkpoint " << ckpt.string() << '\n';
  return kOk;
}

fs::path checkpoint_dir(const std::optional<std::string>& flag, const RunConfig& c) {
  const fs::path p = flag ? fs::path(*flag) : fs::path(c.output_dir) / "checkpoint";
  if (!fs::exists(p / "manifest.json")) throw DataError("no checkpoint at " + p.string());
  return p;
}

// Evaluation and inspection start from the configuration stored with the
// checkpoint; -c and explicit flags still take precedence.
std::pair<RunConfig, LoadedCheckpoint> resolve_with_checkpoint(const Overrides& o,
                                                               const std::optional<std::string>& flag) {
  const fs::path ckpt = checkpoint_dir(flag, resolve(o));
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  RunConfig c = resolve(o);
  if (o.config_path.empty() && loaded.info.config.is_object()) {
    c = resolve(o, run_config_from_json(loaded.info.config));
  }
  return {std::move(c), std::move(loaded)};
}

int cmd_evaluate(const Overrides& o, const std::optional<std::string>& ckpt_flag, const std::string& split_name,
                 std::ostream& out) {
  auto [c, loaded] = resolve_with_checkpoint(o, ckpt_flag);
  const fs::path dir = prepare_output(c, "evaluate");
  if (o.variant && parse_variant_or_throw(*o.variant) != loaded.model.variant()) {
    throw ConfigError("checkpoint holds variant " + std::string(to_string(loaded.model.variant())) +
                      " but --variant asks for " + *o.variant);
  }
  const PreparedCorpus corpus = load_run_corpus(c.corpus);
  const auto& instances = split_name == "dev" ? corpus.split.dev : corpus.split.test;
  const EvaluationReport report = evaluate(loaded.model, instances, loaded.info.seed, config_hash(c));
  write_report(dir / ("report_" + split_name + ".json"), report);
  const std::vector<EvaluationReport> rows{report};
  const std::string table = format_report_table(rows);
  std::ofstream(dir / ("report_" + split_name + ".txt")) << table;
  out << table;
  out << "confusion (rows gold, columns predicted; Comparison Contingency Expansion Temporal)\n";
  for (const auto& r : report.confusion) {
    out << "  " << r[0] << ' ' << r[1] << ' ' << r[2] << ' ' << r[3] << '\n';
  }
  return kOk;
}

int cmd_ablate(const Overrides& o, const std::vector<std::string>& only, std::ostream& out) {
  const RunConfig c = resolve(o);
  const fs::path dir = prepare_output(c, "ablate");
  const PreparedCorpus corpus = load_run_corpus(c.corpus);
  std::vector<AblationVariant> variants;
  for (const auto& name : only) variants.push_back(parse_variant_or_throw(name));
  if (variants.empty()) variants.assign(kAllVariants.begin(), kAllVariants.end());

  const AblationResult result = run_ablation_matrix(corpus.split, c, variants);
  const auto reports = result.reports();
  nlohmann::ordered_json rows = nlohmann::json::array();
  for (const auto& row : result.rows) {
    auto j = report_to_json(row.report);
    j["seconds"] = row.seconds;
    j["best_epoch"] = row.training.best_epoch;
    rows.push_back(j);
  }
  nlohmann::ordered_json doc;
  doc["complete"] = result.complete();
  if (!result.complete()) {
    doc["failed_variant"] = to_string(*result.failed_variant);
    doc["error"] = result.error;
  }
  doc["rows"] = rows;
  std::ofstream(dir / "ablation.json") << doc.dump(2) << '\n';
  const std::string table = format_report_table(reports);
  std::ofstream(dir / "ablation.txt") << table;
  {
    std::ofstream csv(dir / "ablation_groups.csv");
    write_grouped_csv(csv, reports);
  }
  out << table;
  if (!result.complete()) {
    throw TrainingError("variant " + std::string(to_string(*result.failed_variant)) + " failed: " + result.error +
                        " (partial results kept in " + dir.string() + ")");
  }
  return kOk;
}

void print_table(std::ostream& out, const char* title, const AnswerSpace& space, const Vector& probs,
                 const ConnectiveSenseMap* map, std::size_t limit) {
  std::vector<std::size_t> order(space.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (limit < order.size()) {
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return probs(static_cast<Eigen::Index>(a)) > probs(static_cast<Eigen::Index>(b));
    });
    order.resize(limit);
  }
  out << title << '\n';
  for (auto i : order) {
    char line[160];
    std::snprintf(line, sizeof line, "  %-20s %-12s %.6f\n", space[i].surface.c_str(),
                  std::string(to_string(entry_sense(space, i, map))).c_str(), probs(static_cast<Eigen::Index>(i)));
    out << line;
  }
}

int cmd_inspect(const Overrides& o, const std::optional<std::string>& ckpt_flag, std::optional<std::string> arg1,
                std::optional<std::string> arg2, const std::optional<std::string>& instance_id, std::ostream& out) {
  auto [c, loaded] = resolve_with_checkpoint(o, ckpt_flag);
  const TepromptModel& model = loaded.model;

  if (instance_id) {
    const PreparedCorpus corpus = load_run_corpus(c.corpus);
    std::optional<DiscourseInstance> found;
    for (const auto* part : {&corpus.split.test, &corpus.split.dev, &corpus.split.train}) {
      for (const auto& inst : *part) {
        if (inst.id == *instance_id) found = inst;
      }
    }
    if (!found) throw DataError("no instance with id " + *instance_id);
    arg1 = found->arg1;
    arg2 = found->arg2;
    out << "instance " << found->id << " (gold " << to_string(found->sense) << ", connective \"" << found->connective
        << "\")\n";
  }
  if (!arg1 || !arg2) throw ConfigError("inspect needs --arg1 and --arg2, or --instance");
  for (const auto& [label, text] : {std::pair{"arg1", &*arg1}, std::pair{"arg2", &*arg2}}) {
    if (model.backbone().tokenize(*text).empty()) {
      throw DataError(std::string(label) + " text \"" + *text + "\" produces no tokens");
    }
  }

  const fs::path dir = prepare_output(c, "inspect");
  const PromptEncoding enc = model.encode(*arg1, *arg2);
  const HeadOutputs heads = model.forward(enc);
  const Prediction pred = decide(model, heads);

  out << "variant " << to_string(model.variant()) << "\n";
  out << "prompt: " << model.backbone().tokenizer().decode(enc.token_ids) << "\n";
  if (heads.drr_probs.size() > 0) {
    print_table(out, "DRR head answers:", model.spaces().drr, heads.drr_probs, nullptr, model.spaces().drr.size());
    const auto agg = sense_probabilities(heads.drr_probs, model.spaces().drr, nullptr);
    out << "DRR head senses:\n";
    for (Sense s : kAllSenses) {
      out << "  " << to_string(s) << ' ' << fixed(agg[index_of(s)], 6) << '\n';
    }
  }
  if (heads.ssc_probs.size() > 0) {
    print_table(out, "SSC head answers:", model.spaces().ssc, heads.ssc_probs, nullptr, model.spaces().ssc.size());
  }
  if (heads.acp_probs.size() > 0) {
    print_table(out, "ACP head answers (top 10):", model.spaces().acp, heads.acp_probs, &model.spaces().connectives,
                10);
  }
  out << "decision: " << to_string(pred.sense) << " (head " << to_string(pred.head) << ", answer \"" << pred.answer
      << "\", p = " << fixed(pred.probs(static_cast<Eigen::Index>(pred.answer_index)), 6) << ", sense p = "
      << fixed(pred.sense_probs[index_of(pred.sense)], 6) << ")\n";

  if (heads.fused_state.size() > 0) {
    const fs::path states = dir / "inspect_states.csv";
    std::ofstream csv(states);
    csv << "dim,fused_state,drr_mask_state\n";
    char line[96];
    for (Eigen::Index i = 0; i < heads.fused_state.size(); ++i) {
      std::snprintf(line, sizeof line, "%ld,%.17g,%.17g\n", static_cast<long>(i), heads.fused_state(i),
                    heads.drr_mask_state(i));
      csv << line;
    }
    out << "states written to " << states.string() << '\n';
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prompt-learning classifier for implicit discourse relations", "teprompt"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  Overrides o;
  auto* prepare = app.add_subcommand("prepare", "Materialise the corpus splits and their manifest");
  add_config_flags(*prepare, o);
  auto* train_cmd = app.add_subcommand("train", "Train a variant and keep the best-dev checkpoint");
  add_config_flags(*train_cmd, o);

  std::optional<std::string> ckpt;
  std::string split = "test";
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a checkpoint on the test (or dev) split");
  add_config_flags(*evaluate_cmd, o);
  evaluate_cmd->add_option("--checkpoint", ckpt, "Checkpoint directory (default <output>/checkpoint)");
  evaluate_cmd->add_option("--split", split, "test | dev")->check(CLI::IsMember({"test", "dev"}));

  std::vector<std::string> only;
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every variant");
  add_config_flags(*ablate, o);
  ablate->add_option("--only", only, "Restrict to these variants");

  std::optional<std::string> arg1, arg2, instance;
  auto* inspect = app.add_subcommand("inspect", "Show per-head answer probabilities for one argument pair");
  add_config_flags(*inspect, o);
  inspect->add_option("--checkpoint", ckpt, "Checkpoint directory (default <output>/checkpoint)");
  inspect->add_option("--arg1", arg1, "First argument text");
  inspect->add_option("--arg2", arg2, "Second argument text");
  inspect->add_option("--instance", instance, "Instance id from the configured corpus");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      err << sub->help();
    } else {
      err << app.help();
    }
    return kConfigError;
  }

  spdlog::set_level(spdlog::level::from_str(log_level));
  try {
    if (*prepare) return cmd_prepare(o, out);
    if (*train_cmd) return cmd_train(o, out);
    if (*evaluate_cmd) return cmd_evaluate(o, ckpt, split, out);
    if (*ablate) return cmd_ablate(o, only, out);
    if (*inspect) return cmd_inspect(o, ckpt, arg1, arg2, instance, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kConfigError;
}

}  // namespace teprompt::cli
