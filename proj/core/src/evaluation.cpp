#include "teprompt/evaluation.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "teprompt/errors.hpp"

namespace teprompt {

std::array<double, kNumSenses> sense_probabilities(const Vector& probs, const AnswerSpace& space,
                                                   const ConnectiveSenseMap* map) {
  std::array<double, kNumSenses> out{};
  for (std::size_t i = 0; i < space.size(); ++i) {
    out[index_of(entry_sense(space, i, map))] += probs(static_cast<Eigen::Index>(i));
  }
  return out;
}

Prediction decide(const TepromptModel& model, const HeadOutputs& outputs) {
  Prediction p;
  p.head = model.spec().decision_head;
  const AnswerSpace& space = model.spaces().get(p.head);
  const ConnectiveSenseMap* map = p.head == Task::Acp ? &model.spaces().connectives : nullptr;
  p.probs = outputs.probs(p.head);
  if (p.probs.size() != static_cast<Eigen::Index>(space.size())) {
    throw std::logic_error("decision head produced no probabilities");
  }
  p.answer_index = argmax(p.probs);
  p.answer = space[p.answer_index].surface;
  p.sense = entry_sense(space, p.answer_index, map);
  p.sense_probs = sense_probabilities(p.probs, space, map);
  return p;
}

Prediction predict(const TepromptModel& model, const DiscourseInstance& instance) {
  return decide(model, model.forward(model.encode(instance)));
}

Prediction predict(const TepromptModel& model, const DiscourseInstance& instance, AblationVariant expected) {
  if (expected != model.variant()) {
    throw ConfigError("checkpoint holds variant " + std::string(to_string(model.variant())) + ", not " +
                      std::string(to_string(expected)));
  }
  return predict(model, instance);
}

EvaluationReport compute_report(std::span<const Sense> gold, std::span<const Sense> predicted) {
  if (gold.size() != predicted.size()) {
    throw DataError("gold and predicted label lists differ in length (" + std::to_string(gold.size()) + " vs " +
                    std::to_string(predicted.size()) + ")");
  }
  if (gold.empty()) throw DataError("cannot score an empty test set");
  EvaluationReport r;
  r.total = gold.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++r.confusion[index_of(gold[i])][index_of(predicted[i])];
    if (gold[i] == predicted[i]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);

  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t k = 0; k < kNumSenses; ++k) {
    std::size_t support = 0, claimed = 0;
    for (std::size_t j = 0; j < kNumSenses; ++j) {
      support += r.confusion[k][j];
      claimed += r.confusion[j][k];
    }
    const double tp = static_cast<double>(r.confusion[k][k]);
    r.precision[k] = claimed ? tp / static_cast<double>(claimed) : 0.0;
    r.recall[k] = support ? tp / static_cast<double>(support) : 0.0;
    // 2tp / (gold + predicted) is the harmonic mean of precision and recall.
    r.per_class_f1[k] = (support + claimed) ? 2.0 * tp / static_cast<double>(support + claimed) : 0.0;
    r.in_macro[k] = support + claimed > 0;
    if (r.in_macro[k]) {
      sum += r.per_class_f1[k];
      ++counted;
    }
  }
  r.macro_f1 = sum / static_cast<double>(counted);
  return r;
}

EvaluationReport evaluate(const TepromptModel& model, std::span<const DiscourseInstance> test, std::uint64_t seed,
                          std::string config_hash) {
  if (test.empty()) throw DataError("evaluation needs at least one test instance");
  std::vector<Sense> gold, pred;
  gold.reserve(test.size());
  pred.reserve(test.size());
  for (const auto& inst : test) {
    gold.push_back(inst.sense);
    pred.push_back(predict(model, inst).sense);
  }
  EvaluationReport r = compute_report(gold, pred);
  r.variant = std::string(to_string(model.variant()));
  r.seed = seed;
  r.config_hash = std::move(config_hash);
  return r;
}

nlohmann::ordered_json report_to_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["variant"] = r.variant;
  j["seed"] = r.seed;
  j["config_hash"] = r.config_hash;
  j["total"] = r.total;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  j["macro_convention"] = kMacroConvention;
  nlohmann::ordered_json classes;
  for (Sense s : kAllSenses) {
    const auto k = index_of(s);
    classes[std::string(to_string(s))] = {{"precision", r.precision[k]},
                                          {"recall", r.recall[k]},
                                          {"f1", r.per_class_f1[k]},
                                          {"in_macro", r.in_macro[k]}};
  }
  j["per_class"] = classes;
  j["labels"] = nlohmann::json::array();
  for (Sense s : kAllSenses) j["labels"].push_back(to_string(s));
  j["confusion"] = r.confusion;
  return j;
}

EvaluationReport report_from_json(const nlohmann::json& j) {
  try {
    EvaluationReport r;
    r.variant = j.at("variant").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.total = j.at("total").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    for (Sense s : kAllSenses) {
      const auto& c = j.at("per_class").at(std::string(to_string(s)));
      const auto k = index_of(s);
      r.precision[k] = c.at("precision").get<double>();
      r.recall[k] = c.at("recall").get<double>();
      r.per_class_f1[k] = c.at("f1").get<double>();
      r.in_macro[k] = c.at("in_macro").get<bool>();
    }
    r.confusion = j.at("confusion").get<decltype(r.confusion)>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed evaluation report: ") + e.what());
  }
}

void write_report(const std::filesystem::path& path, const EvaluationReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << report_to_json(report).dump(2) << '\n';
}

EvaluationReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

const EvaluationReport* find_variant(std::span<const EvaluationReport> reports, std::string_view name) {
  for (const auto& r : reports) {
    if (r.variant == name) return &r;
  }
  return nullptr;
}

}  // namespace

std::string format_report_table(std::span<const EvaluationReport> reports) {
  const EvaluationReport* base = find_variant(reports, "drr_only");
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-18s %8s %8s %8s %8s %8s %8s %10s\n", "variant", "acc", "macro_f1", "Comp",
                "Cont", "Exp", "Temp", "dF1_vs_drr");
  out << line;
  for (const auto& r : reports) {
    const std::string delta = base ? ((r.macro_f1 >= base->macro_f1 ? "+" : "") + fixed(r.macro_f1 - base->macro_f1))
                                   : std::string("n/a");
    std::snprintf(line, sizeof line, "%-18s %8s %8s %8s %8s %8s %8s %10s\n", r.variant.c_str(),
                  fixed(r.accuracy).c_str(), fixed(r.macro_f1).c_str(), fixed(r.per_class_f1[0]).c_str(),
                  fixed(r.per_class_f1[1]).c_str(), fixed(r.per_class_f1[2]).c_str(),
                  fixed(r.per_class_f1[3]).c_str(), delta.c_str());
    out << line;
  }
  return out.str();
}

void write_grouped_csv(std::ostream& out, std::span<const EvaluationReport> reports) {
  static constexpr std::pair<const char*, const char*> groups[] = {
      {"DRR", "drr_only"}, {"DRR+SSC", "drr_plus_ssc"}, {"DRR+ACP", "drr_plus_acp"}, {"DRR+SSC+ACP", "teprompt"}};
  out << "group,variant,accuracy,macro_f1\n";
  for (const auto& [group, variant] : groups) {
    if (const auto* r = find_variant(reports, variant)) {
      out << group << ',' << variant << ',' << fixed(r->accuracy, 6) << ',' << fixed(r->macro_f1, 6) << '\n';
    }
  }
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace teprompt
