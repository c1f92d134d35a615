#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "teprompt/corpus.hpp"
#include "teprompt/model.hpp"
#include "teprompt/sense.hpp"

namespace teprompt {

/// Decision of one instance: the sense, the head that made it, the winning
/// answer, the head's full probability vector and the probabilities summed
/// per sense.
struct Prediction {
  Sense sense = Sense::Comparison;
  Task head = Task::Drr;
  std::size_t answer_index = 0;
  std::string answer;
  Vector probs;
  std::array<double, kNumSenses> sense_probs{};
};

/// Probability mass of each sense under `probs` over `space`.
std::array<double, kNumSenses> sense_probabilities(const Vector& probs, const AnswerSpace& space,
                                                   const ConnectiveSenseMap* map);

/// Applies the variant's decision head to precomputed head outputs.
Prediction decide(const TepromptModel& model, const HeadOutputs& outputs);

Prediction predict(const TepromptModel& model, const DiscourseInstance& instance);
/// Throws ConfigError when `expected` differs from the model's variant.
Prediction predict(const TepromptModel& model, const DiscourseInstance& instance, AblationVariant expected);

struct EvaluationReport {
  std::string variant;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t total = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<double, kNumSenses> precision{};
  std::array<double, kNumSenses> recall{};
  std::array<double, kNumSenses> per_class_f1{};
  /// False for classes with neither gold nor predicted instances; those are
  /// left out of the macro average.
  std::array<bool, kNumSenses> in_macro{};
  /// confusion[gold][predicted].
  std::array<std::array<std::size_t, kNumSenses>, kNumSenses> confusion{};

  bool operator==(const EvaluationReport&) const = default;
};

/// Description of the macro-average convention stored with every report.
inline constexpr const char* kMacroConvention =
    "mean over classes present in gold or predictions; gold-only classes score 0";

/// Metrics of predictions against gold labels. Throws DataError when the
/// lists differ in length or are empty.
EvaluationReport compute_report(std::span<const Sense> gold, std::span<const Sense> predicted);

/// Predicts every instance and scores the result. Throws DataError on an
/// empty test list.
EvaluationReport evaluate(const TepromptModel& model, std::span<const DiscourseInstance> test,
                          std::uint64_t seed = 0, std::string config_hash = {});

nlohmann::ordered_json report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const nlohmann::json& j);
void write_report(const std::filesystem::path& path, const EvaluationReport& report);
EvaluationReport read_report(const std::filesystem::path& path);

/// Plain-text table, one row per report, with F1 difference against the
/// drr_only row (when present).
std::string format_report_table(std::span<const EvaluationReport> reports);

/// Columnar data grouping DRR / DRR+SSC / DRR+ACP / DRR+SSC+ACP rows.
void write_grouped_csv(std::ostream& out, std::span<const EvaluationReport> reports);

/// 64-bit FNV-1a digest rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace teprompt
