#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "teprompt/sense.hpp"

namespace teprompt {

/// One implicit relation: an argument pair, its gold top-level sense and the
/// connective the annotators inserted between the arguments.
struct DiscourseInstance {
  std::string arg1;
  std::string arg2;
  Sense sense = Sense::Expansion;
  std::string connective;
  int section = 0;  // 0-24
  std::string id;

  bool operator==(const DiscourseInstance&) const = default;
};

struct CorpusSplit {
  std::vector<DiscourseInstance> train;
  std::vector<DiscourseInstance> dev;
  std::vector<DiscourseInstance> test;
};

enum class CorpusFormat { Jsonl, Tsv };

CorpusFormat parse_corpus_format(const std::string& name);

/// Guess the format from the file extension (".tsv" -> Tsv, else Jsonl).
CorpusFormat corpus_format_for(const std::filesystem::path& path);

/// Reads one record per line. Fields: arg1, arg2, sense, connective,
/// section, id. TSV files carry a header row naming those columns in any
/// order. Blank lines are skipped. Throws DataError with the 1-based line
/// number on a missing or malformed field.
std::vector<DiscourseInstance> load_corpus(const std::filesystem::path& path, CorpusFormat format);

void save_corpus(const std::filesystem::path& path, std::span<const DiscourseInstance> instances,
                 CorpusFormat format);

/// Checks the per-instance invariants (non-empty args and connective,
/// section in 0-24). Throws DataError.
void validate_instance(const DiscourseInstance& instance);

/// Throws DataError if any id repeats across the three lists.
void validate_unique_ids(const CorpusSplit& split);

struct SectionSplitResult {
  CorpusSplit split;
  std::size_t excluded = 0;  // instances in sections 23-24
};

/// Standard PDTB partition: train 2-20, dev 0-1, test 21-22. Sections 23-24
/// are dropped and counted.
SectionSplitResult split_by_sections(std::span<const DiscourseInstance> instances);

/// Training-set sense proportions of the PDTB 3.0 four-way split
/// (8645/1937/5916/1447 out of 17945), indexed by Sense.
inline constexpr std::array<std::size_t, kNumSenses> kPdtbTrainCounts = {1937, 5916, 8645, 1447};
inline constexpr std::array<std::size_t, kNumSenses> kPdtbDevCounts = {190, 579, 748, 136};
inline constexpr std::array<std::size_t, kNumSenses> kPdtbTestCounts = {154, 529, 643, 148};

struct SyntheticOptions {
  std::size_t num_train = 2000;
  std::size_t num_test = 400;
  /// 0 selects ceil(num_test / 2).
  std::size_t num_dev = 0;
  std::uint64_t seed = 7;

  bool operator==(const SyntheticOptions&) const = default;
};

/// Desk-scale stand-in for the licensed corpus. Each instance carries one
/// planted cue word whose sense (see synthetic_cue_sense) is the gold label,
/// and the connective is the answer word tied to that cue. Class counts
/// follow the PDTB training proportions exactly (largest remainder), and the
/// output is a pure function of the options.
CorpusSplit generate_synthetic(const SyntheticOptions& options);

/// The generator's inverse map: the sense planted by a cue word, if `word`
/// is one. Used by tests as an independent oracle.
std::optional<Sense> synthetic_cue_sense(std::string_view word);

/// Finds the planted cue in an instance by scanning both arguments.
std::optional<Sense> recover_planted_sense(const DiscourseInstance& instance);

/// Per-class counts per split, as written by `prepare`.
struct SplitManifest {
  std::array<std::size_t, kNumSenses> train{};
  std::array<std::size_t, kNumSenses> dev{};
  std::array<std::size_t, kNumSenses> test{};
  std::size_t excluded = 0;

  std::size_t train_total() const;
  std::size_t dev_total() const;
  std::size_t test_total() const;
  bool operator==(const SplitManifest&) const = default;
};

SplitManifest make_manifest(const CorpusSplit& split, std::size_t excluded = 0);

/// Human-readable differences against the PDTB 3.0 reference counts; empty
/// when everything matches.
std::vector<std::string> diff_against_pdtb(const SplitManifest& manifest);

}  // namespace teprompt
