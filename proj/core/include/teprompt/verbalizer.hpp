#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "teprompt/corpus.hpp"
#include "teprompt/sense.hpp"
#include "teprompt/tokenizer.hpp"

namespace teprompt {

enum class Task { Drr, Ssc, Acp };

std::string_view to_string(Task task);

/// One scored answer: the vocabulary token read at the [MASK] position and
/// the surface it stands for. DRR and SSC entries carry their sense; ACP
/// entries are mapped through a ConnectiveSenseMap. `members` lists every
/// connective surface that scores through this token (more than one when
/// multi-word connectives share a first sub-token).
struct AnswerEntry {
  TokenId token = 0;
  std::string surface;
  std::optional<Sense> sense;
  std::vector<std::string> members;
};

class AnswerSpace {
 public:
  AnswerSpace() = default;
  AnswerSpace(Task task, std::vector<AnswerEntry> entries);

  Task task() const { return task_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<AnswerEntry>& entries() const { return entries_; }
  const AnswerEntry& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<TokenId>& token_ids() const { return token_ids_; }

  /// Index of the entry whose surface or member list contains `surface`.
  std::optional<std::size_t> find(std::string_view surface) const;
  /// Throws std::out_of_range naming the surface.
  std::size_t index_of(std::string_view surface) const;

 private:
  Task task_ = Task::Drr;
  std::vector<AnswerEntry> entries_;
  std::vector<TokenId> token_ids_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// Connective -> sense assignment for the ACP head, keyed by entry surface.
/// Each connective gets the sense it co-occurs with most often in training;
/// ties go to the sense that is more frequent corpus-wide, then to the
/// earlier sense in label order.
struct ConnectiveSenseMap {
  std::map<std::string, Sense> mapping;
  std::map<std::string, std::array<std::size_t, kNumSenses>> frequencies;

  std::optional<Sense> find(std::string_view surface) const;
  bool operator==(const ConnectiveSenseMap&) const = default;
};

/// The sixteen DRR answer words grouped by sense, in table order.
const std::array<std::pair<Sense, std::vector<std::string_view>>, kNumSenses>& drr_answer_table();

/// DRR answer space: 16 single-token words. Throws ConfigError naming any
/// word that the tokenizer splits into several pieces (or maps to [UNK]).
AnswerSpace build_drr_space(const Tokenizer& tokenizer);

/// SSC answer space: the four sense label words. Multi-piece labels are
/// scored through their first piece (logged).
AnswerSpace build_ssc_space(const Tokenizer& tokenizer);

/// ACP answer space from the distinct training connectives (sorted by
/// surface). Connectives are scored through their first sub-token;
/// connectives sharing one are merged into a single entry with pooled
/// counts (logged). Throws ConfigError when `train` is empty.
std::pair<AnswerSpace, ConnectiveSenseMap> build_acp_space(std::span<const DiscourseInstance> train,
                                                           const Tokenizer& tokenizer);

/// Rebuilds an ACP space from stored entries (checkpoint loading).
AnswerSpace make_acp_space(std::vector<AnswerEntry> entries);

/// Sense of a predicted answer surface. ACP spaces need `map`. Throws
/// std::out_of_range when the surface is not in the space.
Sense verbalize(std::string_view surface, const AnswerSpace& space, const ConnectiveSenseMap* map = nullptr);

/// Sense of entry `index`.
Sense entry_sense(const AnswerSpace& space, std::size_t index, const ConnectiveSenseMap* map = nullptr);

/// Human-readable audit listing: one line per entry with token id, surface,
/// sense and (for ACP) merged members and counts.
void write_answer_space_listing(std::ostream& out, const AnswerSpace& space, const Tokenizer& tokenizer,
                                const ConnectiveSenseMap* map = nullptr);

}  // namespace teprompt
