#include "teprompt/verbalizer.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "teprompt/errors.hpp"

namespace teprompt {

std::string_view to_string(Task task) {
  switch (task) {
    case Task::Drr: return "DRR";
    case Task::Ssc: return "SSC";
    case Task::Acp: return "ACP";
  }
  return "?";
}

AnswerSpace::AnswerSpace(Task task, std::vector<AnswerEntry> entries) : task_(task), entries_(std::move(entries)) {
  std::set<TokenId> seen;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (!seen.insert(e.token).second) {
      throw ConfigError(std::string(to_string(task)) + " answer space repeats token id " + std::to_string(e.token) +
                        " (\"" + e.surface + "\")");
    }
    token_ids_.push_back(e.token);
    lookup_.emplace(e.surface, i);
    for (const auto& m : e.members) lookup_.emplace(m, i);
  }
}

std::optional<std::size_t> AnswerSpace::find(std::string_view surface) const {
  auto it = lookup_.find(std::string(surface));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t AnswerSpace::index_of(std::string_view surface) const {
  if (auto i = find(surface)) return *i;
  throw std::out_of_range("\"" + std::string(surface) + "\" is not in the " + std::string(to_string(task_)) +
                          " answer space");
}

std::optional<Sense> ConnectiveSenseMap::find(std::string_view surface) const {
  auto it = mapping.find(std::string(surface));
  if (it == mapping.end()) return std::nullopt;
  return it->second;
}

const std::array<std::pair<Sense, std::vector<std::string_view>>, kNumSenses>& drr_answer_table() {
  static const std::array<std::pair<Sense, std::vector<std::string_view>>, kNumSenses> table = {{
      {Sense::Comparison, {"similarly", "but", "however", "although"}},
      {Sense::Contingency, {"for", "if", "because", "so"}},
      {Sense::Expansion, {"instead", "by", "thereby", "specifically", "and"}},
      {Sense::Temporal, {"simultaneously", "previously", "then"}},
  }};
  return table;
}

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

}  // namespace

AnswerSpace build_drr_space(const Tokenizer& tokenizer) {
  std::vector<AnswerEntry> entries;
  for (const auto& [sense, words] : drr_answer_table()) {
    for (auto word : words) {
      const auto pieces = tokenizer.pieces(word);
      const auto ids = tokenizer.tokenize(word);
      if (ids.size() != 1 || ids[0] == tokenizer.unk_id()) {
        throw ConfigError("DRR answer word \"" + std::string(word) + "\" is not a single vocabulary token (pieces: " +
                          join(pieces) + ")");
      }
      entries.push_back({ids[0], std::string(word), sense, {}});
    }
  }
  return AnswerSpace(Task::Drr, std::move(entries));
}

AnswerSpace build_ssc_space(const Tokenizer& tokenizer) {
  std::vector<AnswerEntry> entries;
  for (Sense s : kAllSenses) {
    const auto word = to_string(s);
    const auto ids = tokenizer.tokenize(word);
    if (ids.empty()) throw ConfigError("SSC label word \"" + std::string(word) + "\" tokenizes to nothing");
    if (ids.size() > 1) {
      spdlog::info("SSC label \"{}\" splits into {} pieces ({}); scoring its first piece", word, ids.size(),
                   join(tokenizer.pieces(word)));
    }
    if (ids[0] == tokenizer.unk_id()) {
      throw ConfigError("SSC label word \"" + std::string(word) + "\" maps to the unknown token");
    }
    entries.push_back({ids[0], std::string(word), s, {}});
  }
  return AnswerSpace(Task::Ssc, std::move(entries));
}

namespace {

Sense argmax_sense(const std::array<std::size_t, kNumSenses>& counts,
                   const std::array<std::size_t, kNumSenses>& global) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumSenses; ++k) {
    if (counts[k] > counts[best] || (counts[k] == counts[best] && global[k] > global[best])) best = k;
  }
  return kAllSenses[best];
}

}  // namespace

std::pair<AnswerSpace, ConnectiveSenseMap> build_acp_space(std::span<const DiscourseInstance> train,
                                                           const Tokenizer& tokenizer) {
  if (train.empty()) throw ConfigError("cannot build the ACP answer space from an empty training set");

  std::map<std::string, std::array<std::size_t, kNumSenses>> per_connective;
  std::array<std::size_t, kNumSenses> global{};
  for (const auto& inst : train) {
    ++per_connective[inst.connective][index_of(inst.sense)];
    ++global[index_of(inst.sense)];
  }

  // Group connectives by the token that scores them.
  std::map<TokenId, std::vector<std::string>> by_token;
  for (const auto& [connective, counts] : per_connective) {
    const auto ids = tokenizer.tokenize(connective);
    if (ids.empty()) {
      spdlog::warn("ACP: connective \"{}\" tokenizes to nothing; dropped from the answer space", connective);
      continue;
    }
    if (ids[0] == tokenizer.unk_id()) {
      spdlog::warn("ACP: connective \"{}\" starts with an unknown token", connective);
    }
    by_token[ids[0]].push_back(connective);  // per_connective is sorted, so members are too
  }

  std::vector<AnswerEntry> entries;
  ConnectiveSenseMap map;
  for (auto& [token, members] : by_token) {
    std::array<std::size_t, kNumSenses> pooled{};
    for (const auto& m : members) {
      for (std::size_t k = 0; k < kNumSenses; ++k) pooled[k] += per_connective[m][k];
    }
    if (members.size() > 1) {
      spdlog::info("ACP: connectives [{}] share first sub-token \"{}\" and are merged", join(members),
                   tokenizer.vocab().token(token));
    }
    AnswerEntry entry;
    entry.token = token;
    entry.surface = members.front();
    entry.members = members;
    map.frequencies[entry.surface] = pooled;
    map.mapping[entry.surface] = argmax_sense(pooled, global);
    entries.push_back(std::move(entry));
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.surface < b.surface; });
  return {AnswerSpace(Task::Acp, std::move(entries)), std::move(map)};
}

AnswerSpace make_acp_space(std::vector<AnswerEntry> entries) { return AnswerSpace(Task::Acp, std::move(entries)); }

Sense entry_sense(const AnswerSpace& space, std::size_t index, const ConnectiveSenseMap* map) {
  const auto& entry = space[index];
  if (space.task() != Task::Acp) return *entry.sense;
  if (map == nullptr) throw std::invalid_argument("ACP verbalization needs a connective sense map");
  auto sense = map->find(entry.surface);
  if (!sense) throw std::out_of_range("connective \"" + entry.surface + "\" has no sense mapping");
  return *sense;
}

Sense verbalize(std::string_view surface, const AnswerSpace& space, const ConnectiveSenseMap* map) {
  return entry_sense(space, space.index_of(surface), map);
}

void write_answer_space_listing(std::ostream& out, const AnswerSpace& space, const Tokenizer& tokenizer,
                                const ConnectiveSenseMap* map) {
  out << "# " << to_string(space.task()) << " answer space, " << space.size() << " entries\n";
  out << "# index\ttoken_id\ttoken\tsurface\tsense";
  if (space.task() == Task::Acp) out << "\tmembers\tcounts(Comparison,Contingency,Expansion,Temporal)";
  out << '\n';
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& e = space[i];
    out << i << '\t' << e.token << '\t' << tokenizer.vocab().token(e.token) << '\t' << e.surface << '\t';
    if (space.task() == Task::Acp && map != nullptr) {
      auto s = map->find(e.surface);
      out << (s ? to_string(*s) : "?") << '\t';
      for (std::size_t m = 0; m < e.members.size(); ++m) out << (m ? "|" : "") << e.members[m];
      out << '\t';
      auto it = map->frequencies.find(e.surface);
      if (it != map->frequencies.end()) {
        for (std::size_t k = 0; k < kNumSenses; ++k) out << (k ? "," : "") << it->second[k];
      }
    } else if (e.sense) {
      out << to_string(*e.sense);
    }
    out << '\n';
  }
}

}  // namespace teprompt
