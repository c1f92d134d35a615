#include "teprompt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "teprompt/errors.hpp"
#include "teprompt/rng.hpp"

namespace teprompt {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 6> kFieldNames = {"arg1", "arg2", "sense", "connective", "section",
                                                         "id"};

std::string line_error(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  return path.string() + ":" + std::to_string(line) + ": " + what;
}

DiscourseInstance instance_from_json(const json& record, const std::filesystem::path& path,
                                     std::size_t line) {
  if (!record.is_object()) throw DataError(line_error(path, line, "record is not a JSON object"));
  auto text_field = [&](std::string_view name) -> std::string {
    auto it = record.find(name);
    if (it == record.end()) {
      throw DataError(line_error(path, line, "missing field \"" + std::string(name) + "\""));
    }
    if (!it->is_string()) {
      throw DataError(line_error(path, line, "field \"" + std::string(name) + "\" must be a string"));
    }
    return it->get<std::string>();
  };

  DiscourseInstance inst;
  inst.arg1 = text_field("arg1");
  inst.arg2 = text_field("arg2");
  try {
    inst.sense = parse_sense_or_throw(text_field("sense"));
  } catch (const DataError& e) {
    throw DataError(line_error(path, line, e.what()));
  }
  inst.connective = text_field("connective");
  auto section = record.find("section");
  if (section == record.end()) throw DataError(line_error(path, line, "missing field \"section\""));
  if (section->is_number_integer()) {
    inst.section = section->get<int>();
  } else if (section->is_string()) {
    try {
      inst.section = std::stoi(section->get<std::string>());
    } catch (const std::exception&) {
      throw DataError(line_error(path, line, "field \"section\" is not an integer"));
    }
  } else {
    throw DataError(line_error(path, line, "field \"section\" is not an integer"));
  }
  auto id = record.find("id");
  if (id != record.end() && id->is_string()) {
    inst.id = id->get<std::string>();
  } else if (id != record.end() && id->is_number_integer()) {
    inst.id = std::to_string(id->get<long long>());
  } else {
    inst.id = "line-" + std::to_string(line);
  }
  try {
    validate_instance(inst);
  } catch (const DataError& e) {
    throw DataError(line_error(path, line, e.what()));
  }
  return inst;
}

std::string tsv_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tsv_unescape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size()) {
      switch (text[++i]) {
        case 't': out += '\t'; break;
        case 'n': out += '\n'; break;
        case 'r': out += '\r'; break;
        default: out += text[i];
      }
    } else {
      out += text[i];
    }
  }
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    cells.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::vector<DiscourseInstance> load_jsonl(std::istream& in, const std::filesystem::path& path) {
  std::vector<DiscourseInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(line_error(path, lineno, std::string("invalid JSON: ") + e.what()));
    }
    out.push_back(instance_from_json(record, path, lineno));
  }
  return out;
}

std::vector<DiscourseInstance> load_tsv(std::istream& in, const std::filesystem::path& path) {
  std::vector<DiscourseInstance> out;
  std::string line;
  std::size_t lineno = 0;
  std::unordered_map<std::string, std::size_t> column;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    auto cells = split_tabs(line);
    if (column.empty()) {
      for (std::size_t i = 0; i < cells.size(); ++i) column[cells[i]] = i;
      for (auto name : kFieldNames) {
        if (name != "id" && !column.contains(std::string(name))) {
          throw DataError(line_error(path, lineno, "header lacks column \"" + std::string(name) + "\""));
        }
      }
      continue;
    }
    json record = json::object();
    for (auto name : kFieldNames) {
      auto it = column.find(std::string(name));
      if (it == column.end() || it->second >= cells.size()) continue;
      auto value = tsv_unescape(cells[it->second]);
      record[std::string(name)] = value;
    }
    out.push_back(instance_from_json(record, path, lineno));
  }
  return out;
}

}  // namespace

CorpusFormat parse_corpus_format(const std::string& name) {
  if (name == "jsonl") return CorpusFormat::Jsonl;
  if (name == "tsv") return CorpusFormat::Tsv;
  throw ConfigError("unknown corpus format \"" + name + "\" (expected jsonl or tsv)");
}

CorpusFormat corpus_format_for(const std::filesystem::path& path) {
  return path.extension() == ".tsv" ? CorpusFormat::Tsv : CorpusFormat::Jsonl;
}

void validate_instance(const DiscourseInstance& instance) {
  if (instance.arg1.empty()) throw DataError("empty arg1 in instance " + instance.id);
  if (instance.arg2.empty()) throw DataError("empty arg2 in instance " + instance.id);
  if (instance.connective.empty()) throw DataError("empty connective in instance " + instance.id);
  if (instance.section < 0 || instance.section > 24) {
    throw DataError("section " + std::to_string(instance.section) + " outside 0-24 in instance " +
                    instance.id);
  }
}

void validate_unique_ids(const CorpusSplit& split) {
  std::unordered_set<std::string> seen;
  for (const auto* list : {&split.train, &split.dev, &split.test}) {
    for (const auto& inst : *list) {
      if (!seen.insert(inst.id).second) throw DataError("duplicate instance id \"" + inst.id + "\"");
    }
  }
}

std::vector<DiscourseInstance> load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  return format == CorpusFormat::Jsonl ? load_jsonl(in, path) : load_tsv(in, path);
}

void save_corpus(const std::filesystem::path& path, std::span<const DiscourseInstance> instances,
                 CorpusFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  if (format == CorpusFormat::Jsonl) {
    for (const auto& inst : instances) {
      // ordered_json keeps the documented field order on disk
      nlohmann::ordered_json record;
      record["arg1"] = inst.arg1;
      record["arg2"] = inst.arg2;
      record["sense"] = std::string(to_string(inst.sense));
      record["connective"] = inst.connective;
      record["section"] = inst.section;
      record["id"] = inst.id;
      out << record.dump() << '\n';
    }
  } else {
    out << "arg1\targ2\tsense\tconnective\tsection\tid\n";
    for (const auto& inst : instances) {
      out << tsv_escape(inst.arg1) << '\t' << tsv_escape(inst.arg2) << '\t' << to_string(inst.sense) << '\t'
          << tsv_escape(inst.connective) << '\t' << inst.section << '\t' << tsv_escape(inst.id) << '\n';
    }
  }
}

SectionSplitResult split_by_sections(std::span<const DiscourseInstance> instances) {
  SectionSplitResult result;
  for (const auto& inst : instances) {
    if (inst.section >= 2 && inst.section <= 20) {
      result.split.train.push_back(inst);
    } else if (inst.section == 0 || inst.section == 1) {
      result.split.dev.push_back(inst);
    } else if (inst.section == 21 || inst.section == 22) {
      result.split.test.push_back(inst);
    } else {
      ++result.excluded;
    }
  }
  if (result.excluded > 0) {
    spdlog::warn("split_by_sections: excluded {} instance(s) from sections 23-24", result.excluded);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

struct CueGroup {
  Sense sense;
  std::array<std::string_view, 6> cues;
  std::vector<std::string_view> connectives;  // answer words of the sense
};

const std::array<CueGroup, kNumSenses>& cue_groups() {
  static const std::array<CueGroup, kNumSenses> groups = {{
      {Sense::Comparison,
       {"unlike", "whereas", "conversely", "contrasting", "differed", "opposed"},
       {"similarly", "but", "however", "although"}},
      {Sense::Contingency,
       {"caused", "consequently", "triggered", "resulted", "prompted", "forced"},
       {"for", "if", "because", "so"}},
      {Sense::Expansion,
       {"moreover", "additionally", "furthermore", "namely", "included", "detailed"},
       {"instead", "by", "thereby", "specifically", "and"}},
      {Sense::Temporal,
       {"afterwards", "earlier", "meanwhile", "later", "beforehand", "subsequently"},
       {"simultaneously", "previously", "then"}},
  }};
  return groups;
}

constexpr std::array<std::string_view, 12> kSubjects = {
    "the company", "the board", "investors", "the analyst",   "the market",  "a spokesman",
    "the bank",    "officials", "the firm",  "the government", "shareholders", "traders"};
constexpr std::array<std::string_view, 12> kVerbs = {"reported", "expected", "said",     "announced",
                                                     "sold",     "bought",   "raised",   "cut",
                                                     "planned",  "rejected", "approved", "reviewed"};
constexpr std::array<std::string_view, 10> kObjects = {
    "the shares", "its earnings", "the proposal", "the contract", "new bonds",
    "the deal",   "higher prices", "the budget",  "its stake",    "the loan"};
constexpr std::array<std::string_view, 9> kModifiers = {
    "", "on monday", "last year", "in august", "this quarter", "quietly", "sharply", "again", "in tokyo"};

template <std::size_t N>
std::string_view pick(Rng& rng, const std::array<std::string_view, N>& items) {
  return items[static_cast<std::size_t>(rng.below(N))];
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string make_clause(Rng& rng) {
  std::string clause = std::string(pick(rng, kSubjects)) + " " + std::string(pick(rng, kVerbs)) + " " +
                       std::string(pick(rng, kObjects));
  auto mod = pick(rng, kModifiers);
  if (!mod.empty()) clause += " " + std::string(mod);
  return clause;
}

std::vector<std::size_t> largest_remainder_quota(std::size_t total) {
  const double sum = std::accumulate(kPdtbTrainCounts.begin(), kPdtbTrainCounts.end(), 0.0);
  std::vector<std::size_t> quota(kNumSenses);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < kNumSenses; ++k) {
    const double exact = static_cast<double>(total) * static_cast<double>(kPdtbTrainCounts[k]) / sum;
    quota[k] = static_cast<std::size_t>(exact);
    assigned += quota[k];
    remainders.emplace_back(exact - static_cast<double>(quota[k]), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++quota[remainders[i % kNumSenses].second];
  return quota;
}

std::vector<DiscourseInstance> generate_list(std::size_t count, std::uint64_t seed, std::string_view tag,
                                             std::span<const int> sections) {
  Rng rng(seed);
  auto quota = largest_remainder_quota(count);
  std::vector<Sense> senses;
  senses.reserve(count);
  for (std::size_t k = 0; k < kNumSenses; ++k) senses.insert(senses.end(), quota[k], kAllSenses[k]);
  rng.shuffle(std::span<Sense>(senses));

  std::vector<DiscourseInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& group = cue_groups()[index_of(senses[i])];
    const auto cue_index = static_cast<std::size_t>(rng.below(group.cues.size()));
    const auto cue = group.cues[cue_index];

    auto arg1 = split_words(make_clause(rng));
    auto arg2 = split_words(make_clause(rng));
    auto& target = rng.bernoulli(0.5) ? arg1 : arg2;
    const auto pos = static_cast<std::size_t>(rng.below(target.size() + 1));
    target.insert(target.begin() + static_cast<std::ptrdiff_t>(pos), std::string(cue));

    DiscourseInstance inst;
    inst.arg1 = join_words(arg1);
    inst.arg2 = join_words(arg2);
    inst.sense = senses[i];
    inst.connective = std::string(group.connectives[cue_index % group.connectives.size()]);
    inst.section = sections[i % sections.size()];
    char id[64];
    std::snprintf(id, sizeof(id), "syn-%.*s-%06zu", static_cast<int>(tag.size()), tag.data(), i);
    inst.id = id;
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace

CorpusSplit generate_synthetic(const SyntheticOptions& options) {
  static constexpr std::array<int, 19> kTrainSections = {2,  3,  4,  5,  6,  7,  8,  9,  10, 11,
                                                         12, 13, 14, 15, 16, 17, 18, 19, 20};
  static constexpr std::array<int, 2> kDevSections = {0, 1};
  static constexpr std::array<int, 2> kTestSections = {21, 22};
  const std::size_t num_dev = options.num_dev != 0 ? options.num_dev : (options.num_test + 1) / 2;
  CorpusSplit split;
  split.train = generate_list(options.num_train, Rng::mix(options.seed, 1), "train", kTrainSections);
  split.dev = generate_list(num_dev, Rng::mix(options.seed, 2), "dev", kDevSections);
  split.test = generate_list(options.num_test, Rng::mix(options.seed, 3), "test", kTestSections);
  return split;
}

std::optional<Sense> synthetic_cue_sense(std::string_view word) {
  for (const auto& group : cue_groups()) {
    for (auto cue : group.cues) {
      if (cue == word) return group.sense;
    }
  }
  return std::nullopt;
}

std::optional<Sense> recover_planted_sense(const DiscourseInstance& instance) {
  for (const auto* text : {&instance.arg1, &instance.arg2}) {
    for (const auto& w : split_words(*text)) {
      if (auto s = synthetic_cue_sense(w)) return s;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Manifests

namespace {
std::size_t sum(const std::array<std::size_t, kNumSenses>& counts) {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}
}  // namespace

std::size_t SplitManifest::train_total() const { return sum(train); }
std::size_t SplitManifest::dev_total() const { return sum(dev); }
std::size_t SplitManifest::test_total() const { return sum(test); }

SplitManifest make_manifest(const CorpusSplit& split, std::size_t excluded) {
  SplitManifest m;
  for (const auto& inst : split.train) ++m.train[index_of(inst.sense)];
  for (const auto& inst : split.dev) ++m.dev[index_of(inst.sense)];
  for (const auto& inst : split.test) ++m.test[index_of(inst.sense)];
  m.excluded = excluded;
  return m;
}

std::vector<std::string> diff_against_pdtb(const SplitManifest& manifest) {
  std::vector<std::string> diffs;
  auto compare = [&](std::string_view split, const std::array<std::size_t, kNumSenses>& got,
                     const std::array<std::size_t, kNumSenses>& want) {
    for (Sense s : kAllSenses) {
      const auto k = index_of(s);
      if (got[k] != want[k]) {
        diffs.push_back(std::string(split) + " " + std::string(to_string(s)) + ": " + std::to_string(got[k]) +
                        " (expected " + std::to_string(want[k]) + ")");
      }
    }
    if (sum(got) != sum(want)) {
      diffs.push_back(std::string(split) + " total: " + std::to_string(sum(got)) + " (expected " +
                      std::to_string(sum(want)) + ")");
    }
  };
  compare("train", manifest.train, kPdtbTrainCounts);
  compare("dev", manifest.dev, kPdtbDevCounts);
  compare("test", manifest.test, kPdtbTestCounts);
  return diffs;
}

}  // namespace teprompt
