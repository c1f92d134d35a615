#include "teprompt/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "teprompt/errors.hpp"

namespace teprompt {

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  for (auto& t : tokens) add(std::move(t));
}

TokenId Vocabulary::add(std::string token) {
  if (auto existing = find(token)) return *existing;
  const auto id = static_cast<TokenId>(tokens_.size());
  index_.emplace(token, id);
  tokens_.push_back(std::move(token));
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // Duplicate lines keep their slot so ids stay aligned with the
    // embedding rows of the checkpoint that shipped the file.
    const auto id = static_cast<TokenId>(v.tokens_.size());
    v.index_.emplace(line, id);
    v.tokens_.push_back(line);
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

namespace {

bool is_punct(unsigned char c) { return c < 128 && std::ispunct(c) != 0; }

TokenId require(const Vocabulary& vocab, std::string_view token) {
  auto id = vocab.find(token);
  if (!id) throw ConfigError("vocabulary lacks required special token " + std::string(token));
  return *id;
}

}  // namespace

Tokenizer::Tokenizer(TokenizerKind kind, Vocabulary vocab, bool lowercase)
    : kind_(kind), vocab_(std::move(vocab)), lowercase_(lowercase) {
  cls_id_ = require(vocab_, kClsToken);
  sep_id_ = require(vocab_, kSepToken);
  mask_id_ = require(vocab_, kMaskToken);
  unk_id_ = require(vocab_, kUnkToken);
}

std::vector<std::string> Tokenizer::basic_split(std::string_view text) const {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) != 0 || c < 32) {
      flush();
    } else if (is_punct(c)) {
      flush();
      words.emplace_back(1, ch);
    } else {
      current += lowercase_ && c < 128 ? static_cast<char>(std::tolower(c)) : ch;
    }
  }
  flush();
  return words;
}

void Tokenizer::wordpiece(const std::string& word, std::vector<std::string>& out) const {
  constexpr std::size_t kMaxChars = 100;
  if (word.size() > kMaxChars) {
    out.emplace_back(kUnkToken);
    return;
  }
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < word.size()) {
    std::size_t end = word.size();
    std::string found;
    while (start < end) {
      std::string candidate = word.substr(start, end - start);
      if (start > 0) candidate = "##" + candidate;
      if (vocab_.contains(candidate)) {
        found = std::move(candidate);
        break;
      }
      --end;
    }
    if (found.empty()) {
      out.emplace_back(kUnkToken);
      return;
    }
    pieces.push_back(std::move(found));
    start = end;
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

std::vector<std::string> Tokenizer::pieces(std::string_view text) const {
  std::vector<std::string> out;
  for (auto& word : basic_split(text)) {
    if (kind_ == TokenizerKind::WordPiece) {
      wordpiece(word, out);
    } else {
      out.push_back(vocab_.contains(word) ? word : std::string(kUnkToken));
    }
  }
  return out;
}

std::vector<TokenId> Tokenizer::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  auto plain = [&](std::string_view part) {
    for (const auto& piece : pieces(part)) {
      auto id = vocab_.find(piece);
      ids.push_back(id ? *id : unk_id_);
    }
  };
  std::size_t pos = 0;
  while (!registered_.empty()) {
    std::size_t best = std::string_view::npos;
    const std::string* which = nullptr;
    for (const auto& s : registered_) {
      const auto found = text.find(s, pos);
      if (found < best) {
        best = found;
        which = &s;
      }
    }
    if (which == nullptr) break;
    plain(text.substr(pos, best - pos));
    ids.push_back(*vocab_.find(*which));
    pos = best + which->size();
  }
  plain(text.substr(pos));
  return ids;
}

std::optional<TokenId> Tokenizer::special_id(std::string_view surface) const {
  if (surface == kClsToken) return cls_id_;
  if (surface == kSepToken) return sep_id_;
  if (surface == kMaskToken) return mask_id_;
  if (std::find(registered_.begin(), registered_.end(), surface) != registered_.end()) {
    return vocab_.find(surface);
  }
  return std::nullopt;
}

std::vector<TokenId> Tokenizer::tokenize_template(std::string_view text) const {
  std::vector<TokenId> ids;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('[', pos);
    if (open == std::string_view::npos) break;
    const auto close = text.find(']', open);
    if (close == std::string_view::npos) break;
    auto special = special_id(text.substr(open, close - open + 1));
    if (!special) {
      // Not a special surface: emit the text through the bracket as ordinary
      // text and keep scanning after it.
      auto plain = tokenize(text.substr(pos, open + 1 - pos));
      ids.insert(ids.end(), plain.begin(), plain.end());
      pos = open + 1;
      continue;
    }
    auto plain = tokenize(text.substr(pos, open - pos));
    ids.insert(ids.end(), plain.begin(), plain.end());
    ids.push_back(*special);
    pos = close + 1;
  }
  auto rest = tokenize(text.substr(pos));
  ids.insert(ids.end(), rest.begin(), rest.end());
  return ids;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    const auto& tok = vocab_.token(id);
    if (tok.starts_with("##")) {
      out += tok.substr(2);
    } else {
      if (!out.empty()) out += ' ';
      out += tok;
    }
  }
  return out;
}

std::vector<TokenId> Tokenizer::register_special_tokens(std::span<const std::string> surfaces) {
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    if (vocab_.contains(surfaces[i])) {
      throw ConfigError("special token " + surfaces[i] + " is already registered in the vocabulary");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (surfaces[j] == surfaces[i]) throw ConfigError("special token " + surfaces[i] + " listed twice");
    }
  }
  std::vector<TokenId> ids;
  for (const auto& s : surfaces) {
    ids.push_back(vocab_.add(s));
    registered_.push_back(s);
  }
  return ids;
}

Tokenizer build_word_tokenizer(std::span<const std::string> texts, bool lowercase) {
  Vocabulary vocab;
  for (auto s : {kPadToken, kUnkToken, kClsToken, kSepToken, kMaskToken}) vocab.add(std::string(s));
  // A throwaway tokenizer gives us the same normalisation as tokenize().
  Tokenizer splitter(TokenizerKind::Word, vocab, lowercase);
  for (const auto& text : texts) {
    for (const auto& word : splitter.basic_split(text)) vocab.add(word);
  }
  return Tokenizer(TokenizerKind::Word, std::move(vocab), lowercase);
}

}  // namespace teprompt
