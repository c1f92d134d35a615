#include "teprompt/sense.hpp"

#include "teprompt/errors.hpp"

namespace teprompt {

std::optional<Sense> parse_sense(std::string_view text) noexcept {
  for (Sense s : kAllSenses) {
    if (text == to_string(s)) return s;
  }
  return std::nullopt;
}

Sense parse_sense_or_throw(std::string_view text) {
  if (auto s = parse_sense(text)) return *s;
  throw DataError("unknown sense label \"" + std::string(text) +
                  "\"; expected one of Comparison, Contingency, Expansion, Temporal");
}

}  // namespace teprompt
