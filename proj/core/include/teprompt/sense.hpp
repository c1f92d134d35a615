#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace teprompt {

/// Top-level PDTB relation senses. Enumerator order is the canonical class
/// index used by confusion matrices and report rows.
enum class Sense : std::size_t { Comparison = 0, Contingency = 1, Expansion = 2, Temporal = 3 };

inline constexpr std::size_t kNumSenses = 4;

inline constexpr std::array<Sense, kNumSenses> kAllSenses = {
    Sense::Comparison, Sense::Contingency, Sense::Expansion, Sense::Temporal};

constexpr std::size_t index_of(Sense s) noexcept { return static_cast<std::size_t>(s); }

constexpr std::string_view to_string(Sense s) noexcept {
  switch (s) {
    case Sense::Comparison: return "Comparison";
    case Sense::Contingency: return "Contingency";
    case Sense::Expansion: return "Expansion";
    case Sense::Temporal: return "Temporal";
  }
  return "?";
}

/// Exact, case-sensitive match against the four label names.
std::optional<Sense> parse_sense(std::string_view text) noexcept;

/// Like parse_sense, but throws DataError naming the offending value and the
/// four legal labels.
Sense parse_sense_or_throw(std::string_view text);

}  // namespace teprompt
