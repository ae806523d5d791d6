#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "compsense/common.hpp"

namespace compsense {

// Serialization and tie-breaking order is always (E, C, N).
enum class Label : std::uint8_t { kEntailment = 0, kContradiction = 1, kNeutral = 2 };

inline constexpr std::array<Label, 3> kAllLabels = {
    Label::kEntailment, Label::kContradiction, Label::kNeutral};

// Gold label of an example; nullopt is the dataset's "-" (no consensus).
using Gold = std::optional<Label>;

// Probability triple indexed by label order.
using Probs = std::array<double, 3>;

constexpr std::size_t index_of(Label l) noexcept { return static_cast<std::size_t>(l); }

constexpr std::string_view label_name(Label l) noexcept {
  switch (l) {
    case Label::kEntailment: return "entailment";
    case Label::kContradiction: return "contradiction";
    case Label::kNeutral: return "neutral";
  }
  return "neutral";
}

constexpr char label_letter(Label l) noexcept {
  switch (l) {
    case Label::kEntailment: return 'E';
    case Label::kContradiction: return 'C';
    case Label::kNeutral: return 'N';
  }
  return 'N';
}

// Accepts full names (any case) and the single letters E/C/N.
inline std::optional<Label> parse_label(std::string_view s) {
  const std::string lower = ascii_lower(s);
  if (lower == "entailment" || lower == "e") return Label::kEntailment;
  if (lower == "contradiction" || lower == "c") return Label::kContradiction;
  if (lower == "neutral" || lower == "n") return Label::kNeutral;
  return std::nullopt;
}

inline std::string gold_name(const Gold& g) {
  return g ? std::string(label_name(*g)) : std::string("-");
}

// Argmax with ties going to the earlier label in (E, C, N).
inline Label argmax_label(const Probs& p) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    if (p[i] > p[best]) best = i;
  }
  return kAllLabels[best];
}

}  // namespace compsense
