#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace edusft {

enum class AnswerRule { TaggedBlock, Labeled, BareLine };

struct ExtractedAnswer {
    char letter;
    AnswerRule rule;
};

// Finds the final option letter in a free-form response. Tiers are tried in
// order and the last match within the first matching tier wins:
//   1. <answer>X</answer> (X in A-E, surrounding whitespace allowed)
//   2. "Answer: X" / "Cevap: X", label case-insensitive, X optionally in parens
//   3. a line consisting only of X, "(X)", "X)" or "X."
std::optional<ExtractedAnswer> extract_answer_detailed(std::string_view response);

inline std::optional<char> extract_answer(std::string_view response) {
    if (auto a = extract_answer_detailed(response)) return a->letter;
    return std::nullopt;
}

}  // namespace edusft
