#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace edusft::text {

struct FoldOptions {
    bool fold_case = true;
    bool fold_diacritics = false;
};

// Decodes UTF-8 leniently: an invalid byte is returned as U+FFFD and skipped.
std::vector<char32_t> decode_utf8(std::string_view s);
void append_utf8(std::string& out, char32_t cp);

// Simple (one-to-one) lowercase mapping over Latin, Greek and Cyrillic.
// U+0130 (capital I with dot) maps to plain 'i', so "BELKİ" and "belki" fold
// together; U+0049 maps to 'i' as in the default Unicode fold.
char32_t simple_lower(char32_t cp);

// Base letter for a precomposed Latin letter with diacritics, or the input
// unchanged. Turkish dotless i (U+0131) folds to 'i'.
char32_t strip_diacritic(char32_t cp);

// Folds text for matching. Combining marks (U+0300..U+036F) are removed when
// diacritic folding is on.
std::string fold(std::string_view s, FoldOptions opts);

std::string_view trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);
bool is_blank(std::string_view s);
// Lines without their terminators; a final newline does not start an extra line.
std::vector<std::string_view> split_lines(std::string_view s);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

}  // namespace edusft::text
