#include "edusft/answer.hpp"

#include <cctype>

#include "edusft/text.hpp"

namespace edusft {

namespace {

bool is_letter_ae(char c) { return c >= 'A' && c <= 'E'; }
bool is_ascii_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::optional<char> last_tagged(std::string_view s) {
    constexpr std::string_view open = "<answer>";
    constexpr std::string_view close = "</answer>";
    std::optional<char> found;
    std::size_t pos = 0;
    while ((pos = s.find(open, pos)) != std::string_view::npos) {
        const auto body_start = pos + open.size();
        const auto end = s.find(close, body_start);
        if (end == std::string_view::npos) break;
        const auto body = text::trim(s.substr(body_start, end - body_start));
        if (body.size() == 1 && is_letter_ae(body[0])) found = body[0];
        pos = body_start;
    }
    return found;
}

bool iequals_ascii(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) return false;
    }
    return true;
}

std::optional<char> last_labeled(std::string_view s) {
    std::optional<char> found;
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::size_t label_len = 0;
        for (std::string_view label : {"answer", "cevap"}) {
            if (i + label.size() <= s.size() && iequals_ascii(s.substr(i, label.size()), label)) {
                label_len = label.size();
                break;
            }
        }
        if (label_len == 0) continue;
        if (i > 0 && is_ascii_alpha(s[i - 1])) continue;
        std::size_t j = i + label_len;
        while (j < s.size() && (s[j] == ' ' || s[j] == '\t')) ++j;
        if (j >= s.size() || s[j] != ':') continue;
        ++j;
        while (j < s.size() && (s[j] == ' ' || s[j] == '\t')) ++j;
        bool paren = false;
        if (j < s.size() && s[j] == '(') {
            paren = true;
            ++j;
        }
        if (j >= s.size() || !is_letter_ae(s[j])) continue;
        const char letter = s[j];
        ++j;
        if (paren) {
            if (j >= s.size() || s[j] != ')') continue;
            ++j;
        }
        if (j < s.size() && is_ascii_alpha(s[j])) continue;
        found = letter;
    }
    return found;
}

std::optional<char> last_bare_line(std::string_view s) {
    std::optional<char> found;
    for (auto line : text::split_lines(s)) {
        line = text::trim(line);
        if (line.size() == 1 && is_letter_ae(line[0])) {
            found = line[0];
        } else if (line.size() == 3 && line[0] == '(' && line[2] == ')' && is_letter_ae(line[1])) {
            found = line[1];
        } else if (line.size() == 2 && is_letter_ae(line[0]) && (line[1] == ')' || line[1] == '.')) {
            found = line[0];
        }
    }
    return found;
}

}  // namespace

std::optional<ExtractedAnswer> extract_answer_detailed(std::string_view response) {
    if (auto c = last_tagged(response)) return ExtractedAnswer{*c, AnswerRule::TaggedBlock};
    if (auto c = last_labeled(response)) return ExtractedAnswer{*c, AnswerRule::Labeled};
    if (auto c = last_bare_line(response)) return ExtractedAnswer{*c, AnswerRule::BareLine};
    return std::nullopt;
}

}  // namespace edusft
