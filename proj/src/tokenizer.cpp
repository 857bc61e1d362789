#include "edusft/tokenizer.hpp"

#include <stdexcept>

namespace edusft {

namespace {
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
}  // namespace

std::vector<TokenSpan> WhitespaceTokenizer::segment(std::string_view text) const {
    std::vector<TokenSpan> spans;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        if (i == text.size()) break;
        const std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        spans.push_back({start, i - start});
    }
    return spans;
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const {
    std::size_t n = 0;
    bool in_token = false;
    for (char c : text) {
        if (is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++n;
        }
    }
    return n;
}

std::vector<TokenSpan> ByteTokenizer::segment(std::string_view text) const {
    std::vector<TokenSpan> spans(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) spans[i] = {i, 1};
    return spans;
}

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view id) {
    if (id == "whitespace") return std::make_unique<WhitespaceTokenizer>();
    if (id == "byte") return std::make_unique<ByteTokenizer>();
    throw std::invalid_argument("unknown tokenizer: " + std::string(id));
}

}  // namespace edusft
