#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace edusft {

struct TokenSpan {
    std::size_t offset = 0;
    std::size_t length = 0;
};

// Pure text segmentation. count() must equal segment().size().
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::string id() const = 0;
    virtual std::vector<TokenSpan> segment(std::string_view text) const = 0;
    virtual std::size_t count(std::string_view text) const { return segment(text).size(); }
};

// Maximal runs of non-whitespace bytes.
class WhitespaceTokenizer final : public Tokenizer {
public:
    std::string id() const override { return "whitespace"; }
    std::vector<TokenSpan> segment(std::string_view text) const override;
    std::size_t count(std::string_view text) const override;
};

// One token per byte.
class ByteTokenizer final : public Tokenizer {
public:
    std::string id() const override { return "byte"; }
    std::vector<TokenSpan> segment(std::string_view text) const override;
    std::size_t count(std::string_view text) const override { return text.size(); }
};

// Throws std::invalid_argument for unknown ids.
std::unique_ptr<Tokenizer> make_tokenizer(std::string_view id);

}  // namespace edusft
