#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace edusft::html {

// Minimal forgiving HTML tree. Tag and attribute names are lowercased; text is
// entity-decoded. Unknown closing tags are ignored, unclosed elements are
// closed at end of input, and <p>/<li> close implicitly like browsers do.
struct Node {
    enum class Kind { Element, Text };

    Kind kind = Kind::Element;
    std::string tag;
    std::vector<std::pair<std::string, std::string>> attrs;
    std::string text;
    std::vector<std::unique_ptr<Node>> children;
    Node* parent = nullptr;

    bool is_element() const { return kind == Kind::Element; }
    bool is(std::string_view t) const { return kind == Kind::Element && tag == t; }
    std::optional<std::string> attr(std::string_view name) const;
    bool has_class(std::string_view cls) const;
    std::vector<std::string> classes() const;
};

struct Document {
    std::unique_ptr<Node> root;  // synthetic "#document" element
};

Document parse(std::string_view source);

std::string decode_entities(std::string_view s);

// Concatenated descendant text (raw, not whitespace-normalized).
std::string text_content(const Node& node);

// Simple selectors: "tag", ".class", "#id", "tag.class", "tag#id".
bool matches(const Node& node, std::string_view selector);
const Node* find_first(const Node& root, std::string_view selector);
std::vector<const Node*> find_all(const Node& root, std::string_view selector);

}  // namespace edusft::html
