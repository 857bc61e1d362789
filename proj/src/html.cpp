#include "edusft/html.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "edusft/text.hpp"

namespace edusft::html {

namespace {

const std::set<std::string, std::less<>> kVoid = {"area", "base", "br",   "col",   "embed",  "hr",    "img",
                                                  "input", "link", "meta", "param", "source", "track", "wbr"};
const std::set<std::string, std::less<>> kRawText = {"script", "style", "textarea", "title"};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':'; }

struct Builder {
    std::unique_ptr<Node> root = std::make_unique<Node>();
    Node* current = nullptr;

    Builder() {
        root->tag = "#document";
        current = root.get();
    }

    Node* append(std::unique_ptr<Node> node) {
        node->parent = current;
        current->children.push_back(std::move(node));
        return current->children.back().get();
    }

    void add_text(std::string text) {
        if (text.empty()) return;
        if (!current->children.empty() && current->children.back()->kind == Node::Kind::Text) {
            current->children.back()->text += text;
            return;
        }
        auto node = std::make_unique<Node>();
        node->kind = Node::Kind::Text;
        node->text = std::move(text);
        append(std::move(node));
    }

    bool in_scope(std::string_view tag, std::initializer_list<std::string_view> barriers) const {
        for (Node* n = current; n && n != root.get(); n = n->parent) {
            if (n->tag == tag) return true;
            for (auto b : barriers) {
                if (n->tag == b) return false;
            }
        }
        return false;
    }

    void close(std::string_view tag) {
        for (Node* n = current; n && n != root.get(); n = n->parent) {
            if (n->tag == tag) {
                current = n->parent;
                return;
            }
        }
    }

    void open(std::unique_ptr<Node> node, bool self_closing) {
        const std::string tag = node->tag;
        static const std::set<std::string, std::less<>> closes_p = {
            "p", "div", "ul", "ol", "h1", "h2", "h3", "h4", "h5", "h6", "pre", "blockquote", "table", "section",
            "article", "figure", "header", "footer", "nav", "aside", "hr"};
        if (closes_p.contains(tag) && in_scope("p", {"div", "section", "article", "li", "td", "blockquote", "figure"})) {
            close("p");
        }
        if (tag == "li" && in_scope("li", {"ul", "ol"})) close("li");
        if ((tag == "td" || tag == "th") && (in_scope("td", {"tr"}) || in_scope("th", {"tr"}))) {
            close(in_scope("td", {"tr"}) ? "td" : "th");
        }
        if (tag == "tr" && in_scope("tr", {"table"})) close("tr");
        Node* n = append(std::move(node));
        if (!self_closing && !kVoid.contains(tag)) current = n;
    }
};

}  // namespace

std::string decode_entities(std::string_view s) {
    static const std::pair<std::string_view, char32_t> kNamed[] = {
        {"amp", '&'},      {"lt", '<'},        {"gt", '>'},        {"quot", '"'},      {"apos", '\''},
        {"nbsp", 0xA0},    {"ndash", 0x2013},  {"mdash", 0x2014},  {"hellip", 0x2026}, {"laquo", 0xAB},
        {"raquo", 0xBB},   {"ccedil", 0xE7},   {"Ccedil", 0xC7},   {"ouml", 0xF6},     {"Ouml", 0xD6},
        {"uuml", 0xFC},    {"Uuml", 0xDC},     {"times", 0xD7},    {"divide", 0xF7},   {"deg", 0xB0},
        {"rsquo", 0x2019}, {"lsquo", 0x2018},  {"rdquo", 0x201D},  {"ldquo", 0x201C},  {"copy", 0xA9},
        {"middot", 0xB7},  {"minus", 0x2212},  {"pi", 0x3C0},      {"alpha", 0x3B1},   {"beta", 0x3B2},
    };
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i++]);
            continue;
        }
        const auto semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back(s[i++]);
            continue;
        }
        const auto name = s.substr(i + 1, semi - i - 1);
        std::optional<char32_t> cp;
        if (!name.empty() && name[0] == '#') {
            try {
                const bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
                const std::string digits(name.substr(hex ? 2 : 1));
                if (!digits.empty()) cp = static_cast<char32_t>(std::stoul(digits, nullptr, hex ? 16 : 10));
            } catch (const std::exception&) {
                cp.reset();
            }
        } else {
            for (const auto& [n, c] : kNamed) {
                if (n == name) cp = c;
            }
        }
        if (!cp) {
            out.push_back(s[i++]);
            continue;
        }
        if (*cp == 0xA0) out.push_back(' ');
        else text::append_utf8(out, *cp);
        i = semi + 1;
    }
    return out;
}

Document parse(std::string_view src) {
    Builder b;
    std::size_t i = 0;
    std::string pending_text;
    auto flush = [&] {
        if (!pending_text.empty()) b.add_text(decode_entities(pending_text));
        pending_text.clear();
    };
    while (i < src.size()) {
        if (src[i] != '<') {
            pending_text.push_back(src[i++]);
            continue;
        }
        if (src.compare(i, 4, "<!--") == 0) {
            flush();
            const auto end = src.find("-->", i + 4);
            i = end == std::string_view::npos ? src.size() : end + 3;
            continue;
        }
        if (src.compare(i, 9, "<![CDATA[") == 0) {
            flush();
            const auto end = src.find("]]>", i + 9);
            b.add_text(std::string(src.substr(i + 9, (end == std::string_view::npos ? src.size() : end) - i - 9)));
            i = end == std::string_view::npos ? src.size() : end + 3;
            continue;
        }
        if (i + 1 < src.size() && (src[i + 1] == '!' || src[i + 1] == '?')) {
            flush();
            const auto end = src.find('>', i);
            i = end == std::string_view::npos ? src.size() : end + 1;
            continue;
        }
        const bool closing = i + 1 < src.size() && src[i + 1] == '/';
        std::size_t j = i + (closing ? 2 : 1);
        const std::size_t name_start = j;
        while (j < src.size() && name_char(src[j])) ++j;
        if (j == name_start || !std::isalpha(static_cast<unsigned char>(src[name_start]))) {
            pending_text.push_back(src[i++]);  // a literal '<'
            continue;
        }
        flush();
        const std::string tag = lower(src.substr(name_start, j - name_start));
        if (closing) {
            const auto end = src.find('>', j);
            i = end == std::string_view::npos ? src.size() : end + 1;
            b.close(tag);
            continue;
        }
        auto node = std::make_unique<Node>();
        node->tag = tag;
        bool self_closing = false;
        // attributes
        while (j < src.size()) {
            while (j < src.size() && std::isspace(static_cast<unsigned char>(src[j]))) ++j;
            if (j >= src.size()) break;
            if (src[j] == '>') {
                ++j;
                break;
            }
            if (src[j] == '/') {
                self_closing = true;
                ++j;
                continue;
            }
            const std::size_t an = j;
            while (j < src.size() && !std::isspace(static_cast<unsigned char>(src[j])) && src[j] != '=' &&
                   src[j] != '>' && src[j] != '/') {
                ++j;
            }
            std::string name = lower(src.substr(an, j - an));
            std::string value;
            while (j < src.size() && std::isspace(static_cast<unsigned char>(src[j]))) ++j;
            if (j < src.size() && src[j] == '=') {
                ++j;
                while (j < src.size() && std::isspace(static_cast<unsigned char>(src[j]))) ++j;
                if (j < src.size() && (src[j] == '"' || src[j] == '\'')) {
                    const char q = src[j++];
                    const auto end = src.find(q, j);
                    const auto stop = end == std::string_view::npos ? src.size() : end;
                    value = decode_entities(src.substr(j, stop - j));
                    j = stop == src.size() ? stop : stop + 1;
                } else {
                    const std::size_t vs = j;
                    while (j < src.size() && !std::isspace(static_cast<unsigned char>(src[j])) && src[j] != '>') ++j;
                    value = decode_entities(src.substr(vs, j - vs));
                }
            }
            if (!name.empty()) node->attrs.emplace_back(std::move(name), std::move(value));
        }
        i = j;
        if (kRawText.contains(tag) && !self_closing) {
            const std::string close = "</" + tag;
            std::size_t end = i;
            for (;;) {
                end = src.find("</", end);
                if (end == std::string_view::npos) break;
                if (lower(src.substr(end, close.size())) == close) break;
                end += 2;
            }
            const auto stop = end == std::string_view::npos ? src.size() : end;
            std::string raw(src.substr(i, stop - i));
            Node* n = b.append(std::move(node));
            if (!raw.empty()) {
                auto t = std::make_unique<Node>();
                t->kind = Node::Kind::Text;
                t->text = tag == "title" || tag == "textarea" ? decode_entities(raw) : raw;
                t->parent = n;
                n->children.push_back(std::move(t));
            }
            const auto gt = stop == src.size() ? src.size() : src.find('>', stop);
            i = gt == std::string_view::npos ? src.size() : gt + 1;
            continue;
        }
        b.open(std::move(node), self_closing);
    }
    flush();
    return Document{std::move(b.root)};
}

std::optional<std::string> Node::attr(std::string_view name) const {
    for (const auto& [k, v] : attrs) {
        if (k == name) return v;
    }
    return std::nullopt;
}

std::vector<std::string> Node::classes() const {
    std::vector<std::string> out;
    const auto cls = attr("class");
    if (!cls) return out;
    std::size_t i = 0;
    while (i < cls->size()) {
        while (i < cls->size() && std::isspace(static_cast<unsigned char>((*cls)[i]))) ++i;
        const std::size_t s = i;
        while (i < cls->size() && !std::isspace(static_cast<unsigned char>((*cls)[i]))) ++i;
        if (i > s) out.push_back(cls->substr(s, i - s));
    }
    return out;
}

bool Node::has_class(std::string_view cls) const {
    const auto all = classes();
    return std::find(all.begin(), all.end(), cls) != all.end();
}

std::string text_content(const Node& node) {
    if (node.kind == Node::Kind::Text) return node.text;
    std::string out;
    for (const auto& c : node.children) out += text_content(*c);
    return out;
}

bool matches(const Node& node, std::string_view selector) {
    if (!node.is_element()) return false;
    const auto mark = selector.find_first_of(".#");
    const auto tag = selector.substr(0, mark);
    if (!tag.empty() && node.tag != lower(tag)) return false;
    if (mark == std::string_view::npos) return !tag.empty();
    const auto value = selector.substr(mark + 1);
    if (selector[mark] == '.') return node.has_class(value);
    return node.attr("id") == std::string(value);
}

namespace {
void collect(const Node& n, std::string_view selector, std::vector<const Node*>& out, bool first_only) {
    if (first_only && !out.empty()) return;
    if (matches(n, selector)) {
        out.push_back(&n);
        if (first_only) return;
    }
    for (const auto& c : n.children) collect(*c, selector, out, first_only);
}
}  // namespace

const Node* find_first(const Node& root, std::string_view selector) {
    std::vector<const Node*> out;
    collect(root, selector, out, true);
    return out.empty() ? nullptr : out.front();
}

std::vector<const Node*> find_all(const Node& root, std::string_view selector) {
    std::vector<const Node*> out;
    collect(root, selector, out, false);
    return out;
}

}  // namespace edusft::html
