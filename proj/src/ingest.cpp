#include "edusft/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "edusft/digest.hpp"
#include "edusft/html.hpp"
#include "edusft/parallel.hpp"
#include "edusft/text.hpp"

namespace edusft::ingest {

std::string image_placeholder(std::string_view ref) { return "[[image:" + std::string(ref) + "]]"; }
std::string slides_placeholder(std::string_view deck_id) { return "[[slides:" + std::string(deck_id) + "]]"; }

SiteRules SiteRules::from_json(const json& j) {
    SiteRules r;
    auto list = [&](const char* key, std::vector<std::string>& out) {
        if (j.contains(key)) out = j.at(key).get<std::vector<std::string>>();
    };
    list("container_selectors", r.container_selectors);
    list("boilerplate_tokens", r.boilerplate_tokens);
    list("slide_patterns", r.slide_patterns);
    r.deck_dir = j.value("deck_dir", r.deck_dir);
    if (j.contains("triplets")) {
        const auto& t = j.at("triplets");
        if (t.contains("question")) r.triplets.question_labels = t.at("question").get<std::vector<std::string>>();
        if (t.contains("solution")) r.triplets.solution_labels = t.at("solution").get<std::vector<std::string>>();
        if (t.contains("answer")) r.triplets.answer_labels = t.at("answer").get<std::vector<std::string>>();
    }
    return r;
}

// --- math -------------------------------------------------------------------

namespace {

const html::Node* find_tex_annotation(const html::Node& n) {
    if (n.is("annotation")) {
        const auto enc = n.attr("encoding").value_or("");
        if (enc.find("tex") != std::string::npos) return &n;
    }
    if (n.is("script")) {
        const auto type = n.attr("type").value_or("");
        if (type.rfind("math/tex", 0) == 0) return &n;
    }
    for (const auto& c : n.children) {
        if (auto found = find_tex_annotation(*c)) return found;
    }
    return nullptr;
}

bool has_elements(const html::Node& n) {
    return std::any_of(n.children.begin(), n.children.end(), [](const auto& c) { return c->is_element(); });
}

MathResult normalize_math_node(const html::Node& n) {
    if (auto ann = find_tex_annotation(n)) return {std::string(text::trim(html::text_content(*ann))), true};
    if (!n.is_element() || (n.tag == "#document" && !has_elements(n))) {
        return {std::string(text::trim(html::text_content(n))), true};
    }
    return {text::collapse_whitespace(html::text_content(n)), false};
}

}  // namespace

MathResult normalize_math_markup(std::string_view fragment) {
    if (fragment.find('<') == std::string_view::npos) return {std::string(fragment), true};
    const auto doc = html::parse(fragment);
    if (!has_elements(*doc.root)) return {std::string(fragment), true};
    return normalize_math_node(*doc.root);
}

// --- article conversion -----------------------------------------------------

namespace {

enum class BlockKind { Paragraph, Heading, ListItem, Quote, Code, Table, Image, Slides };

struct Block {
    BlockKind kind;
    std::string text;
    std::string ref;
};

bool has_alnum(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || (c & 0x80); });
}

bool context_eligible(const Block& b) {
    return (b.kind == BlockKind::Paragraph || b.kind == BlockKind::ListItem || b.kind == BlockKind::Quote) &&
           has_alnum(b.text);
}

const std::set<std::string, std::less<>> kBoilerplateTags = {"nav",    "footer",   "header", "aside", "form",
                                                             "button", "noscript", "style",  "svg",   "select"};
const std::set<std::string, std::less<>> kInlineTags = {"a",   "abbr", "b",   "cite", "code", "em",   "font",
                                                        "i",   "kbd",  "label", "mark", "q",    "s",    "small",
                                                        "span", "strong", "sub", "sup",  "time", "u",    "var", "del", "ins"};

class Converter {
public:
    Converter(const SiteRules& rules, const std::filesystem::path& site_root, const std::filesystem::path& rel_dir,
              ArticleDoc& doc)
        : rules_(rules), site_root_(site_root), rel_dir_(rel_dir), doc_(doc) {}

    std::vector<Block> blocks;

    void convert(const html::Node& container) {
        block(container);
        flush();
    }

    void markdown(std::string_view content);

private:
    bool is_boilerplate(const html::Node& n) const {
        if (!n.is_element()) return false;
        if (kBoilerplateTags.contains(n.tag)) return true;
        if (n.is("script")) {
            return n.attr("type").value_or("").rfind("math/tex", 0) != 0;
        }
        std::vector<std::string> tokens = n.classes();
        if (auto id = n.attr("id")) tokens.push_back(*id);
        for (const auto& t : tokens) {
            const auto lt = text::fold(t, {true, false});
            for (const auto& b : rules_.boilerplate_tokens) {
                if (lt == b || lt.rfind(b + "-", 0) == 0) return true;
            }
        }
        if (n.is("div") || n.is("section") || n.is("ul")) {
            const auto all = text::collapse_whitespace(html::text_content(n));
            std::size_t link_chars = 0;
            for (const auto* a : html::find_all(n, "a")) link_chars += text::collapse_whitespace(html::text_content(*a)).size();
            if (all.size() >= 20 && link_chars * 10 > all.size() * 7) return true;
        }
        return false;
    }

    bool is_slide_frame(const html::Node& n) const {
        if (n.attr("data-deck-id")) return true;
        if (!n.is("iframe")) return false;
        const auto src = n.attr("src").value_or("");
        return std::any_of(rules_.slide_patterns.begin(), rules_.slide_patterns.end(),
                           [&](const std::string& p) { return src.find(p) != std::string::npos; });
    }

    bool is_math(const html::Node& n) const {
        return n.has_class("katex") || n.has_class("katex-display") || n.is("math") ||
               (n.is("script") && n.attr("type").value_or("").rfind("math/tex", 0) == 0);
    }

    void math(const html::Node& n) {
        const auto result = normalize_math_node(n);
        if (!result.recognized) doc_.warnings.push_back("math markup without TeX annotation passed through");
        const bool display = n.has_class("katex-display") || n.attr("type").value_or("").find("display") != std::string::npos ||
                             n.attr("display").value_or("") == "block";
        inline_ += display ? " $$" + result.latex + "$$ " : "$" + result.latex + "$";
    }

    void flush(BlockKind kind = BlockKind::Paragraph, std::string prefix = {}) {
        auto t = text::collapse_whitespace(inline_);
        inline_.clear();
        if (t.empty()) return;
        blocks.push_back({kind, prefix + t, {}});
    }

    void push_block(Block b) {
        flush(pending_kind_, pending_prefix_);
        blocks.push_back(std::move(b));
    }

    std::string resolve(std::string src) const {
        if (src.find("://") != std::string::npos || src.rfind("data:", 0) == 0) return src;
        if (!src.empty() && src.front() == '/') return std::filesystem::path(src.substr(1)).lexically_normal().generic_string();
        return (rel_dir_ / src).lexically_normal().generic_string();
    }

    void image(std::string src) {
        if (src.empty()) return;
        const auto ref = resolve(std::move(src));
        if (!seen_images_.insert(ref).second) {
            doc_.warnings.push_back("duplicate image " + ref + " skipped");
            return;
        }
        push_block({BlockKind::Image, image_placeholder(ref), ref});
    }

    void slides(const html::Node& n) {
        std::string id = n.attr("data-deck-id").value_or("");
        if (id.empty()) {
            std::string src = n.attr("src").value_or("");
            src = src.substr(0, src.find_first_of("?#"));
            // last path segment that is not a viewer verb such as /embed
            static const std::set<std::string, std::less<>> viewer = {"embed", "view", "present", "preview",
                                                                      "edit", "pub", "player", "index.html"};
            while (!src.empty()) {
                while (!src.empty() && src.back() == '/') src.pop_back();
                const auto cut = src.find_last_of('/');
                auto segment = src.substr(cut == std::string::npos ? 0 : cut + 1);
                src = cut == std::string::npos ? std::string{} : src.substr(0, cut);
                if (viewer.contains(segment)) continue;
                id = segment.substr(0, segment.find('.'));
                break;
            }
        }
        id.erase(std::remove_if(id.begin(), id.end(),
                                [](char c) { return !(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'); }),
                 id.end());
        if (id.empty()) {
            doc_.warnings.push_back("slide embed without a usable deck id");
            return;
        }
        register_deck(id);
    }

    void register_deck(const std::string& id) {
        if (!seen_decks_.insert(id).second) return;
        push_block({BlockKind::Slides, slides_placeholder(id), id});
        if (site_root_.empty()) return;
        const auto dir = site_root_ / rules_.deck_dir / id;
        if (!std::filesystem::is_directory(dir)) {
            doc_.warnings.push_back("deck " + id + ": no pre-rendered page directory");
            return;
        }
        std::vector<std::string> pages;
        for (const auto& e : std::filesystem::directory_iterator(dir)) {
            if (!e.is_regular_file()) continue;
            auto ext = text::fold(e.path().extension().string(), {true, false});
            if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".webp") {
                pages.push_back((std::filesystem::path(rules_.deck_dir) / id / e.path().filename()).generic_string());
            }
        }
        std::sort(pages.begin(), pages.end());
        if (pages.empty()) {
            doc_.warnings.push_back("deck " + id + ": page directory is empty");
            return;
        }
        doc_.slide_refs.push_back({id, pages.size(), std::move(pages)});
    }

    static bool contains_media(const html::Node& n) {
        if (n.is("img") || n.is("iframe")) return true;
        return std::any_of(n.children.begin(), n.children.end(), [](const auto& c) { return contains_media(*c); });
    }

    void inline_node(const html::Node& n) {
        if (n.kind == html::Node::Kind::Text) {
            inline_ += n.text;
            return;
        }
        if (is_math(n)) return math(n);
        if (is_boilerplate(n)) return;
        if (n.is("img")) return image(n.attr("src").value_or(n.attr("data-src").value_or("")));
        if (n.is("iframe") || n.attr("data-deck-id")) {
            if (is_slide_frame(n)) slides(n);
            return;
        }
        if (n.is("br")) {
            inline_ += ' ';
            return;
        }
        if (n.is("code")) {
            inline_ += "`" + text::collapse_whitespace(html::text_content(n)) + "`";
            return;
        }
        const bool strong = n.is("strong") || n.is("b");
        const bool em = n.is("em") || n.is("i");
        if ((strong || em) && !contains_media(n)) {
            std::string saved = std::move(inline_);
            inline_.clear();
            for (const auto& c : n.children) inline_node(*c);
            auto inner = text::collapse_whitespace(inline_);
            inline_ = std::move(saved);
            if (!inner.empty()) {
                const char* mark = strong ? "**" : "*";
                inline_ += mark + inner + mark;
            }
            return;
        }
        if (!kInlineTags.contains(n.tag)) return block(n);
        for (const auto& c : n.children) inline_node(*c);
    }

    void inline_children(const html::Node& n, BlockKind kind, std::string prefix) {
        flush(pending_kind_, pending_prefix_);
        const auto saved_kind = pending_kind_;
        const auto saved_prefix = pending_prefix_;
        pending_kind_ = kind;
        pending_prefix_ = prefix;
        for (const auto& c : n.children) inline_node(*c);
        flush(kind, prefix);
        pending_kind_ = saved_kind;
        pending_prefix_ = saved_prefix;
    }

    void block(const html::Node& n) {
        if (n.kind == html::Node::Kind::Text) {
            inline_ += n.text;
            return;
        }
        if (is_math(n)) return math(n);
        if (is_boilerplate(n)) return;
        const auto& tag = n.tag;
        if (tag.size() == 2 && tag[0] == 'h' && tag[1] >= '1' && tag[1] <= '6') {
            return inline_children(n, BlockKind::Heading, std::string(tag[1] - '0', '#') + " ");
        }
        if (tag == "p" || tag == "figcaption" || tag == "dt" || tag == "dd") {
            return inline_children(n, BlockKind::Paragraph, {});
        }
        if (tag == "ul" || tag == "ol") {
            flush(pending_kind_, pending_prefix_);
            int number = 0;
            for (const auto& c : n.children) {
                if (!c->is("li")) {
                    if (c->is_element()) block(*c);
                    continue;
                }
                list_item(*c, tag == "ol" ? std::to_string(++number) + ". " : std::string("- "));
            }
            return;
        }
        if (tag == "li") return list_item(n, "- ");
        if (tag == "pre") {
            flush(pending_kind_, pending_prefix_);
            auto code = html::text_content(n);
            while (!code.empty() && code.back() == '\n') code.pop_back();
            blocks.push_back({BlockKind::Code, "```\n" + code + "\n```", {}});
            return;
        }
        if (tag == "blockquote") return inline_children(n, BlockKind::Quote, "> ");
        if (tag == "table") return table(n);
        if (tag == "img") return image(n.attr("src").value_or(n.attr("data-src").value_or("")));
        if (tag == "iframe" || n.attr("data-deck-id")) {
            if (is_slide_frame(n)) slides(n);
            return;
        }
        if (tag == "hr" || tag == "br") return flush(pending_kind_, pending_prefix_);
        if (kInlineTags.contains(tag)) return inline_node(n);
        // generic container: runs of inline content become paragraphs
        flush(pending_kind_, pending_prefix_);
        for (const auto& c : n.children) {
            if (c->kind == html::Node::Kind::Text || kInlineTags.contains(c->tag) || c->is("br")) {
                inline_node(*c);
            } else {
                flush(pending_kind_, pending_prefix_);
                block(*c);
            }
        }
        flush(pending_kind_, pending_prefix_);
    }

    void list_item(const html::Node& li, const std::string& marker) {
        flush(pending_kind_, pending_prefix_);
        const auto saved_kind = pending_kind_;
        const auto saved_prefix = pending_prefix_;
        pending_kind_ = BlockKind::ListItem;
        pending_prefix_ = marker;
        for (const auto& c : li.children) {
            if (c->is("ul") || c->is("ol")) {
                flush(BlockKind::ListItem, marker);
                block(*c);
            } else {
                inline_node(*c);
            }
        }
        flush(BlockKind::ListItem, marker);
        pending_kind_ = saved_kind;
        pending_prefix_ = saved_prefix;
    }

    void table(const html::Node& n) {
        flush(pending_kind_, pending_prefix_);
        std::string out;
        for (const auto* row : html::find_all(n, "tr")) {
            std::string line = "|";
            for (const auto& cell : row->children) {
                if (cell->is("td") || cell->is("th")) {
                    line += " " + text::collapse_whitespace(html::text_content(*cell)) + " |";
                }
            }
            if (!out.empty()) out += "\n";
            out += line;
        }
        if (!out.empty()) blocks.push_back({BlockKind::Table, out, {}});
    }

    const SiteRules& rules_;
    std::filesystem::path site_root_;
    std::filesystem::path rel_dir_;
    ArticleDoc& doc_;
    std::string inline_;
    BlockKind pending_kind_ = BlockKind::Paragraph;
    std::string pending_prefix_;
    std::set<std::string> seen_images_;
    std::set<std::string> seen_decks_;
};

void Converter::markdown(std::string_view content) {
    std::string para;
    auto flush_para = [&] {
        inline_ = para;
        para.clear();
        flush();
    };
    // splits inline ![alt](src) images out of a text run
    auto emit_inline = [&](std::string_view line, BlockKind kind, const std::string& prefix) {
        std::size_t pos = 0;
        while (true) {
            const auto open = line.find("![", pos);
            const auto mid = open == std::string_view::npos ? open : line.find("](", open);
            const auto close = mid == std::string_view::npos ? mid : line.find(')', mid);
            if (close == std::string_view::npos) {
                inline_ += std::string(line.substr(pos));
                break;
            }
            inline_ += std::string(line.substr(pos, open - pos));
            pending_kind_ = kind;
            pending_prefix_ = prefix;
            image(std::string(line.substr(mid + 2, close - mid - 2)));
            pos = close + 1;
        }
        flush(kind, prefix);
        pending_kind_ = BlockKind::Paragraph;
        pending_prefix_.clear();
    };

    const auto lines = text::split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto raw = lines[i];
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        const auto line = text::trim(raw);
        if (line.rfind("```", 0) == 0) {
            if (!para.empty()) emit_inline(para, BlockKind::Paragraph, {}), para.clear();
            std::string code(line);
            for (++i; i < lines.size(); ++i) {
                code += "\n" + std::string(lines[i]);
                if (text::trim(lines[i]).rfind("```", 0) == 0) break;
            }
            blocks.push_back({BlockKind::Code, code, {}});
            continue;
        }
        const bool list = line.rfind("- ", 0) == 0 || line.rfind("* ", 0) == 0 || line.rfind("+ ", 0) == 0 ||
                          (line.size() > 2 && std::isdigit(static_cast<unsigned char>(line[0])) &&
                           line.find(". ") != std::string_view::npos &&
                           std::all_of(line.begin(), line.begin() + static_cast<long>(line.find(". ")),
                                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }));
        const bool structural = line.empty() || line.front() == '#' || line.front() == '>' || list ||
                                line.rfind("<iframe", 0) == 0 || line.rfind("![", 0) == 0;
        if (structural && !para.empty()) {
            emit_inline(para, BlockKind::Paragraph, {});
            para.clear();
        }
        if (line.empty()) continue;
        if (line.front() == '#') {
            blocks.push_back({BlockKind::Heading, text::collapse_whitespace(line), {}});
        } else if (line.front() == '>') {
            emit_inline(text::trim(line.substr(1)), BlockKind::Quote, "> ");
        } else if (list) {
            const auto sep = line.find(' ');
            emit_inline(text::trim(line.substr(sep + 1)), BlockKind::ListItem, std::string(line.substr(0, sep + 1)));
        } else if (line.rfind("<iframe", 0) == 0) {
            const auto frag = html::parse(line);
            if (const auto* frame = html::find_first(*frag.root, "iframe"); frame && is_slide_frame(*frame)) slides(*frame);
        } else if (line.rfind("![", 0) == 0) {
            emit_inline(line, BlockKind::Paragraph, {});
        } else {
            if (!para.empty()) para.push_back(' ');
            para += std::string(line);
        }
    }
    if (!para.empty()) emit_inline(para, BlockKind::Paragraph, {});
    (void)flush_para;
}

std::optional<Metadata> page_meta(const html::Node& root) {
    Metadata m;
    bool any = false;
    for (const auto* node : html::find_all(root, "meta")) {
        const auto name = node->attr("name").value_or("");
        if (name.rfind("curriculum:", 0) != 0) continue;
        const auto key = name.substr(11);
        const auto value = node->attr("content").value_or("");
        any = true;
        if (key == "subject") m.subject = value;
        else if (key == "unit") m.unit = value;
        else if (key == "objective") m.objective = value;
        else if (key == "topic_id" || key == "topic") m.topic_id = value;
        else if (key == "difficulty") m.difficulty = value;
    }
    if (!any) return std::nullopt;
    return m;
}

// Leading "---" block of "key: value" lines; curriculum keys fill doc.meta.
std::string_view front_matter(std::string_view content, ArticleDoc& doc) {
    if (content.rfind("---\n", 0) != 0) return content;
    const auto end = content.find("\n---", 3);
    if (end == std::string_view::npos) return content;
    Metadata m;
    bool any = false;
    for (auto line : text::split_lines(content.substr(4, end - 4))) {
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        const auto key = text::trim(line.substr(0, colon));
        const std::string value(text::trim(line.substr(colon + 1)));
        if (key == "title") doc.title = value;
        else if (key == "subject") m.subject = value, any = true;
        else if (key == "unit") m.unit = value, any = true;
        else if (key == "objective") m.objective = value, any = true;
        else if (key == "topic_id" || key == "topic") m.topic_id = value, any = true;
        else if (key == "difficulty") m.difficulty = value, any = true;
    }
    if (any) doc.meta = m;
    auto rest = content.substr(end + 4);
    const auto nl = rest.find('\n');
    return nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
}

std::size_t paragraph_score(const html::Node& n) {
    std::size_t score = 0;
    for (const auto& c : n.children) {
        if (c->is("p") || c->is("blockquote") || c->is("pre")) {
            score += text::collapse_whitespace(html::text_content(*c)).size();
        }
    }
    return score;
}

const html::Node* densest_container(const html::Node& root) {
    const html::Node* best = nullptr;
    std::size_t best_score = 0;
    for (const char* tag : {"article", "main", "section", "div", "td", "body"}) {
        for (const auto* n : html::find_all(root, tag)) {
            const auto score = paragraph_score(*n);
            if (score > best_score) {
                best = n;
                best_score = score;
            }
        }
    }
    return best;
}

}  // namespace

ArticleDoc extract_article(const DocumentSource& src, const SiteRules& rules, const std::filesystem::path& site_root) {
    ArticleDoc doc;
    doc.doc_id = src.doc_id;
    Converter conv(rules, site_root, src.rel_path.parent_path(), doc);
    if (src.markdown) {
        auto body = front_matter(src.content, doc);
        conv.markdown(body);
        for (const auto& b : conv.blocks) {
            if (b.kind == BlockKind::Heading && doc.title.empty()) doc.title = std::string(text::trim(b.text.substr(b.text.find(' ') + 1)));
        }
    } else {
        const auto page = html::parse(src.content);
        doc.meta = page_meta(*page.root);
        if (const auto* title = html::find_first(*page.root, "title")) {
            doc.title = text::collapse_whitespace(html::text_content(*title));
        }
        const html::Node* container = nullptr;
        for (const auto& sel : rules.container_selectors) {
            const auto* c = html::find_first(*page.root, sel);
            if (c && !text::is_blank(html::text_content(*c))) {
                container = c;
                break;
            }
        }
        if (!container) container = densest_container(*page.root);
        if (!container) throw EmptyBodyError("no article container found in " + src.rel_path.generic_string());
        conv.convert(*container);
        if (doc.title.empty()) {
            if (const auto* h1 = html::find_first(*page.root, "h1")) doc.title = text::collapse_whitespace(html::text_content(*h1));
        }
    }
    const auto& blocks = conv.blocks;
    if (std::none_of(blocks.begin(), blocks.end(), [](const Block& b) { return has_alnum(b.text); })) {
        throw EmptyBodyError("article body is empty in " + src.rel_path.generic_string());
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (i > 0) doc.markdown_body += "\n\n";
        doc.markdown_body += blocks[i].text;
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].kind != BlockKind::Image) continue;
        ImageContext ctx{blocks[i].ref, {}, {}, std::nullopt};
        for (std::size_t j = i; j-- > 0;) {
            if (context_eligible(blocks[j])) {
                ctx.before_paragraph = blocks[j].text;
                break;
            }
        }
        for (std::size_t j = i + 1; j < blocks.size(); ++j) {
            if (context_eligible(blocks[j])) {
                ctx.after_paragraph = blocks[j].text;
                break;
            }
        }
        doc.images.push_back(std::move(ctx));
    }
    auto extraction = extract_triplets_detailed(doc.markdown_body, rules.triplets);
    doc.triplets = std::move(extraction.triplets);
    for (const auto& skip : extraction.skipped) {
        doc.warnings.push_back("question block " + std::to_string(skip.block_index) + " skipped: " + skip.reason);
    }
    return doc;
}

// --- triplets ---------------------------------------------------------------

namespace {

enum class Label { Question, Solution, Answer };

bool is_word_byte(char c) { return std::isalpha(static_cast<unsigned char>(c)) || (static_cast<unsigned char>(c) & 0x80); }

// Byte length of a prefix of s that folds to `label`, or 0.
std::size_t match_label(std::string_view s, const std::string& label) {
    const text::FoldOptions opts{true, true};
    const auto want = text::fold(label, opts);
    const auto want_cps = text::decode_utf8(want).size();
    const auto cps = text::decode_utf8(s);
    if (cps.size() < want_cps) return 0;
    std::string prefix;
    for (std::size_t k = 0; k < want_cps; ++k) text::append_utf8(prefix, cps[k]);
    if (text::fold(prefix, opts) != want) return 0;
    return prefix.size();
}

struct LabelHit {
    Label label;
    std::string remainder;
};

std::optional<LabelHit> detect_label(std::string_view block, const TripletRules& rules) {
    std::size_t i = 0;
    bool heading = false;
    bool emphasized = false;
    while (i < block.size() && (block[i] == '#' || block[i] == ' ')) {
        heading |= block[i] == '#';
        ++i;
    }
    while (i < block.size() && (block[i] == '*' || block[i] == '_')) {
        emphasized = true;
        ++i;
    }
    const auto rest = block.substr(i);
    const std::pair<Label, const std::vector<std::string>*> groups[] = {{Label::Question, &rules.question_labels},
                                                                        {Label::Solution, &rules.solution_labels},
                                                                        {Label::Answer, &rules.answer_labels}};
    for (const auto& [label, names] : groups) {
        for (const auto& name : *names) {
            const auto len = match_label(rest, name);
            if (len == 0) continue;
            std::size_t j = len;
            if (j < rest.size() && is_word_byte(rest[j])) continue;
            bool numbered = false;
            bool colon = false;
            while (j < rest.size() && rest[j] == ' ') ++j;
            while (j < rest.size() && std::isdigit(static_cast<unsigned char>(rest[j]))) {
                numbered = true;
                ++j;
            }
            if (numbered && j < rest.size() && (rest[j] == '.' || rest[j] == ')')) ++j;
            while (j < rest.size() && (rest[j] == '*' || rest[j] == '_' || rest[j] == ' ')) ++j;
            if (j < rest.size() && rest[j] == ':') {
                colon = true;
                ++j;
            }
            while (j < rest.size() && (rest[j] == '*' || rest[j] == '_')) ++j;
            if (!(colon || numbered || heading || emphasized)) continue;
            return LabelHit{label, std::string(text::trim(rest.substr(j)))};
        }
    }
    return std::nullopt;
}

std::optional<char> answer_letter(std::string content) {
    content.erase(std::remove_if(content.begin(), content.end(), [](char c) { return c == '*' || c == '_'; }),
                  content.end());
    auto t = text::trim(content);
    std::size_t i = 0;
    if (i < t.size() && t[i] == '(') ++i;
    if (i >= t.size() || t[i] < 'A' || t[i] > 'E') return std::nullopt;
    const char letter = t[i++];
    if (i < t.size() && is_word_byte(t[i])) return std::nullopt;
    return letter;
}

std::vector<std::string_view> split_blocks(std::string_view body) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= body.size()) {
        const auto sep = body.find("\n\n", start);
        const auto end = sep == std::string_view::npos ? body.size() : sep;
        const auto blk = text::trim(body.substr(start, end - start));
        if (!blk.empty()) out.push_back(blk);
        if (sep == std::string_view::npos) break;
        start = sep + 2;
    }
    return out;
}

}  // namespace

TripletExtraction extract_triplets_detailed(std::string_view markdown_body, const TripletRules& rules) {
    TripletExtraction out;
    enum class State { None, Question, Solution, Answer };
    State state = State::None;
    std::string question, solution, answer;
    std::size_t ordinal = 0;

    auto append = [](std::string& dst, std::string_view s) {
        if (s.empty()) return;
        if (!dst.empty()) dst += "\n\n";
        dst += s;
    };
    auto finalize = [&] {
        if (state == State::None) return;
        const auto letter = answer_letter(answer);
        if (state != State::Answer) {
            out.skipped.push_back({ordinal, state == State::Question ? "missing solution and answer" : "missing answer"});
        } else if (text::is_blank(solution)) {
            out.skipped.push_back({ordinal, "missing solution"});
        } else if (!letter) {
            out.skipped.push_back({ordinal, "answer is not a letter A-E"});
        } else if (text::is_blank(question)) {
            out.skipped.push_back({ordinal, "empty question"});
        } else {
            out.triplets.push_back({question, solution, *letter});
        }
        state = State::None;
        question.clear();
        solution.clear();
        answer.clear();
    };

    for (auto blk : split_blocks(markdown_body)) {
        const auto hit = detect_label(blk, rules);
        if (hit && hit->label == Label::Question) {
            finalize();
            ++ordinal;
            state = State::Question;
            append(question, hit->remainder);
        } else if (hit && hit->label == Label::Solution) {
            if (state == State::Question) {
                state = State::Solution;
                append(solution, hit->remainder);
            }
        } else if (hit && hit->label == Label::Answer) {
            if (state == State::Question) {
                // answer without a solution section
                state = State::Answer;
                append(answer, hit->remainder);
            } else if (state == State::Solution) {
                state = State::Answer;
                append(answer, hit->remainder);
            }
        } else {
            switch (state) {
                case State::Question: append(question, blk); break;
                case State::Solution: append(solution, blk); break;
                case State::Answer:
                    if (!answer_letter(answer)) append(answer, blk);
                    else finalize();
                    break;
                case State::None: break;
            }
        }
    }
    finalize();
    return out;
}

std::vector<QsaTriplet> extract_triplets(const ArticleDoc& article, const TripletRules& rules) {
    return extract_triplets_detailed(article.markdown_body, rules).triplets;
}

// --- site batches -------------------------------------------------------------

IngestReport& IngestReport::operator+=(const IngestReport& o) {
    documents += o.documents;
    markdowns += o.markdowns;
    images += o.images;
    decks += o.decks;
    pages += o.pages;
    triplets += o.triplets;
    synthetic_qa += o.synthetic_qa;
    captions += o.captions;
    slide_descriptions += o.slide_descriptions;
    failures.insert(failures.end(), o.failures.begin(), o.failures.end());
    return *this;
}

json IngestReport::to_json() const {
    json fails = json::array();
    for (const auto& f : failures) fails.push_back({{"doc_id", f.doc_id}, {"error", f.error}});
    return json{{"documents", documents},
                {"markdowns", markdowns},
                {"images", images},
                {"decks", decks},
                {"pages", pages},
                {"triplets", triplets},
                {"synthetic", {{"qa", synthetic_qa}, {"captions", captions}, {"slide_descriptions", slide_descriptions},
                               {"total", synthetic_total()}}},
                {"failures", std::move(fails)}};
}

std::vector<DocumentSource> load_site(const std::filesystem::path& dir, const SiteRules& rules) {
    if (!std::filesystem::is_directory(dir)) throw std::invalid_argument("site directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    const auto deck_root = (dir / rules.deck_dir).lexically_normal();
    for (auto it = std::filesystem::recursive_directory_iterator(dir); it != std::filesystem::recursive_directory_iterator();
         ++it) {
        if (it->is_directory() && it->path().lexically_normal() == deck_root) {
            it.disable_recursion_pending();
            continue;
        }
        if (!it->is_regular_file()) continue;
        const auto ext = text::fold(it->path().extension().string(), {true, false});
        if (ext == ".html" || ext == ".htm" || ext == ".md") files.push_back(it->path());
    }
    std::sort(files.begin(), files.end());
    std::vector<DocumentSource> out;
    for (const auto& f : files) {
        DocumentSource d;
        d.rel_path = std::filesystem::relative(f, dir);
        auto id = d.rel_path;
        id.replace_extension();
        d.doc_id = text::replace_all(id.generic_string(), "/", "-");
        d.content = read_file(f);
        d.markdown = text::fold(f.extension().string(), {true, false}) == ".md";
        out.push_back(std::move(d));
    }
    return out;
}

IngestOutput ingest_site(const std::vector<DocumentSource>& manifest, const SiteRules& rules,
                         const std::filesystem::path& site_root, std::size_t parallelism) {
    std::vector<std::optional<ArticleDoc>> docs(manifest.size());
    std::vector<std::string> errors(manifest.size());
    parallel_for(manifest.size(), parallelism, [&](std::size_t i) {
        try {
            docs[i] = extract_article(manifest[i], rules, site_root);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    IngestOutput out;
    auto& r = out.report;
    r.documents = manifest.size();
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        if (!docs[i]) {
            r.failures.push_back({manifest[i].doc_id, errors[i]});
            continue;
        }
        auto& d = *docs[i];
        ++r.markdowns;
        r.images += d.images.size();
        r.decks += d.slide_refs.size();
        for (const auto& deck : d.slide_refs) r.pages += deck.page_count;
        r.triplets += d.triplets.size();
        out.articles.push_back(std::move(d));
    }
    return out;
}

std::map<std::string, std::string> render_outputs(const IngestOutput& output) {
    std::string articles, images, triplets, decks;
    for (const auto& a : output.articles) {
        json art{{"doc_id", a.doc_id}, {"title", a.title}, {"markdown_body", a.markdown_body}};
        if (a.meta) {
            art["meta"] = {{"subject", a.meta->subject}, {"unit", a.meta->unit}, {"objective", a.meta->objective},
                           {"topic_id", a.meta->topic_id}};
        }
        if (!a.warnings.empty()) art["warnings"] = a.warnings;
        articles += art.dump() + "\n";
        for (const auto& img : a.images) {
            json j{{"doc_id", a.doc_id},
                   {"image_ref", img.image_ref},
                   {"before_paragraph", img.before_paragraph},
                   {"after_paragraph", img.after_paragraph}};
            if (img.caption) j["caption"] = *img.caption;
            images += j.dump() + "\n";
        }
        for (std::size_t k = 0; k < a.triplets.size(); ++k) {
            const auto& t = a.triplets[k];
            triplets += json{{"doc_id", a.doc_id},
                             {"index", k},
                             {"question", t.question},
                             {"solution", t.solution},
                             {"answer", std::string(1, t.answer)}}
                            .dump() +
                        "\n";
        }
        for (const auto& d : a.slide_refs) {
            decks += json{{"doc_id", a.doc_id},
                          {"deck_id", d.deck_id},
                          {"page_count", d.page_count},
                          {"page_image_refs", d.page_image_refs}}
                         .dump() +
                     "\n";
        }
    }
    return {{"articles.jsonl", std::move(articles)},
            {"image_contexts.jsonl", std::move(images)},
            {"triplets.jsonl", std::move(triplets)},
            {"decks.jsonl", std::move(decks)}};
}

void write_outputs(const IngestOutput& output, const std::filesystem::path& out_dir) {
    for (const auto& [name, content] : render_outputs(output)) write_file_atomic(out_dir / name, content);
}

Corpus triplets_to_samples(const std::vector<ArticleDoc>& articles) {
    Corpus out;
    const std::string open = "[[image:";
    for (const auto& a : articles) {
        for (std::size_t k = 0; k < a.triplets.size(); ++k) {
            const auto& t = a.triplets[k];
            Sample s;
            s.id = a.doc_id + "-t" + std::to_string(k + 1);
            s.question_text = t.question;
            for (auto pos = t.question.find(open); pos != std::string::npos; pos = t.question.find(open, pos + 1)) {
                const auto end = t.question.find("]]", pos);
                if (end == std::string::npos) break;
                s.image_refs.push_back(t.question.substr(pos + open.size(), end - pos - open.size()));
            }
            s.solution = t.solution;
            s.gold_answer = std::string(1, t.answer);
            s.meta = a.meta;
            s.source_tag = SourceTag::CV;
            s.provenance = json{{"ingest", {{"doc_id", a.doc_id}, {"triplet_index", k}}}};
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace edusft::ingest
