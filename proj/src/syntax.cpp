#include "edusft/syntax.hpp"

#include "edusft/text.hpp"

namespace edusft::syntax {

namespace {

constexpr std::array<std::string_view, 5> kTags = {"question", "meta", "think", "solution", "answer"};
constexpr std::string_view kLetters = "QMTSA";

std::size_t index_of(Component c) { return static_cast<std::size_t>(c); }

bool is_tag_char(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-'; }

std::string open_tag(Component c) { return "<" + std::string(tag_name(c)) + ">"; }
std::string close_tag(Component c) { return "</" + std::string(tag_name(c)) + ">"; }

}  // namespace

char letter(Component c) { return kLetters[index_of(c)]; }
std::string_view tag_name(Component c) { return kTags[index_of(c)]; }

std::optional<Component> component_from_tag(std::string_view tag) {
    for (auto c : kAllComponents) {
        if (tag_name(c) == tag) return c;
    }
    return std::nullopt;
}

SyntaxConfig SyntaxConfig::parse(std::string_view name) {
    unsigned mask = 0;
    int last = -1;
    for (char ch : name) {
        const auto pos = kLetters.find(ch);
        if (pos == std::string_view::npos) throw SyntaxError("unknown syntax component '" + std::string(1, ch) + "'");
        if (static_cast<int>(pos) <= last) {
            throw SyntaxError("syntax components must be distinct and in Q,M,T,S,A order: " + std::string(name));
        }
        last = static_cast<int>(pos);
        mask |= 1u << pos;
    }
    SyntaxConfig config(mask);
    if (!config.contains(Component::Solution) || !config.contains(Component::Answer)) {
        throw SyntaxError("syntax config must include S and A: " + std::string(name));
    }
    return config;
}

std::vector<Component> SyntaxConfig::components() const {
    std::vector<Component> out;
    for (auto c : kAllComponents) {
        if (contains(c)) out.push_back(c);
    }
    return out;
}

std::string SyntaxConfig::name() const {
    std::string out;
    for (auto c : components()) out.push_back(letter(c));
    return out;
}

std::vector<SyntaxExperiment> enumerate_experiment_configs() {
    return {
        {SyntaxConfig::parse("QMSA"), 0.5928},  {SyntaxConfig::parse("QMTSA"), 0.5707},
        {SyntaxConfig::parse("MTSA"), 0.5620},  {SyntaxConfig::parse("QSA"), 0.5577},
        {SyntaxConfig::parse("QTSA"), 0.5512},  {SyntaxConfig::parse("TSA"), 0.5399},
        {SyntaxConfig::parse("SA"), 0.5367},
    };
}

std::string serialize_meta(const Metadata& meta) {
    return "subject: " + meta.subject + "\nunit: " + meta.unit + "\nobjective: " + meta.objective;
}

ComposeError::ComposeError(std::string sample_id, std::optional<Component> component, const std::string& message)
    : std::runtime_error("sample '" + sample_id + "'" +
                         (component ? " component " + std::string(1, letter(*component)) : std::string()) + ": " +
                         message),
      sample_id_(std::move(sample_id)),
      component_(component) {}

ComponentMap project(const Sample& sample, const SyntaxConfig& config) {
    ComponentMap out;
    for (auto c : config.components()) {
        std::string body;
        switch (c) {
            case Component::Question:
                if (text::is_blank(sample.question_text)) throw ComposeError(sample.id, c, "question_text is empty");
                body = sample.question_text;
                break;
            case Component::Meta:
                if (!sample.meta) throw ComposeError(sample.id, c, "meta is missing");
                if (sample.meta->subject.empty() || sample.meta->unit.empty() || sample.meta->objective.empty()) {
                    throw ComposeError(sample.id, c, "meta is incomplete");
                }
                body = serialize_meta(*sample.meta);
                break;
            case Component::Think:
                if (!sample.think || text::is_blank(*sample.think)) throw ComposeError(sample.id, c, "think is missing");
                body = *sample.think;
                break;
            case Component::Solution:
                if (!sample.solution || text::is_blank(*sample.solution)) {
                    throw ComposeError(sample.id, c, "solution is missing");
                }
                body = *sample.solution;
                break;
            case Component::Answer:
                if (!sample.gold_answer) throw ComposeError(sample.id, c, "gold_answer is missing");
                if (!is_option_letter(*sample.gold_answer)) {
                    throw ComposeError(sample.id, c, "gold_answer '" + *sample.gold_answer + "' is not a letter A-E");
                }
                body = *sample.gold_answer;
                break;
        }
        for (auto t : kAllComponents) {
            if (body.find(open_tag(t)) != std::string::npos || body.find(close_tag(t)) != std::string::npos) {
                throw ComposeError(sample.id, c, "body contains reserved tag <" + std::string(tag_name(t)) + ">");
            }
        }
        out.emplace(c, std::move(body));
    }
    return out;
}

RenderedText compose(const Sample& sample, const SyntaxConfig& config) {
    const auto parts = project(sample, config);
    std::string text;
    for (const auto& [c, body] : parts) {
        if (!text.empty()) text.push_back('\n');
        text += open_tag(c);
        text += body;
        text += close_tag(c);
    }
    return {std::move(text), config, sample.id};
}

std::string_view to_string(ParseErrorKind kind) {
    switch (kind) {
        case ParseErrorKind::DuplicateTag: return "duplicate_tag";
        case ParseErrorKind::UnknownTag: return "unknown_tag";
        case ParseErrorKind::OutOfOrder: return "out_of_order";
        case ParseErrorKind::Unclosed: return "unclosed_tag";
        case ParseErrorKind::StrayText: return "stray_text";
    }
    return "unknown";
}

ParseError::ParseError(ParseErrorKind kind, std::size_t offset, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " at byte " + std::to_string(offset) + ": " + message),
      kind_(kind),
      offset_(offset) {}

namespace {

struct TagToken {
    std::string name;
    bool closing = false;
    std::size_t end = 0;  // one past '>'
};

// Reads "<name>" or "</name>" at pos.
std::optional<TagToken> read_tag(std::string_view s, std::size_t pos) {
    if (pos >= s.size() || s[pos] != '<') return std::nullopt;
    TagToken tok;
    std::size_t i = pos + 1;
    if (i < s.size() && s[i] == '/') {
        tok.closing = true;
        ++i;
    }
    const std::size_t name_start = i;
    while (i < s.size() && is_tag_char(s[i])) ++i;
    if (i == name_start || i >= s.size() || s[i] != '>') return std::nullopt;
    tok.name = std::string(s.substr(name_start, i - name_start));
    tok.end = i + 1;
    return tok;
}

std::size_t skip_ws(std::string_view s, std::size_t pos) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\n' || s[pos] == '\r')) ++pos;
    return pos;
}

void check_sequence(const ComponentMap& seen, Component c, std::size_t offset) {
    if (seen.contains(c)) throw ParseError(ParseErrorKind::DuplicateTag, offset, "repeated <" + std::string(tag_name(c)) + ">");
    if (!seen.empty() && index_of(seen.rbegin()->first) > index_of(c)) {
        throw ParseError(ParseErrorKind::OutOfOrder, offset,
                         "<" + std::string(tag_name(c)) + "> after <" + std::string(tag_name(seen.rbegin()->first)) + ">");
    }
}

// Earliest opening tag of any component at or after pos.
std::size_t next_open_tag(std::string_view s, std::size_t pos) {
    std::size_t best = std::string_view::npos;
    for (auto c : kAllComponents) {
        const auto p = s.find(open_tag(c), pos);
        if (p < best) best = p;
    }
    return best;
}

}  // namespace

ComponentMap parse(std::string_view s) {
    ComponentMap out;
    std::size_t pos = skip_ws(s, 0);
    while (pos < s.size()) {
        auto tok = read_tag(s, pos);
        if (!tok) throw ParseError(ParseErrorKind::StrayText, pos, "expected an opening tag");
        if (tok->closing) throw ParseError(ParseErrorKind::StrayText, pos, "unexpected closing tag </" + tok->name + ">");
        auto c = component_from_tag(tok->name);
        if (!c) throw ParseError(ParseErrorKind::UnknownTag, pos, "unknown tag <" + tok->name + ">");
        check_sequence(out, *c, pos);
        const auto close = s.find(close_tag(*c), tok->end);
        if (close == std::string_view::npos) {
            throw ParseError(ParseErrorKind::Unclosed, pos, "<" + tok->name + "> is never closed");
        }
        out.emplace(*c, std::string(s.substr(tok->end, close - tok->end)));
        pos = skip_ws(s, close + close_tag(*c).size());
    }
    return out;
}

ComponentMap parse_lenient(std::string_view s) {
    ComponentMap out;
    std::size_t pos = skip_ws(s, 0);
    while (pos < s.size()) {
        auto tok = read_tag(s, pos);
        if (!tok) throw ParseError(ParseErrorKind::StrayText, pos, "expected an opening tag");
        if (tok->closing) throw ParseError(ParseErrorKind::StrayText, pos, "unexpected closing tag </" + tok->name + ">");
        auto c = component_from_tag(tok->name);
        if (!c) throw ParseError(ParseErrorKind::UnknownTag, pos, "unknown tag <" + tok->name + ">");
        check_sequence(out, *c, pos);
        const auto close = s.find(close_tag(*c), tok->end);
        const auto next_open = next_open_tag(s, tok->end);
        if (close != std::string_view::npos && close < next_open) {
            out.emplace(*c, std::string(s.substr(tok->end, close - tok->end)));
            pos = skip_ws(s, close + close_tag(*c).size());
        } else {
            const auto end = next_open == std::string_view::npos ? s.size() : next_open;
            out.emplace(*c, std::string(text::trim(s.substr(tok->end, end - tok->end))));
            pos = end;
        }
    }
    return out;
}

json record_to_json(const RenderedRecord& r) {
    json j;
    j["sample_id"] = r.sample_id;
    j["text"] = r.text;
    j["prompt_end_offset"] = r.prompt_end_offset;
    j["config"] = r.config;
    if (!r.image_refs.empty()) j["image_refs"] = r.image_refs;
    return j;
}

RenderedRecord record_from_json(const json& j) {
    auto need = [&](const char* key) -> const json& {
        if (!j.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
        return j.at(key);
    };
    RenderedRecord r;
    const auto& id = need("sample_id");
    const auto& text = need("text");
    const auto& offset = need("prompt_end_offset");
    if (!id.is_string() || !text.is_string()) throw std::invalid_argument("sample_id and text must be strings");
    if (!offset.is_number_unsigned()) throw std::invalid_argument("prompt_end_offset must be a non-negative integer");
    r.sample_id = id.get<std::string>();
    r.text = text.get<std::string>();
    r.prompt_end_offset = offset.get<std::size_t>();
    if (r.prompt_end_offset > r.text.size()) throw std::invalid_argument("prompt_end_offset beyond end of text");
    if (j.contains("config")) r.config = j.at("config").get<std::string>();
    if (j.contains("image_refs")) r.image_refs = j.at("image_refs").get<std::vector<std::string>>();
    return r;
}

RenderResult render_dataset(const Corpus& corpus, const SyntaxConfig& config) {
    RenderResult result;
    const bool has_question = config.contains(Component::Question);
    for (const auto& sample : corpus) {
        try {
            auto rendered = compose(sample, config);
            RenderedRecord rec;
            rec.sample_id = sample.id;
            rec.config = config.name();
            rec.image_refs = sample.image_refs;
            if (has_question) {
                const auto close = close_tag(Component::Question);
                const auto end = rendered.text.find(close) + close.size();
                rec.prompt_end_offset = end < rendered.text.size() ? end + 1 : end;  // skip the block separator
            }
            rec.text = std::move(rendered.text);
            result.records.push_back(std::move(rec));
        } catch (const ComposeError& e) {
            result.skips.push_back({sample.id, e.what()});
        }
    }
    return result;
}

}  // namespace edusft::syntax
