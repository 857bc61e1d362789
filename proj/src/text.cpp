#include "edusft/text.hpp"

#include <algorithm>
#include <utility>

namespace edusft::text {

std::vector<char32_t> decode_utf8(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        int len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        if (i + len > s.size()) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
        if (!ok) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

char32_t simple_lower(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
    if (cp < 0xC0) return cp;
    if (cp <= 0xDE) return cp == 0xD7 ? cp : cp + 0x20;
    if (cp == 0x130) return U'i';
    if (cp == 0x178) return 0xFF;
    if ((cp >= 0x100 && cp <= 0x137) || (cp >= 0x14A && cp <= 0x177)) return (cp % 2 == 0) ? cp + 1 : cp;
    if ((cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E)) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    return cp;
}

namespace {

// Lowercase precomposed letter -> ASCII base.
constexpr std::pair<char32_t, char> kLowerBase[] = {
    {0xE0, 'a'}, {0xE1, 'a'}, {0xE2, 'a'}, {0xE3, 'a'}, {0xE4, 'a'}, {0xE5, 'a'},
    {0xE7, 'c'}, {0xE8, 'e'}, {0xE9, 'e'}, {0xEA, 'e'}, {0xEB, 'e'}, {0xEC, 'i'},
    {0xED, 'i'}, {0xEE, 'i'}, {0xEF, 'i'}, {0xF1, 'n'}, {0xF2, 'o'}, {0xF3, 'o'},
    {0xF4, 'o'}, {0xF5, 'o'}, {0xF6, 'o'}, {0xF8, 'o'}, {0xF9, 'u'}, {0xFA, 'u'},
    {0xFB, 'u'}, {0xFC, 'u'}, {0xFD, 'y'}, {0xFF, 'y'},
    {0x101, 'a'}, {0x103, 'a'}, {0x105, 'a'}, {0x107, 'c'}, {0x109, 'c'}, {0x10B, 'c'},
    {0x10D, 'c'}, {0x10F, 'd'}, {0x111, 'd'}, {0x113, 'e'}, {0x115, 'e'}, {0x117, 'e'},
    {0x119, 'e'}, {0x11B, 'e'}, {0x11D, 'g'}, {0x11F, 'g'}, {0x121, 'g'}, {0x123, 'g'},
    {0x125, 'h'}, {0x127, 'h'}, {0x129, 'i'}, {0x12B, 'i'}, {0x12D, 'i'}, {0x12F, 'i'},
    {0x131, 'i'}, {0x135, 'j'}, {0x137, 'k'}, {0x13A, 'l'}, {0x13C, 'l'}, {0x13E, 'l'},
    {0x140, 'l'}, {0x142, 'l'}, {0x144, 'n'}, {0x146, 'n'}, {0x148, 'n'}, {0x14D, 'o'},
    {0x14F, 'o'}, {0x151, 'o'}, {0x155, 'r'}, {0x157, 'r'}, {0x159, 'r'}, {0x15B, 's'},
    {0x15D, 's'}, {0x15F, 's'}, {0x161, 's'}, {0x163, 't'}, {0x165, 't'}, {0x167, 't'},
    {0x169, 'u'}, {0x16B, 'u'}, {0x16D, 'u'}, {0x16F, 'u'}, {0x171, 'u'}, {0x173, 'u'},
    {0x175, 'w'}, {0x177, 'y'}, {0x17A, 'z'}, {0x17C, 'z'}, {0x17E, 'z'},
};

char lookup_base(char32_t lower) {
    for (const auto& [cp, base] : kLowerBase) {
        if (cp == lower) return base;
    }
    return 0;
}

bool is_combining_mark(char32_t cp) { return cp >= 0x300 && cp <= 0x36F; }

}  // namespace

char32_t strip_diacritic(char32_t cp) {
    if (cp < 0xC0) return cp;
    if (cp == 0x130) return U'I';
    const char32_t lower = simple_lower(cp);
    const char base = lookup_base(lower);
    if (base == 0) return cp;
    if (lower != cp) return static_cast<char32_t>(base - 'a' + 'A');
    return static_cast<char32_t>(base);
}

std::string fold(std::string_view s, FoldOptions opts) {
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : decode_utf8(s)) {
        if (opts.fold_case) cp = simple_lower(cp);
        if (opts.fold_diacritics) {
            if (is_combining_mark(cp)) continue;
            cp = strip_diacritic(cp);
        }
        append_utf8(out, cp);
    }
    return out;
}

std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

std::vector<std::string_view> split_lines(std::string_view s) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < s.size()) lines.push_back(s.substr(start));
            break;
        }
        lines.push_back(s.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    if (from.empty()) return s;
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

}  // namespace edusft::text
