#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "edusft/corpus.hpp"
#include "edusft/rng.hpp"

namespace testing {

class TempDir {
public:
    explicit TempDir(const std::string& tag = "edusft") {
        std::string tmpl = (std::filesystem::temp_directory_path() / (tag + "-XXXXXX")).string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

// Runs through /bin/sh; stderr is captured via a temporary file.
inline CommandResult run_command(const std::string& cmd) {
    const auto err_path = std::filesystem::temp_directory_path() /
                          ("edusft-stderr-" + std::to_string(::getpid()) + "-" + std::to_string(std::rand()));
    CommandResult r;
    FILE* pipe = ::popen((cmd + " 2>" + shell_quote(err_path.string())).c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed");
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (FILE* f = std::fopen(err_path.c_str(), "rb")) {
        while ((n = std::fread(buf.data(), 1, buf.size(), f)) > 0) r.err.append(buf.data(), n);
        std::fclose(f);
    }
    std::filesystem::remove(err_path);
    return r;
}

// Text drawn from a pool that mixes Turkish letters, math, punctuation,
// angle brackets and stray tag-like fragments that are not reserved tags.
inline std::string random_text(edusft::Rng& rng, std::size_t min_words = 1, std::size_t max_words = 12) {
    static const char* pool[] = {"x", "Soru", "çözüm", "İstanbul", "ışık", "ĞÜŞ", "2+2=4", "a<b", "b>a", "<b>kalın</b>",
                                 "<questions>", "</ans>", "$\\frac{1}{2}$", "değer", "A)", "(B)", "meta:", "\\n", "&amp;",
                                 "ödev", "final", "<", ">", "x^2", "—", "∑", "日本", "emoji🙂", "tab\there", "line\nbreak"};
    const std::size_t count = min_words + static_cast<std::size_t>(rng.below(max_words - min_words + 1));
    std::string out;
    for (std::size_t i = 0; i < count; ++i) {
        if (i) out += rng.below(5) == 0 ? "\n" : " ";
        out += pool[rng.below(std::size(pool))];
    }
    return out;
}

// A sample that satisfies validate_sample, with every optional field present.
inline edusft::Sample random_sample(edusft::Rng& rng, const std::string& id) {
    edusft::Sample s;
    s.id = id;
    s.question_text = random_text(rng);
    const std::size_t choices = 2 + rng.below(4);
    for (std::size_t i = 0; i < choices; ++i) s.choices.push_back({std::string(1, static_cast<char>('A' + i)), random_text(rng, 1, 3)});
    s.gold_answer = std::string(1, static_cast<char>('A' + rng.below(choices)));
    s.meta = edusft::Metadata{random_text(rng, 1, 2), random_text(rng, 1, 3), random_text(rng, 1, 5), std::nullopt,
                              "topic-" + std::to_string(rng.below(7))};
    for (auto* f : {&s.meta->subject, &s.meta->unit, &s.meta->objective}) {
        for (auto& c : *f) {
            if (c == '\n') c = ' ';
        }
    }
    s.think = random_text(rng, 1, 20);
    s.solution = random_text(rng, 1, 20);
    s.source_tag = static_cast<edusft::SourceTag>(rng.below(3));
    return s;
}

}  // namespace testing
