#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "edusft/tokenizer.hpp"

namespace edusft {

using json = nlohmann::ordered_json;

enum class SourceTag { CR, MR, CV };

std::string_view to_string(SourceTag tag);
std::optional<SourceTag> parse_source_tag(std::string_view s);

struct Metadata {
    std::string subject;
    std::string unit;
    std::string objective;
    std::optional<std::string> difficulty;
    std::string topic_id;

    bool operator==(const Metadata&) const = default;
};

struct Choice {
    std::string letter;
    std::string text;

    bool operator==(const Choice&) const = default;
};

// One question item. Letters are kept as strings so out-of-range input can be
// represented and reported by validate_sample rather than rejected on load.
struct Sample {
    std::string id;
    std::string question_text;
    std::vector<std::string> image_refs;
    std::vector<Choice> choices;
    std::optional<std::string> gold_answer;
    std::optional<Metadata> meta;
    std::optional<std::string> think;
    std::optional<std::string> solution;
    SourceTag source_tag = SourceTag::CR;
    json provenance = json::object();
    // Unknown record keys, kept only in lenient mode.
    json extras = json::object();

    bool operator==(const Sample&) const = default;
};

using Corpus = std::vector<Sample>;

bool is_option_letter(std::string_view s);

struct Violation {
    std::string rule_id;
    std::string message;

    bool operator==(const Violation&) const = default;
};

struct ValidationReport {
    std::string sample_id;
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
};

// Rule ids: "id.empty", "answer.range", "answer.not-in-choices",
// "choices.count", "choices.letter", "choices.distinct", "choices.consecutive",
// "meta.subject", "meta.unit", "meta.objective".
ValidationReport validate_sample(const Sample& sample);

// --- line-delimited records ------------------------------------------------

class CorpusError : public std::runtime_error {
public:
    CorpusError(std::size_t line, std::string field, const std::string& message);
    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }
    const std::string& detail() const { return detail_; }

private:
    std::size_t line_;
    std::string field_;
    std::string detail_;
};

enum class ReadMode { Strict, Lenient };

json sample_to_json(const Sample& sample);
// Throws CorpusError with line 0; callers attach the line number.
Sample sample_from_json(const json& record, ReadMode mode = ReadMode::Strict);
std::string serialize_sample(const Sample& sample);

Corpus parse_corpus(std::string_view content, ReadMode mode = ReadMode::Strict);
Corpus read_corpus(const std::filesystem::path& path, ReadMode mode = ReadMode::Strict);
std::string serialize_corpus(const Corpus& corpus);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

// --- statistics -------------------------------------------------------------

struct CorpusStats {
    std::size_t item_count = 0;
    std::size_t token_count = 0;
    std::map<std::string, std::size_t> per_source_counts;
    std::map<std::string, std::size_t> per_topic_counts;

    CorpusStats& operator+=(const CorpusStats& other);
    bool operator==(const CorpusStats&) const = default;
};

json stats_to_json(const CorpusStats& stats);

// Counts tokens over the text-bearing fields: question_text, choice texts,
// think and solution. Samples without a topic are tallied under "".
CorpusStats compute_stats(const Corpus& corpus, const Tokenizer& tokenizer);

}  // namespace edusft
