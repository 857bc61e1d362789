#include "edusft/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "edusft/digest.hpp"

namespace edusft {

std::string_view to_string(SourceTag tag) {
    switch (tag) {
        case SourceTag::CR: return "CR";
        case SourceTag::MR: return "MR";
        case SourceTag::CV: return "CV";
    }
    return "CR";
}

std::optional<SourceTag> parse_source_tag(std::string_view s) {
    if (s == "CR") return SourceTag::CR;
    if (s == "MR") return SourceTag::MR;
    if (s == "CV") return SourceTag::CV;
    return std::nullopt;
}

bool is_option_letter(std::string_view s) { return s.size() == 1 && s[0] >= 'A' && s[0] <= 'E'; }

ValidationReport validate_sample(const Sample& sample) {
    ValidationReport report{sample.id, {}};
    auto add = [&](std::string rule, std::string message) {
        report.violations.push_back({std::move(rule), std::move(message)});
    };

    if (sample.id.empty()) add("id.empty", "sample id is empty");

    bool answer_in_range = false;
    if (sample.gold_answer) {
        answer_in_range = is_option_letter(*sample.gold_answer);
        if (!answer_in_range) add("answer.range", "gold answer '" + *sample.gold_answer + "' is outside A-E");
    }

    if (!sample.choices.empty()) {
        const auto n = sample.choices.size();
        if (n < 2 || n > 5) add("choices.count", "expected 2 to 5 choices, got " + std::to_string(n));

        std::set<std::string> distinct;
        bool letters_ok = true;
        bool duplicate = false;
        for (const auto& c : sample.choices) {
            if (!is_option_letter(c.letter)) {
                letters_ok = false;
                add("choices.letter", "choice letter '" + c.letter + "' is outside A-E");
            }
            if (!distinct.insert(c.letter).second) duplicate = true;
        }
        if (duplicate) add("choices.distinct", "choice letters repeat");
        if (letters_ok) {
            char expected = 'A';
            for (const auto& letter : distinct) {  // std::set iterates in sorted order
                if (letter[0] != expected) {
                    add("choices.consecutive", "choice letters must run consecutively from A");
                    break;
                }
                ++expected;
            }
        }
        if (answer_in_range && !distinct.contains(*sample.gold_answer)) {
            add("answer.not-in-choices", "gold answer '" + *sample.gold_answer + "' is not among the choices");
        }
    }

    if (sample.meta) {
        if (sample.meta->subject.empty()) add("meta.subject", "meta.subject is empty");
        if (sample.meta->unit.empty()) add("meta.unit", "meta.unit is empty");
        if (sample.meta->objective.empty()) add("meta.objective", "meta.objective is empty");
    }
    return report;
}

CorpusError::CorpusError(std::size_t line, std::string field, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + (field.empty() ? "" : " field '" + field + "'") +
                                        ": " + message
                                  : (field.empty() ? "" : "field '" + field + "': ") + message),
      line_(line),
      field_(std::move(field)),
      detail_(message) {}

json sample_to_json(const Sample& s) {
    json j = json::object();
    j["id"] = s.id;
    j["source_tag"] = std::string(to_string(s.source_tag));
    j["question_text"] = s.question_text;
    if (!s.image_refs.empty()) j["image_refs"] = s.image_refs;
    if (!s.choices.empty()) {
        json choices = json::object();
        for (const auto& c : s.choices) choices[c.letter] = c.text;
        j["choices"] = std::move(choices);
    }
    if (s.gold_answer) j["gold_answer"] = *s.gold_answer;
    if (s.meta) {
        json meta = json::object();
        meta["subject"] = s.meta->subject;
        meta["unit"] = s.meta->unit;
        meta["objective"] = s.meta->objective;
        if (s.meta->difficulty) meta["difficulty"] = *s.meta->difficulty;
        meta["topic_id"] = s.meta->topic_id;
        j["meta"] = std::move(meta);
    }
    if (s.think) j["think"] = *s.think;
    if (s.solution) j["solution"] = *s.solution;
    if (!s.provenance.empty()) j["provenance"] = s.provenance;
    for (const auto& [key, value] : s.extras.items()) j[key] = value;
    return j;
}

namespace {

const std::set<std::string, std::less<>> kKnownKeys = {"id",   "source_tag", "question_text", "image_refs",
                                                       "choices", "gold_answer", "meta", "think",
                                                       "solution", "provenance"};

std::string require_string(const json& j, const std::string& field) {
    if (!j.is_string()) throw CorpusError(0, field, "expected a string");
    return j.get<std::string>();
}

Metadata meta_from_json(const json& j, ReadMode mode) {
    if (!j.is_object()) throw CorpusError(0, "meta", "expected an object");
    Metadata m;
    for (const auto& [key, value] : j.items()) {
        const std::string field = "meta." + key;
        if (key == "subject") m.subject = require_string(value, field);
        else if (key == "unit") m.unit = require_string(value, field);
        else if (key == "objective") m.objective = require_string(value, field);
        else if (key == "topic_id") m.topic_id = require_string(value, field);
        else if (key == "difficulty") m.difficulty = require_string(value, field);
        else if (mode == ReadMode::Strict) throw CorpusError(0, field, "unknown key");
    }
    return m;
}

}  // namespace

Sample sample_from_json(const json& j, ReadMode mode) {
    if (!j.is_object()) throw CorpusError(0, "", "record is not a JSON object");
    for (const char* required : {"id", "question_text", "source_tag"}) {
        if (!j.contains(required)) throw CorpusError(0, required, "missing required key");
    }
    Sample s;
    std::vector<std::string> extra_keys;
    for (const auto& [key, value] : j.items()) {
        if (key == "id") {
            s.id = require_string(value, key);
        } else if (key == "question_text") {
            s.question_text = require_string(value, key);
        } else if (key == "source_tag") {
            auto tag = parse_source_tag(require_string(value, key));
            if (!tag) throw CorpusError(0, key, "unknown source tag '" + value.get<std::string>() + "'");
            s.source_tag = *tag;
        } else if (key == "image_refs") {
            if (!value.is_array()) throw CorpusError(0, key, "expected an array");
            for (const auto& ref : value) s.image_refs.push_back(require_string(ref, key));
        } else if (key == "choices") {
            if (!value.is_object()) throw CorpusError(0, key, "expected an object");
            for (const auto& [letter, text] : value.items()) s.choices.push_back({letter, require_string(text, key)});
        } else if (key == "gold_answer") {
            s.gold_answer = require_string(value, key);
        } else if (key == "meta") {
            s.meta = meta_from_json(value, mode);
        } else if (key == "think") {
            s.think = require_string(value, key);
        } else if (key == "solution") {
            s.solution = require_string(value, key);
        } else if (key == "provenance") {
            if (!value.is_object()) throw CorpusError(0, key, "expected an object");
            s.provenance = value;
        } else if (mode == ReadMode::Strict) {
            throw CorpusError(0, key, "unknown key");
        } else {
            extra_keys.push_back(key);
        }
    }
    std::sort(extra_keys.begin(), extra_keys.end());
    for (const auto& key : extra_keys) s.extras[key] = j.at(key);
    return s;
}

std::string serialize_sample(const Sample& sample) { return sample_to_json(sample).dump(); }

Corpus parse_corpus(std::string_view content, ReadMode mode) {
    Corpus corpus;
    std::set<std::string, std::less<>> ids;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < content.size()) {
        auto nl = content.find('\n', start);
        if (nl == std::string_view::npos) nl = content.size();
        auto line = content.substr(start, nl - start);
        start = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) throw CorpusError(line_no, "", "empty record");
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw CorpusError(line_no, "", std::string("malformed JSON: ") + e.what());
        }
        try {
            corpus.push_back(sample_from_json(record, mode));
        } catch (const CorpusError& e) {
            throw CorpusError(line_no, e.field(), e.detail());
        }
        if (!ids.insert(corpus.back().id).second) {
            throw CorpusError(line_no, "id", "duplicate id '" + corpus.back().id + "'");
        }
    }
    return corpus;
}

Corpus read_corpus(const std::filesystem::path& path, ReadMode mode) {
    std::string content;
    try {
        content = read_file(path);
    } catch (const std::exception& e) {
        throw CorpusError(0, "", e.what());
    }
    return parse_corpus(content, mode);
}

std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& s : corpus) {
        out += serialize_sample(s);
        out.push_back('\n');
    }
    return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_corpus(corpus));
}

CorpusStats& CorpusStats::operator+=(const CorpusStats& other) {
    item_count += other.item_count;
    token_count += other.token_count;
    for (const auto& [k, v] : other.per_source_counts) per_source_counts[k] += v;
    for (const auto& [k, v] : other.per_topic_counts) per_topic_counts[k] += v;
    return *this;
}

json stats_to_json(const CorpusStats& stats) {
    json j;
    j["item_count"] = stats.item_count;
    j["token_count"] = stats.token_count;
    j["per_source_counts"] = json::object();
    for (const auto& [k, v] : stats.per_source_counts) j["per_source_counts"][k] = v;
    j["per_topic_counts"] = json::object();
    for (const auto& [k, v] : stats.per_topic_counts) j["per_topic_counts"][k] = v;
    return j;
}

CorpusStats compute_stats(const Corpus& corpus, const Tokenizer& tokenizer) {
    CorpusStats stats;
    for (const auto& s : corpus) {
        ++stats.item_count;
        stats.token_count += tokenizer.count(s.question_text);
        for (const auto& c : s.choices) stats.token_count += tokenizer.count(c.text);
        if (s.think) stats.token_count += tokenizer.count(*s.think);
        if (s.solution) stats.token_count += tokenizer.count(*s.solution);
        ++stats.per_source_counts[std::string(to_string(s.source_tag))];
        ++stats.per_topic_counts[s.meta ? s.meta->topic_id : std::string()];
    }
    return stats;
}

}  // namespace edusft
