#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edusft/adapters.hpp"
#include "edusft/answer.hpp"
#include "edusft/corpus.hpp"

namespace edusft::eval {

class EvalError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct EvalVerdict {
    std::string item_id;
    std::string topic_id;
    std::optional<char> extracted;
    char gold = 'A';
    bool correct = false;
    std::size_t response_ref = 0;  // index into EvalRun::responses
    std::string error;             // adapter failure after retries
};

struct TopicTally {
    std::size_t total = 0;
    std::size_t correct = 0;
    bool operator==(const TopicTally&) const = default;
};

struct LeaderboardRow {
    std::string developer;
    std::string model;
    std::string type;
    double accuracy = 0.0;  // fraction
};

struct EvalReport {
    std::size_t total = 0;
    std::size_t correct = 0;
    std::size_t unanswered = 0;
    std::map<std::string, TopicTally> per_topic;
    std::vector<EvalVerdict> verdicts;  // ordered by item id
    std::vector<LeaderboardRow> leaderboard_rows;

    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

json report_to_json(const EvalReport& report);
EvalReport report_from_json(const json& j);

struct EvalOptions {
    int max_retries = 2;
    std::size_t parallelism = 1;
    // Optional label for the leaderboard row this run produces.
    std::optional<LeaderboardRow> row_label;
};

struct EvalRun {
    EvalReport report;
    std::vector<std::string> responses;  // raw text, same order as report.verdicts
};

// Every item needs a gold answer in A-E and a meta.topic_id; EvalError
// otherwise. Unanswered items (no extractable letter, or adapter failure after
// retries) count as incorrect.
EvalRun evaluate(const Corpus& benchmark, ModelAdapter& adapter, const EvalOptions& options = {});

struct TopicAccuracy {
    std::string topic_id;
    TopicTally tally;
    double accuracy() const {
        return tally.total == 0 ? 0.0 : static_cast<double>(tally.correct) / static_cast<double>(tally.total);
    }
};

// k lowest-accuracy topics, ascending; ties by topic id. Accuracies are
// compared as exact fractions. Throws EvalError if k exceeds the topic count.
std::vector<TopicAccuracy> rank_topics(const EvalReport& report, std::size_t k = 10);

// Table 3 rows in published order.
std::vector<LeaderboardRow> reference_leaderboard();

struct Leaderboard {
    std::vector<LeaderboardRow> rows;  // descending accuracy, stable on ties
    std::string markdown;
    json to_json() const;
};

Leaderboard render_leaderboard(std::vector<LeaderboardRow> rows);

struct IntegrityCheck {
    std::string name;
    bool passed = true;
    std::string detail;
    std::vector<std::string> failing_items;
};

struct IntegrityExpectations {
    std::optional<std::size_t> item_count;
    std::optional<std::size_t> topic_count;
    std::optional<std::filesystem::path> image_root;  // resolve image_refs against this
};

// The released benchmark's shape: 1,854 items over 309 topics.
IntegrityExpectations reference_expectations();

struct IntegrityReport {
    std::vector<IntegrityCheck> checks;
    bool passed() const;
    json to_json() const;
};

IntegrityReport benchmark_integrity_check(const Corpus& benchmark, const IntegrityExpectations& expect);

}  // namespace edusft::eval
