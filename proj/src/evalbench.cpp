#include "edusft/evalbench.hpp"

#include <algorithm>
#include <set>

#include "edusft/format.hpp"
#include "edusft/parallel.hpp"

namespace edusft::eval {

json report_to_json(const EvalReport& r) {
    json topics = json::object();
    for (const auto& [t, tally] : r.per_topic) topics[t] = {{"total", tally.total}, {"correct", tally.correct}};
    json verdicts = json::array();
    for (const auto& v : r.verdicts) {
        json e{{"item_id", v.item_id},
               {"topic_id", v.topic_id},
               {"extracted", v.extracted ? json(std::string(1, *v.extracted)) : json(nullptr)},
               {"gold", std::string(1, v.gold)},
               {"correct", v.correct},
               {"response_ref", v.response_ref}};
        if (!v.error.empty()) e["error"] = v.error;
        verdicts.push_back(std::move(e));
    }
    json rows = json::array();
    for (const auto& row : r.leaderboard_rows) {
        rows.push_back({{"developer", row.developer}, {"model", row.model}, {"type", row.type}, {"accuracy", row.accuracy}});
    }
    return json{{"accuracy", r.accuracy()},
                {"total", r.total},
                {"correct", r.correct},
                {"unanswered", r.unanswered},
                {"per_topic", std::move(topics)},
                {"leaderboard_rows", std::move(rows)},
                {"verdicts", std::move(verdicts)}};
}

EvalReport report_from_json(const json& j) {
    EvalReport r;
    r.total = j.at("total").get<std::size_t>();
    r.correct = j.at("correct").get<std::size_t>();
    r.unanswered = j.at("unanswered").get<std::size_t>();
    for (const auto& [t, v] : j.at("per_topic").items()) {
        r.per_topic[t] = {v.at("total").get<std::size_t>(), v.at("correct").get<std::size_t>()};
    }
    if (j.contains("verdicts")) {
        for (const auto& v : j.at("verdicts")) {
            EvalVerdict e;
            e.item_id = v.at("item_id").get<std::string>();
            e.topic_id = v.value("topic_id", "");
            if (!v.at("extracted").is_null()) e.extracted = v.at("extracted").get<std::string>().at(0);
            e.gold = v.at("gold").get<std::string>().at(0);
            e.correct = v.at("correct").get<bool>();
            e.response_ref = v.value("response_ref", std::size_t{0});
            e.error = v.value("error", "");
            r.verdicts.push_back(std::move(e));
        }
    }
    if (j.contains("leaderboard_rows")) {
        for (const auto& row : j.at("leaderboard_rows")) {
            r.leaderboard_rows.push_back({row.at("developer").get<std::string>(), row.at("model").get<std::string>(),
                                          row.at("type").get<std::string>(), row.at("accuracy").get<double>()});
        }
    }
    return r;
}

EvalRun evaluate(const Corpus& benchmark, ModelAdapter& adapter, const EvalOptions& options) {
    std::vector<std::size_t> order(benchmark.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& s = benchmark[i];
        if (!s.gold_answer || !is_option_letter(*s.gold_answer)) {
            throw EvalError("benchmark item '" + s.id + "' lacks a gold answer in A-E");
        }
        if (!s.meta || s.meta->topic_id.empty()) throw EvalError("benchmark item '" + s.id + "' lacks meta.topic_id");
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return benchmark[a].id < benchmark[b].id; });

    EvalRun run;
    run.report.verdicts.resize(benchmark.size());
    run.responses.resize(benchmark.size());
    parallel_for(order.size(), options.parallelism, [&](std::size_t pos) {
        const auto& s = benchmark[order[pos]];
        auto& v = run.report.verdicts[pos];
        v.item_id = s.id;
        v.topic_id = s.meta->topic_id;
        v.gold = (*s.gold_answer)[0];
        v.response_ref = pos;
        const EvalQuery query{s.id, s.question_text, s.image_refs, s.choices};
        for (int call = 0; call <= options.max_retries; ++call) {
            try {
                run.responses[pos] = adapter.answer(query);
                v.error.clear();
                v.extracted = extract_answer(run.responses[pos]);
                break;
            } catch (const AdapterError& e) {
                v.error = e.what();
            }
        }
        v.correct = v.extracted && *v.extracted == v.gold;
    });

    auto& r = run.report;
    r.total = benchmark.size();
    for (const auto& v : r.verdicts) {
        auto& tally = r.per_topic[v.topic_id];
        ++tally.total;
        if (v.correct) {
            ++r.correct;
            ++tally.correct;
        }
        if (!v.extracted) ++r.unanswered;
    }
    if (options.row_label) {
        auto row = *options.row_label;
        row.accuracy = r.accuracy();
        r.leaderboard_rows.push_back(std::move(row));
    }
    return run;
}

std::vector<TopicAccuracy> rank_topics(const EvalReport& report, std::size_t k) {
    if (k > report.per_topic.size()) {
        throw EvalError("k = " + std::to_string(k) + " exceeds the number of topics (" +
                        std::to_string(report.per_topic.size()) + ")");
    }
    std::vector<TopicAccuracy> topics;
    for (const auto& [id, tally] : report.per_topic) topics.push_back({id, tally});
    std::sort(topics.begin(), topics.end(), [](const TopicAccuracy& a, const TopicAccuracy& b) {
        // a.correct/a.total < b.correct/b.total, cross-multiplied
        const auto lhs = static_cast<unsigned __int128>(a.tally.correct) * b.tally.total;
        const auto rhs = static_cast<unsigned __int128>(b.tally.correct) * a.tally.total;
        if (lhs != rhs) return lhs < rhs;
        return a.topic_id < b.topic_id;
    });
    topics.resize(k);
    return topics;
}

std::vector<LeaderboardRow> reference_leaderboard() {
    return {
        {"Google", "Gemini 2.5 Flash", "Proprietary", 0.8468},
        {"Google", "Gemini 2.0 Flash", "Proprietary", 0.7918},
        {"METU", "EduMix-QMSA", "Open weights", 0.7859},
        {"OpenAI", "o3", "Proprietary", 0.7448},
        {"OpenAI", "GPT-5", "Proprietary", 0.7319},
        {"Google", "Gemini 2.0 Flash - Preview", "Proprietary", 0.7119},
        {"OpenAI", "o1", "Proprietary", 0.6877},
        {"Google", "Gemini 1.5 Flash", "Proprietary", 0.6715},
        {"Alibaba", "Qwen-2.5-VL-32B", "Open weights", 0.6246},
        {"OpenAI", "GPT-4.1", "Proprietary", 0.5744},
        {"Alibaba", "Qwen-2-VL-72B", "Open weights", 0.4741},
        {"Anthropic", "Claude 3.5 Sonnet", "Proprietary", 0.4708},
        {"xAI", "Grok 2 Vision (1212)", "Proprietary", 0.3694},
    };
}

json Leaderboard::to_json() const {
    json out = json::array();
    std::size_t rank = 0;
    for (const auto& r : rows) {
        out.push_back({{"rank", ++rank},
                       {"developer", r.developer},
                       {"model", r.model},
                       {"type", r.type},
                       {"accuracy", r.accuracy},
                       {"accuracy_text", format_percent(r.accuracy)}});
    }
    return out;
}

Leaderboard render_leaderboard(std::vector<LeaderboardRow> rows) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const LeaderboardRow& a, const LeaderboardRow& b) { return a.accuracy > b.accuracy; });
    Leaderboard board;
    board.markdown = "| Developer | Model | Type | Accuracy |\n|---|---|---|---:|\n";
    for (const auto& r : rows) {
        board.markdown += "| " + r.developer + " | " + r.model + " | " + r.type + " | " + format_percent(r.accuracy) + " |\n";
    }
    board.rows = std::move(rows);
    return board;
}

IntegrityExpectations reference_expectations() { return {1854, 309, std::nullopt}; }

bool IntegrityReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const IntegrityCheck& c) { return c.passed; });
}

json IntegrityReport::to_json() const {
    json out = json::array();
    for (const auto& c : checks) {
        out.push_back({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}, {"failing_items", c.failing_items}});
    }
    return json{{"passed", passed()}, {"checks", std::move(out)}};
}

IntegrityReport benchmark_integrity_check(const Corpus& benchmark, const IntegrityExpectations& expect) {
    IntegrityReport report;
    if (expect.item_count) {
        IntegrityCheck c{"item_count", benchmark.size() == *expect.item_count,
                         "expected " + std::to_string(*expect.item_count) + ", found " + std::to_string(benchmark.size()),
                         {}};
        report.checks.push_back(std::move(c));
    }

    std::set<std::string> topics;
    IntegrityCheck topic_check{"topic_ids", true, "", {}};
    for (const auto& s : benchmark) {
        if (s.meta && !s.meta->topic_id.empty()) topics.insert(s.meta->topic_id);
        else topic_check.failing_items.push_back(s.id);
    }
    topic_check.passed = topic_check.failing_items.empty();
    topic_check.detail = std::to_string(topic_check.failing_items.size()) + " items without topic_id";
    report.checks.push_back(std::move(topic_check));

    if (expect.topic_count) {
        report.checks.push_back({"topic_count", topics.size() == *expect.topic_count,
                                 "expected " + std::to_string(*expect.topic_count) + ", found " +
                                     std::to_string(topics.size()),
                                 {}});
    }

    IntegrityCheck ids{"unique_ids", true, "", {}};
    std::set<std::string> seen;
    for (const auto& s : benchmark) {
        if (!seen.insert(s.id).second) ids.failing_items.push_back(s.id);
    }
    ids.passed = ids.failing_items.empty();
    ids.detail = std::to_string(ids.failing_items.size()) + " duplicate ids";
    report.checks.push_back(std::move(ids));

    IntegrityCheck answers{"answer_letters", true, "", {}};
    for (const auto& s : benchmark) {
        if (!s.gold_answer || !is_option_letter(*s.gold_answer)) answers.failing_items.push_back(s.id);
    }
    answers.passed = answers.failing_items.empty();
    answers.detail = std::to_string(answers.failing_items.size()) + " items without a gold answer in A-E";
    report.checks.push_back(std::move(answers));

    if (expect.image_root) {
        IntegrityCheck images{"image_refs", true, "", {}};
        std::size_t dangling = 0;
        for (const auto& s : benchmark) {
            bool bad = false;
            for (const auto& ref : s.image_refs) {
                if (!std::filesystem::is_regular_file(*expect.image_root / ref)) {
                    ++dangling;
                    bad = true;
                }
            }
            if (bad) images.failing_items.push_back(s.id);
        }
        images.passed = images.failing_items.empty();
        images.detail = std::to_string(dangling) + " unresolvable image refs";
        report.checks.push_back(std::move(images));
    }
    return report;
}

}  // namespace edusft::eval
