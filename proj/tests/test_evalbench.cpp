#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "edusft/evalbench.hpp"
#include "edusft/format.hpp"
#include "planted.hpp"
#include "support.hpp"

using namespace edusft;
using namespace edusft::eval;

namespace {

Sample item(const std::string& id, char gold, const std::string& topic) {
    Sample s;
    s.id = id;
    s.source_tag = SourceTag::CR;
    s.question_text = "soru " + id;
    s.gold_answer = std::string(1, gold);
    s.meta = Metadata{"Matematik", "u", "o", std::nullopt, topic};
    return s;
}

Corpus keyed_fixture() {
    const std::string keys = "AABCDEBCDE";
    Corpus c;
    for (std::size_t i = 0; i < keys.size(); ++i) c.push_back(item("q" + std::to_string(i), keys[i], "t" + std::to_string(i % 3)));
    return c;
}

json constant_script(const Corpus& c, const std::string& text) {
    json responses = json::object();
    for (const auto& s : c) responses[s.id] = text;
    return json{{"responses", responses}};
}

EvalReport report_from_tallies(const std::map<std::string, TopicTally>& tallies) {
    EvalReport r;
    r.per_topic = tallies;
    for (const auto& [t, tally] : tallies) {
        r.total += tally.total;
        r.correct += tally.correct;
    }
    return r;
}

}  // namespace

TEST_CASE("echo gold scores one") {
    const auto bench = keyed_fixture();
    auto model = ScriptedModel::echo_gold(bench);
    const auto run = evaluate(bench, model);
    CHECK(run.report.accuracy() == 1.0);
    CHECK(run.report.correct == 10);
    CHECK(run.report.unanswered == 0);
}

TEST_CASE("always A on the keyed fixture scores two in ten") {
    const auto bench = keyed_fixture();
    ScriptedModel model(constant_script(bench, "Cevap: A"));
    const auto run = evaluate(bench, model);
    CHECK(run.report.correct == 2);
    CHECK(run.report.total == 10);
    CHECK(run.report.accuracy() == doctest::Approx(0.2).epsilon(1e-12));
    std::size_t topic_total = 0;
    for (const auto& [t, tally] : run.report.per_topic) topic_total += tally.total;
    CHECK(topic_total == run.report.total);
    for (const auto& v : run.report.verdicts) {
        CHECK(v.correct == (v.extracted && *v.extracted == v.gold));
    }
}

TEST_CASE("verdicts are ordered by id and responses line up") {
    auto bench = keyed_fixture();
    std::reverse(bench.begin(), bench.end());
    auto model = ScriptedModel::echo_gold(bench);
    const auto run = evaluate(bench, model, EvalOptions{2, 4, std::nullopt});
    for (std::size_t i = 1; i < run.report.verdicts.size(); ++i) {
        CHECK(run.report.verdicts[i - 1].item_id < run.report.verdicts[i].item_id);
    }
    for (const auto& v : run.report.verdicts) {
        CHECK(run.responses[v.response_ref] == "<answer>" + std::string(1, v.gold) + "</answer>");
    }
}

TEST_CASE("unanswered and adapter failures count as wrong") {
    const auto bench = keyed_fixture();
    auto script = constant_script(bench, "<answer>A</answer>");
    script["responses"]["q0"] = "bilmiyorum";
    script["responses"]["q1"] = json{{"error", "boom"}};
    ScriptedModel model(script);
    const auto run = evaluate(bench, model, EvalOptions{1, 1, std::nullopt});
    CHECK(run.report.unanswered == 2);
    CHECK(run.report.correct == 0);
    const auto& v1 = run.report.verdicts[1];
    CHECK(v1.item_id == "q1");
    CHECK_FALSE(v1.extracted);
    CHECK(v1.error.find("boom") != std::string::npos);
}

namespace {
class FlakyModel final : public ModelAdapter {
public:
    int failures_left;
    explicit FlakyModel(int failures) : failures_left(failures) {}
    std::string answer(const EvalQuery&) override {
        if (failures_left-- > 0) throw AdapterError("transient");
        return "<answer>A</answer>";
    }
    json describe() const override { return json{{"kind", "flaky"}}; }
};
}  // namespace

TEST_CASE("retries are bounded") {
    Corpus bench{item("x", 'A', "t")};
    FlakyModel ok(2);
    CHECK(evaluate(bench, ok, EvalOptions{2, 1, std::nullopt}).report.correct == 1);
    FlakyModel bad(3);
    const auto run = evaluate(bench, bad, EvalOptions{2, 1, std::nullopt});
    CHECK(run.report.correct == 0);
    CHECK(run.report.unanswered == 1);
}

TEST_CASE("benchmark preconditions") {
    auto bench = keyed_fixture();
    bench[3].gold_answer.reset();
    ScriptedModel model(constant_script(bench, "A"));
    CHECK_THROWS_AS(evaluate(bench, model), EvalError);
    bench = keyed_fixture();
    bench[4].meta.reset();
    CHECK_THROWS_AS(evaluate(bench, model), EvalError);
}

TEST_CASE("planted responses through evaluate") {
    const auto cases = planted::make_cases(500, 77);
    Corpus bench;
    json responses = json::object();
    std::size_t expected_correct = 0, expected_unanswered = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto id = "p" + std::to_string(1000 + i);
        const char gold = "ABCDE"[i % 5];
        bench.push_back(item(id, gold, "t" + std::to_string(i % 7)));
        responses[id] = cases[i].response;
        if (!cases[i].expected) ++expected_unanswered;
        else if (*cases[i].expected == gold) ++expected_correct;
    }
    ScriptedModel model(json{{"responses", responses}});
    const auto report = evaluate(bench, model).report;
    CHECK(report.correct == expected_correct);
    CHECK(report.unanswered == expected_unanswered);
}

TEST_CASE("report serialization is stable") {
    const auto bench = keyed_fixture();
    ScriptedModel model(constant_script(bench, "Cevap: B"));
    EvalOptions opts;
    opts.row_label = LeaderboardRow{"Lab", "M", "Open weights", 0};
    const auto a = report_to_json(evaluate(bench, model, opts).report);
    const auto b = report_to_json(evaluate(bench, model, opts).report);
    CHECK(a.dump() == b.dump());
    CHECK(report_to_json(report_from_json(a)).dump() == a.dump());
    CHECK(a["leaderboard_rows"][0]["accuracy"].get<double>() == doctest::Approx(0.2));
}

TEST_CASE("rank topics simple cases") {
    const auto r = report_from_tallies({{"hi", {10, 9}}, {"lo", {10, 2}}, {"mid", {10, 5}}});
    const auto one = rank_topics(r, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].topic_id == "lo");
    const auto tie = rank_topics(report_from_tallies({{"b", {2, 1}}, {"a", {4, 2}}}), 2);
    CHECK(tie[0].topic_id == "a");
    CHECK(tie[1].topic_id == "b");
    CHECK_THROWS_AS(rank_topics(r, 4), EvalError);
    CHECK(rank_topics(r, 0).empty());
}

TEST_CASE("rank topics against a full-sort oracle") {
    Rng rng(2024);
    for (int round = 0; round < 300; ++round) {
        std::map<std::string, TopicTally> tallies;
        for (int t = 0; t < 20; ++t) {
            const auto total = 1 + rng.below(6);
            tallies["topic-" + std::to_string(rng.below(1000))] = {total, rng.below(total + 1)};
        }
        if (tallies.size() < 10) continue;
        std::vector<std::tuple<long double, std::string>> oracle;
        for (const auto& [t, tally] : tallies) {
            oracle.emplace_back(static_cast<long double>(tally.correct) / tally.total, t);
        }
        std::sort(oracle.begin(), oracle.end());
        const auto got = rank_topics(report_from_tallies(tallies));
        REQUIRE(got.size() == 10);
        for (std::size_t i = 0; i < 10; ++i) REQUIRE(got[i].topic_id == std::get<1>(oracle[i]));
    }
}

TEST_CASE("reference leaderboard") {
    const auto rows = reference_leaderboard();
    CHECK(rows.size() == 13);
    const auto board = render_leaderboard(rows);
    CHECK(board.rows.front().model == "Gemini 2.5 Flash");
    CHECK(format_percent(board.rows.front().accuracy) == "84.68%");
    for (std::size_t i = 1; i < board.rows.size(); ++i) CHECK(board.rows[i - 1].accuracy >= board.rows[i].accuracy);
    CHECK(board.markdown.find("| METU | EduMix-QMSA | Open weights | 78.59% |") != std::string::npos);
    CHECK(board.markdown.find("Gemini 2.0 Flash | Proprietary | 79.18%") != std::string::npos);
    CHECK(board.markdown.find("Qwen-2.5-VL-32B | Open weights | 62.46%") != std::string::npos);
    const auto j = board.to_json();
    CHECK(j.size() == 13);
    CHECK(j[0]["accuracy_text"] == "84.68%");
    CHECK(j[12]["model"] == "Grok 2 Vision (1212)");
}

TEST_CASE("leaderboard ordering is a stable permutation") {
    const auto single = render_leaderboard({{"D", "M", "T", 0.5}});
    CHECK(single.rows.size() == 1);
    const auto tied = render_leaderboard({{"a", "first", "T", 0.5}, {"b", "top", "T", 0.9}, {"c", "second", "T", 0.5}});
    CHECK(tied.rows[0].model == "top");
    CHECK(tied.rows[1].model == "first");
    CHECK(tied.rows[2].model == "second");

    Rng rng(3);
    for (int round = 0; round < 100; ++round) {
        std::vector<LeaderboardRow> rows;
        for (std::size_t i = 0, n = rng.below(15); i < n; ++i) {
            rows.push_back({"d", "m" + std::to_string(i), "t", static_cast<double>(rng.below(5)) / 4});
        }
        const auto board = render_leaderboard(rows);
        REQUIRE(board.rows.size() == rows.size());
        std::multiset<std::string> before, after;
        for (const auto& r : rows) before.insert(r.model);
        for (const auto& r : board.rows) after.insert(r.model);
        REQUIRE(before == after);
    }
}

TEST_CASE("integrity checks") {
    const auto ref = reference_expectations();
    CHECK(*ref.item_count == 1854);
    CHECK(*ref.topic_count == 309);

    testing::TempDir dir;
    std::filesystem::create_directories(dir.path() / "img");
    Corpus bench;
    for (int i = 0; i < 12; ++i) {
        auto s = item("b" + std::to_string(i), 'C', "topic-" + std::to_string(i % 4));
        if (i == 5) {
            s.image_refs = {"img/ok.png"};
            std::ofstream(dir.path() / "img/ok.png") << "png";
        }
        bench.push_back(s);
    }
    IntegrityExpectations expect{12, 4, dir.path()};
    CHECK(benchmark_integrity_check(bench, expect).passed());

    bench[7].image_refs = {"img/missing.png"};
    const auto report = benchmark_integrity_check(bench, expect);
    CHECK_FALSE(report.passed());
    for (const auto& c : report.checks) {
        if (c.name == "image_refs") {
            CHECK_FALSE(c.passed);
            CHECK(c.failing_items == std::vector<std::string>{"b7"});
        } else {
            CHECK(c.passed);
        }
    }
    CHECK_FALSE(benchmark_integrity_check(bench, IntegrityExpectations{13, 4, std::nullopt}).passed());
    CHECK(benchmark_integrity_check(bench, IntegrityExpectations{12, 4, std::nullopt}).passed());
}
