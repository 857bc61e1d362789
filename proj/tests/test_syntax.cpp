#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "edusft/syntax.hpp"
#include "support.hpp"

using namespace edusft;
using namespace edusft::syntax;

TEST_CASE("experiment configs") {
    std::vector<std::string> names;
    for (const auto& e : enumerate_experiment_configs()) names.push_back(e.config.name());
    CHECK(names == std::vector<std::string>{"QMSA", "QMTSA", "MTSA", "QSA", "QTSA", "TSA", "SA"});
    CHECK(enumerate_experiment_configs().front().reference_accuracy == doctest::Approx(0.5928));
}

TEST_CASE("config names") {
    CHECK(SyntaxConfig::parse("QMTSA").components().size() == 5);
    CHECK_THROWS_AS(SyntaxConfig::parse("QS"), SyntaxError);     // no A
    CHECK_THROWS_AS(SyntaxConfig::parse("QA"), SyntaxError);     // no S
    CHECK_THROWS_AS(SyntaxConfig::parse("MQSA"), SyntaxError);   // order
    CHECK_THROWS_AS(SyntaxConfig::parse("QQSA"), SyntaxError);   // repeat
    CHECK_THROWS_AS(SyntaxConfig::parse("QXSA"), SyntaxError);   // unknown
}

TEST_CASE("compose layout") {
    Sample s;
    s.id = "x";
    s.question_text = "Soru?";
    s.meta = Metadata{"Fizik", "Kuvvet", "Hesaplar", std::nullopt, "t"};
    s.solution = "Çözüm.";
    s.gold_answer = "C";
    const auto r = compose(s, SyntaxConfig::parse("QMSA"));
    CHECK(r.text ==
          "<question>Soru?</question>\n<meta>subject: Fizik\nunit: Kuvvet\nobjective: Hesaplar</meta>\n"
          "<solution>Çözüm.</solution>\n<answer>C</answer>");
}

TEST_CASE("compose refuses incomplete or unsafe samples") {
    Rng rng(1);
    auto s = testing::random_sample(rng, "a");
    auto t = s;
    t.think.reset();
    CHECK_THROWS_AS(compose(t, SyntaxConfig::parse("QTSA")), ComposeError);
    CHECK_NOTHROW(compose(t, SyntaxConfig::parse("QSA")));
    t = s;
    t.solution = "bak </solution> burada";
    CHECK_THROWS_AS(compose(t, SyntaxConfig::parse("SA")), ComposeError);
    t = s;
    t.gold_answer = "F";
    CHECK_THROWS_AS(compose(t, SyntaxConfig::parse("SA")), ComposeError);
    t = s;
    t.meta.reset();
    CHECK_THROWS_AS(compose(t, SyntaxConfig::parse("MTSA")), ComposeError);
}

TEST_CASE("parse inverts compose on random samples") {
    Rng rng(2024);
    for (int i = 0; i < 300; ++i) {
        const auto s = testing::random_sample(rng, "r" + std::to_string(i));
        for (const auto& e : enumerate_experiment_configs()) {
            const auto text = compose(s, e.config).text;
            REQUIRE(parse(text) == project(s, e.config));
        }
    }
}

TEST_CASE("parse tolerates whitespace between blocks") {
    const auto m = parse("  <solution>a</solution>\n\n \t<answer>B</answer>\n");
    CHECK(m.at(Component::Solution) == "a");
    CHECK(m.at(Component::Answer) == "B");
}

TEST_CASE("parse error kinds") {
    auto kind = [](std::string_view text) {
        try {
            parse(text);
        } catch (const ParseError& e) {
            return std::optional(e.kind());
        }
        return std::optional<ParseErrorKind>();
    };
    CHECK(kind("<answer>A</answer><answer>B</answer>") == ParseErrorKind::DuplicateTag);
    CHECK(kind("<foo>A</foo>") == ParseErrorKind::UnknownTag);
    CHECK(kind("<answer>A</answer><solution>s</solution>") == ParseErrorKind::OutOfOrder);
    CHECK(kind("<solution>s") == ParseErrorKind::Unclosed);
    CHECK(kind("hello <answer>A</answer>") == ParseErrorKind::StrayText);
    CHECK(kind("<solution>x</solution>\n<answer>A</answer>") == std::nullopt);
}

TEST_CASE("duplicate beats order when both apply") {
    try {
        parse("<solution>a</solution><answer>A</answer><solution>b</solution>");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseErrorKind::DuplicateTag);
    }
}

TEST_CASE("lenient parse of close-less text") {
    const auto m = parse_lenient("<question>Soru <think> adım adım <solution>sonuç 4\n<answer>B");
    CHECK(m.at(Component::Question) == "Soru");
    CHECK(m.at(Component::Think) == "adım adım");
    CHECK(m.at(Component::Solution) == "sonuç 4");
    CHECK(m.at(Component::Answer) == "B");
    const auto closed = parse_lenient("<solution> a </solution><answer>C</answer>");
    CHECK(closed.at(Component::Solution) == " a ");
}

TEST_CASE("render_dataset boundaries and skips") {
    Rng rng(4);
    Corpus c;
    for (int i = 0; i < 10; ++i) c.push_back(testing::random_sample(rng, "s" + std::to_string(i)));
    c[3].solution.reset();
    const auto r = render_dataset(c, SyntaxConfig::parse("QMSA"));
    CHECK(r.records.size() == 9);
    REQUIRE(r.skips.size() == 1);
    CHECK(r.skips[0].sample_id == "s3");
    for (const auto& rec : r.records) {
        const auto close = rec.text.find("</question>");
        CHECK(rec.prompt_end_offset == close + std::string("</question>\n").size());
        CHECK(rec.text.substr(rec.prompt_end_offset).rfind("<meta>", 0) == 0);
    }
    const auto no_q = render_dataset(c, SyntaxConfig::parse("TSA"));
    for (const auto& rec : no_q.records) CHECK(rec.prompt_end_offset == 0);
}

TEST_CASE("rendered record json round trip") {
    RenderedRecord r{"id", "<solution>a</solution>\n<answer>B</answer>", 0, "SA", {"img/1.png"}};
    const auto back = record_from_json(record_to_json(r));
    CHECK(back.sample_id == r.sample_id);
    CHECK(back.text == r.text);
    CHECK(back.image_refs == r.image_refs);
    auto j = record_to_json(r);
    j["prompt_end_offset"] = 999;
    CHECK_THROWS_AS(record_from_json(j), std::invalid_argument);
}
