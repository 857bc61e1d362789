#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "edusft/answer.hpp"
#include "planted.hpp"

using namespace edusft;

TEST_CASE("tier order") {
    CHECK(extract_answer("Cevap: B\n<answer>C</answer>") == 'C');
    CHECK(extract_answer("<answer>A</answer> ... <answer> D </answer>") == 'D');
    CHECK(extract_answer("C\nAnswer: (E)") == 'E');
    CHECK(extract_answer("Sonuç:\n(B)\n") == 'B');
    CHECK(extract_answer("bla\nA.\nbla\nC)") == 'C');
    CHECK(extract_answer("<answer>F</answer>") == std::nullopt);
    CHECK(extract_answer("Cevaplar: hepsi") == std::nullopt);
    CHECK(extract_answer("") == std::nullopt);
}

TEST_CASE("label rules") {
    CHECK(extract_answer("CEVAP: d") == std::nullopt);  // lowercase letters are not options
    CHECK(extract_answer("cevap:A") == 'A');
    CHECK(extract_answer("Final answer: B") == 'B');
    CHECK(extract_answer("Answer: Because") == std::nullopt);
    CHECK(extract_answer("Yanıtım answer: (C)") == 'C');
}

TEST_CASE("detailed rule reported") {
    CHECK(extract_answer_detailed("<answer>A</answer>")->rule == AnswerRule::TaggedBlock);
    CHECK(extract_answer_detailed("Cevap: A")->rule == AnswerRule::Labeled);
    CHECK(extract_answer_detailed("A")->rule == AnswerRule::BareLine);
}

TEST_CASE("planted-answer oracle, 500 responses") {
    const auto cases = planted::make_cases(500, 77);
    std::size_t mismatches = 0;
    for (const auto& c : cases) {
        if (extract_answer(c.response) != c.expected) {
            ++mismatches;
            MESSAGE("mismatch: " << c.response);
        }
    }
    CHECK(mismatches == 0);
}
