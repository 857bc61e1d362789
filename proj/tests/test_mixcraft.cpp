#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "edusft/mixcraft.hpp"
#include "support.hpp"

using namespace edusft;
using namespace edusft::mix;

namespace {

Sample sample(const std::string& id, SourceTag tag, const std::string& topic, const std::string& question = {}) {
    Sample s;
    s.id = id;
    s.source_tag = tag;
    s.question_text = question.empty() ? "soru " + id : question;
    s.gold_answer = "A";
    s.solution = "çözüm";
    s.meta = Metadata{"s", "u", "o", std::nullopt, topic};
    return s;
}

Corpus topic_corpus(const std::map<std::string, std::size_t>& sizes) {
    Corpus c;
    for (const auto& [topic, n] : sizes) {
        for (std::size_t i = 0; i < n; ++i) c.push_back(sample(topic + "-" + std::to_string(i), SourceTag::CR, topic));
    }
    return c;
}

std::set<std::string> ids(const Corpus& c) {
    std::set<std::string> out;
    for (const auto& s : c) out.insert(s.id);
    return out;
}

}  // namespace

TEST_CASE("source parsing and names") {
    CHECK(MixSpec::parse_sources("MR+CR") == std::vector<SourceTag>{SourceTag::CR, SourceTag::MR});
    CHECK(MixSpec::parse_sources("CR,MR,CV").size() == 3);
    CHECK_THROWS_AS(MixSpec::parse_sources("CR,XX"), MixError);
    std::vector<std::string> names;
    for (const auto& e : enumerate_mix_experiments(1)) names.push_back(e.name);
    CHECK(names == std::vector<std::string>{"CR+MR+CV", "CR+CV", "MR+CV", "MR+CR", "MR", "CR", "MR (No Video)"});
}

TEST_CASE("mix dedupes and is seed deterministic") {
    std::map<SourceTag, Corpus> corpora;
    corpora[SourceTag::CR] = {sample("c1", SourceTag::CR, "t", "Aynı Soru"), sample("c2", SourceTag::CR, "t")};
    corpora[SourceTag::MR] = {sample("m1", SourceTag::MR, "t", "  aynı   SORU "), sample("m2", SourceTag::MR, "t")};
    corpora[SourceTag::CV] = {sample("v1", SourceTag::CV, "t")};
    MixSpec spec{MixSpec::parse_sources("CR,MR,CV"), 7};
    const auto a = mix::mix(corpora, spec);
    const auto b = mix::mix(corpora, spec);
    CHECK(serialize_corpus(a.samples) == serialize_corpus(b.samples));
    CHECK(ids(a.samples) == std::set<std::string>{"c1", "c2", "m2", "v1"});
    CHECK(a.manifest.dedupe_drops == 1);
    REQUIRE(a.manifest.dropped.size() == 1);
    CHECK(a.manifest.dropped[0] == std::pair<std::string, std::string>{"m1", "c1"});
    spec.dedupe = false;
    CHECK(mix::mix(corpora, spec).samples.size() == 5);
}

TEST_CASE("different seeds reorder the same multiset") {
    std::map<SourceTag, Corpus> corpora;
    for (int i = 0; i < 30; ++i) corpora[SourceTag::CR].push_back(sample("c" + std::to_string(i), SourceTag::CR, "t"));
    const auto a = mix::mix(corpora, MixSpec{{SourceTag::CR}, 1}).samples;
    const auto b = mix::mix(corpora, MixSpec{{SourceTag::CR}, 2}).samples;
    CHECK(ids(a) == ids(b));
    CHECK(serialize_corpus(a) != serialize_corpus(b));
}

TEST_CASE("input order does not change the mix") {
    std::map<SourceTag, Corpus> corpora;
    for (int i = 0; i < 20; ++i) corpora[SourceTag::CR].push_back(sample("c" + std::to_string(i), SourceTag::CR, "t"));
    auto reversed = corpora;
    std::reverse(reversed[SourceTag::CR].begin(), reversed[SourceTag::CR].end());
    const MixSpec spec{{SourceTag::CR}, 5};
    CHECK(serialize_corpus(mix::mix(corpora, spec).samples) == serialize_corpus(mix::mix(reversed, spec).samples));
}

TEST_CASE("no-video filter keeps primary-phase MR only") {
    std::map<SourceTag, Corpus> corpora;
    auto p = sample("m1", SourceTag::MR, "t");
    p.provenance = json{{"distill", {{"phase", "primary"}}}};
    auto f = sample("m2", SourceTag::MR, "t");
    f.provenance = json{{"distill", {{"phase", "fallback"}}}};
    corpora[SourceTag::MR] = {p, f};
    MixSpec spec{{SourceTag::MR}, 1, true, MrFilter::PrimaryPhaseOnly};
    CHECK(spec.name() == "MR (No Video)");
    const auto r = mix::mix(corpora, spec);
    CHECK(ids(r.samples) == std::set<std::string>{"m1"});
    CHECK(r.manifest.filtered_out == 1);
}

TEST_CASE("mix errors") {
    std::map<SourceTag, Corpus> corpora;
    corpora[SourceTag::CR] = {sample("x", SourceTag::CR, "t")};
    CHECK_THROWS_AS(mix::mix(corpora, MixSpec{{SourceTag::CR, SourceTag::MR}, 1}), MixError);
    corpora[SourceTag::MR] = {sample("x", SourceTag::MR, "t", "başka soru")};
    CHECK_THROWS_AS(mix::mix(corpora, MixSpec{{SourceTag::CR, SourceTag::MR}, 1}), MixError);
    corpora[SourceTag::MR] = {sample("y", SourceTag::CR, "t")};
    CHECK_THROWS_AS(mix::mix(corpora, MixSpec{{SourceTag::CR, SourceTag::MR}, 1}), MixError);
}

TEST_CASE("largest remainder hand cases") {
    CHECK(largest_remainder({{"a", 40}, {"b", 30}, {"c", 20}, {"d", 10}}, 10) ==
          std::map<std::string, std::size_t>{{"a", 4}, {"b", 3}, {"c", 2}, {"d", 1}});
    // quotas 1.5, 1.5, 1.0 -> the single spare seat goes to the smaller key
    CHECK(largest_remainder({{"x", 3}, {"y", 3}, {"z", 2}}, 4) ==
          std::map<std::string, std::size_t>{{"x", 2}, {"y", 1}, {"z", 1}});
    CHECK(largest_remainder({{"a", 1}, {"b", 1}, {"c", 1}}, 2) ==
          std::map<std::string, std::size_t>{{"a", 1}, {"b", 1}, {"c", 0}});
}

TEST_CASE("stratified split on the 40/30/20/10 fixture") {
    const auto corpus = topic_corpus({{"a", 40}, {"b", 30}, {"c", 20}, {"d", 10}});
    const auto r = split_holdout(corpus, SplitSpec{10, Stratify::Topic, 3});
    CHECK(r.test_per_topic == std::map<std::string, std::size_t>{{"a", 4}, {"b", 3}, {"c", 2}, {"d", 1}});
    CHECK(r.test.size() == 10);
    CHECK(r.train.size() == 90);
}

TEST_CASE("split partition law on random corpora") {
    Rng rng(17);
    for (int round = 0; round < 200; ++round) {
        std::map<std::string, std::size_t> sizes;
        const auto topics = 1 + rng.below(6);
        for (std::size_t t = 0; t < topics; ++t) sizes["t" + std::to_string(t)] = 1 + rng.below(15);
        const auto corpus = topic_corpus(sizes);
        const auto holdout = 1 + rng.below(corpus.size() - 1 == 0 ? 1 : corpus.size() - 1);
        if (holdout >= corpus.size()) continue;
        const SplitSpec spec{holdout, rng.below(2) ? Stratify::Topic : Stratify::None, rng.next()};
        const auto r = split_holdout(corpus, spec);
        REQUIRE(r.test.size() == holdout);
        REQUIRE(r.train.size() + r.test.size() == corpus.size());
        auto tr = ids(r.train), te = ids(r.test);
        std::vector<std::string> both;
        std::set_intersection(tr.begin(), tr.end(), te.begin(), te.end(), std::back_inserter(both));
        REQUIRE(both.empty());
        tr.insert(te.begin(), te.end());
        REQUIRE(tr == ids(corpus));
        const auto again = split_holdout(corpus, spec);
        REQUIRE(serialize_corpus(again.test) == serialize_corpus(r.test));
    }
}

TEST_CASE("split errors") {
    const auto corpus = topic_corpus({{"a", 5}});
    CHECK_THROWS_AS(split_holdout(corpus, SplitSpec{0, Stratify::None, 1}), MixError);
    CHECK_THROWS_AS(split_holdout(corpus, SplitSpec{5, Stratify::None, 1}), MixError);
    auto no_topic = corpus;
    no_topic[2].meta.reset();
    CHECK_THROWS_AS(split_holdout(no_topic, SplitSpec{2, Stratify::Topic, 1}), MixError);
    CHECK_NOTHROW(split_holdout(no_topic, SplitSpec{2, Stratify::None, 1}));
}

TEST_CASE("masked counts") {
    CHECK(masked_count(0.2, 10, Rounding::Round) == 2);
    CHECK(masked_count(0.2, 7, Rounding::Round) == 1);
    CHECK(masked_count(0.2, 8, Rounding::Round) == 2);
    CHECK(masked_count(0.2, 8, Rounding::Floor) == 1);
    CHECK(masked_count(0.2, 0, Rounding::Round) == 0);
}

TEST_CASE("masks stay in the completion and are reproducible") {
    WhitespaceTokenizer ws;
    syntax::RenderedRecord r;
    r.sample_id = "x";
    r.text = "<question>bir iki üç</question>\n<solution>a b c d e f g h i j</solution>";
    r.prompt_end_offset = r.text.find("<solution>");
    r.config = "QSA";
    const auto completion_tokens = ws.count(std::string_view(r.text).substr(r.prompt_end_offset));
    CHECK(completion_tokens == 10);
    const MaskPlan plan{0.2, 42, Rounding::Round, 0};
    const auto a = mask_completions({r}, plan, ws);
    REQUIRE(a.size() == 1);
    CHECK(a[0].mask_indices.size() == 2);
    CHECK(a[0].completion_tokens == 10);
    for (auto i : a[0].mask_indices) CHECK(i < 10);
    CHECK(mask_completions({r}, plan, ws)[0].mask_indices == a[0].mask_indices);
    CHECK(masked_to_json(a[0])["tokenizer_id"] == "whitespace");

    std::set<std::vector<std::size_t>> seen;
    for (std::uint64_t epoch = 0; epoch < 8; ++epoch) {
        seen.insert(mask_completions({r}, MaskPlan{0.2, 42, Rounding::Round, epoch}, ws)[0].mask_indices);
    }
    CHECK(seen.size() > 1);

    auto bad = r;
    bad.prompt_end_offset = bad.text.size() + 1;
    CHECK_THROWS_AS(mask_completions({bad}, plan, ws), MixError);
    CHECK_THROWS_AS(mask_completions({r}, MaskPlan{1.5, 1, Rounding::Round, 0}, ws), MixError);
}

TEST_CASE("cross-source duplicates against a hash-and-count oracle") {
    std::map<SourceTag, Corpus> corpora;
    for (int i = 0; i < 3; ++i) corpora[SourceTag::CR].push_back(sample("c" + std::to_string(i), SourceTag::CR, "t"));
    for (int i = 0; i < 2; ++i) corpora[SourceTag::MR].push_back(sample("m" + std::to_string(i), SourceTag::MR, "t"));
    for (int i = 0; i < 5; ++i) corpora[SourceTag::CV].push_back(sample("v" + std::to_string(i), SourceTag::CV, "t"));
    const MixSpec all{MixSpec::parse_sources("CR,MR,CV"), 11};
    CHECK(mix::mix(corpora, all).samples.size() == 10);

    corpora[SourceTag::MR][0].question_text = corpora[SourceTag::CV][1].question_text;
    corpora[SourceTag::CV][3].question_text = "SORU c2";
    std::map<std::string, std::string> oracle;  // key -> survivor id, visiting tags in name order
    for (auto tag : {SourceTag::CR, SourceTag::CV, SourceTag::MR}) {
        for (const auto& s : corpora[tag]) oracle.emplace(dedupe_key(s), s.id);
    }
    std::set<std::string> expected;
    for (const auto& [key, id] : oracle) expected.insert(id);
    const auto r = mix::mix(corpora, all);
    CHECK(r.samples.size() == 8);
    CHECK(ids(r.samples) == expected);
    CHECK(ids(r.samples).count("c2") == 1);
    CHECK(ids(r.samples).count("v1") == 1);
}

TEST_CASE("no-video over four primary and two fallback items") {
    std::map<SourceTag, Corpus> corpora;
    for (int i = 0; i < 6; ++i) {
        auto s = sample("m" + std::to_string(i), SourceTag::MR, "t");
        s.provenance = json{{"distill", {{"phase", i < 4 ? "primary" : "fallback"}}}};
        corpora[SourceTag::MR].push_back(s);
    }
    const auto experiments = enumerate_mix_experiments(3);
    const auto& nv = experiments.back();
    CHECK(nv.name == "MR (No Video)");
    CHECK(mix::mix(corpora, nv.spec).samples.size() == 4);
    for (const auto& e : experiments) {
        for (auto tag : e.spec.sources) CHECK((tag == SourceTag::CR || tag == SourceTag::MR || tag == SourceTag::CV));
    }
}

TEST_CASE("mix conservation without dedupe") {
    Rng rng(99);
    for (int round = 0; round < 50; ++round) {
        std::map<SourceTag, Corpus> corpora;
        std::size_t total = 0;
        for (auto tag : {SourceTag::CR, SourceTag::MR, SourceTag::CV}) {
            const auto n = rng.below(8);
            corpora[tag];
            for (std::size_t i = 0; i < n; ++i) {
                corpora[tag].push_back(sample(std::string(to_string(tag)) + std::to_string(i), tag, "t", "q"));
            }
            total += n;
        }
        MixSpec spec{MixSpec::parse_sources("CR,MR,CV"), rng.next()};
        spec.dedupe = false;
        REQUIRE(mix::mix(corpora, spec).samples.size() == total);
    }
}

TEST_CASE("holdout of corpus size minus one") {
    const auto corpus = topic_corpus({{"a", 6}});
    const auto r = split_holdout(corpus, SplitSpec{5, Stratify::None, 1});
    CHECK(r.train.size() == 1);
    CHECK(r.test.size() == 5);
}

TEST_CASE("aggregate mask rate over a thousand records") {
    WhitespaceTokenizer ws;
    Rng rng(5);
    std::vector<syntax::RenderedRecord> records;
    for (int i = 0; i < 1000; ++i) {
        syntax::RenderedRecord r;
        r.sample_id = "r" + std::to_string(i);
        std::string prompt = "<question>";
        for (std::size_t t = 0, n = 1 + rng.below(20); t < n; ++t) prompt += "p" + std::to_string(t) + " ";
        prompt += "</question>\n";
        std::string completion = "<solution>";
        for (std::size_t t = 0, n = 20 + rng.below(120); t < n; ++t) completion += " w" + std::to_string(t);
        completion += "</solution>";
        r.text = prompt + completion;
        r.prompt_end_offset = prompt.size();
        r.config = "QSA";
        records.push_back(std::move(r));
    }
    const auto masked = mask_completions(records, MaskPlan{0.2, 8, Rounding::Round, 0}, ws);
    std::size_t num = 0, den = 0;
    for (std::size_t i = 0; i < masked.size(); ++i) {
        const auto& m = masked[i];
        const auto prompt_tokens = ws.count(std::string_view(records[i].text).substr(0, records[i].prompt_end_offset));
        const auto all_tokens = ws.count(records[i].text);
        REQUIRE(prompt_tokens + m.completion_tokens == all_tokens);
        std::set<std::size_t> distinct(m.mask_indices.begin(), m.mask_indices.end());
        REQUIRE(distinct.size() == m.mask_indices.size());
        for (auto idx : m.mask_indices) REQUIRE(idx < m.completion_tokens);
        CHECK(m.record.text == records[i].text);
        num += m.mask_indices.size();
        den += m.completion_tokens;
    }
    const double rate = static_cast<double>(num) / static_cast<double>(den);
    CHECK(rate >= 0.195);
    CHECK(rate <= 0.205);

    for (const auto& m : mask_completions(records, MaskPlan{0.0, 8, Rounding::Round, 0}, ws)) {
        REQUIRE(m.mask_indices.empty());
    }
}
