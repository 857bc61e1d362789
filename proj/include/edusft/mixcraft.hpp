#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edusft/corpus.hpp"
#include "edusft/syntax.hpp"
#include "edusft/tokenizer.hpp"

namespace edusft::mix {

class MixError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Restricts MR to items accepted without the transcript fallback.
enum class MrFilter { None, PrimaryPhaseOnly };

struct MixSpec {
    std::vector<SourceTag> sources;  // sorted, unique, non-empty
    std::uint64_t seed = 0;
    bool dedupe = true;
    MrFilter mr_filter = MrFilter::None;

    // "CR+MR+CV" or "CR,MR,CV". Throws MixError on unknown tags.
    static std::vector<SourceTag> parse_sources(std::string_view list);
    std::string name() const;  // "CR+MR+CV", with " (No Video)" for the MR filter
    json to_json() const;
};

struct MixExperiment {
    std::string name;
    MixSpec spec;
    double reference_accuracy;  // fraction, display only
};

// The seven dataset-mix runs, best first.
std::vector<MixExperiment> enumerate_mix_experiments(std::uint64_t seed = 0);

// Whitespace-collapsed, case-folded question text.
std::string dedupe_key(const Sample& sample);

struct MixManifest {
    MixSpec spec;
    std::map<std::string, std::size_t> input_counts;
    std::map<std::string, std::size_t> output_counts;
    std::size_t filtered_out = 0;
    std::size_t dedupe_drops = 0;
    std::vector<std::pair<std::string, std::string>> dropped;  // (dropped id, survivor id)

    json to_json() const;
};

struct MixResult {
    Corpus samples;
    MixManifest manifest;
};

// Union of the selected sources. Duplicates (by dedupe_key) keep the copy
// from the lexicographically-first source tag, then first occurrence. The
// result is sorted by id and then shuffled with the spec seed.
MixResult mix(const std::map<SourceTag, Corpus>& corpora, const MixSpec& spec);

enum class Stratify { None, Topic };

struct SplitSpec {
    std::size_t holdout_count = 0;
    Stratify stratify_by = Stratify::None;
    std::uint64_t seed = 0;
};

struct SplitResult {
    Corpus train;  // corpus order
    Corpus test;   // corpus order
    std::map<std::string, std::size_t> test_per_topic;
};

// Proportional allocation of `quota` across groups by the largest-remainder
// method; ties on the remainder go to the lexicographically smaller key.
std::map<std::string, std::size_t> largest_remainder(const std::map<std::string, std::size_t>& group_sizes,
                                                     std::size_t quota);

// Throws MixError when holdout_count is 0 or >= corpus size, or when
// stratifying and a sample has no topic.
SplitResult split_holdout(const Corpus& corpus, const SplitSpec& spec);

enum class Rounding { Floor, Round };

struct MaskPlan {
    double ratio = 0.2;
    std::uint64_t seed = 0;
    Rounding rounding = Rounding::Round;
    std::uint64_t epoch = 0;  // distinct masks per epoch from one seed
};

std::size_t masked_count(double ratio, std::size_t n, Rounding rounding);

struct MaskedRecord {
    syntax::RenderedRecord record;
    std::vector<std::size_t> mask_indices;  // relative to the first completion token
    std::size_t completion_tokens = 0;
    std::string tokenizer_id;
};

json masked_to_json(const MaskedRecord& m);

// Text is left untouched; masks are index metadata. Throws MixError for an
// invalid plan or a record whose boundary lies outside its text.
std::vector<MaskedRecord> mask_completions(const std::vector<syntax::RenderedRecord>& records, const MaskPlan& plan,
                                           const Tokenizer& tokenizer);

}  // namespace edusft::mix
