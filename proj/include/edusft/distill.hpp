#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edusft/adapters.hpp"
#include "edusft/corpus.hpp"
#include "edusft/text.hpp"

namespace edusft::distill {

// Phrase filter for teacher output. Keywords are matched as folded substrings.
class RejectionList {
public:
    RejectionList() = default;
    // Throws std::invalid_argument on an empty keyword or on two keywords that
    // fold to the same string.
    explicit RejectionList(std::vector<std::string> keywords, bool fold_case = true, bool fold_diacritics = true);

    // One keyword per line; blank lines and lines starting with '#' are skipped.
    static RejectionList from_file(const std::filesystem::path& path, bool fold_case = true,
                                   bool fold_diacritics = true);

    const std::vector<std::string>& keywords() const { return keywords_; }
    const std::vector<std::string>& folded_keywords() const { return folded_; }
    text::FoldOptions fold_options() const { return {fold_case_, fold_diacritics_}; }
    bool empty() const { return keywords_.empty(); }

private:
    std::vector<std::string> keywords_;
    std::vector<std::string> folded_;
    bool fold_case_ = true;
    bool fold_diacritics_ = true;
};

struct RejectionVerdict {
    bool accepted = true;
    std::optional<std::string> matched_keyword;  // original spelling of the first match in list order
};

RejectionVerdict check_rejection(std::string_view text, const RejectionList& list);

enum class FallbackContext { None, Transcript };

struct PromptTemplates {
    // Placeholders: {question} {choices} {meta} {transcript}
    std::string primary = "Solve the following multiple-choice question. Reason step by step, then give the "
                          "derivation inside <solution></solution> and the final option letter inside "
                          "<answer></answer>.\n\n{question}\n{choices}";
    std::string fallback = "A video explanation of this question is transcribed below.\n\nTranscript:\n{transcript}\n\n"
                           "Using it, solve the question. Give the derivation inside <solution></solution> and the "
                           "final option letter inside <answer></answer>.\n\n{question}\n{choices}";
    std::string repair = "The following question has a known correct answer but a flawed worked solution. Write a "
                         "correct derivation inside <solution></solution> and the final option letter inside "
                         "<answer></answer>.\n\n{question}\n{choices}";
};

std::string render_prompt(const std::string& tmpl, const Sample& item, const std::string& transcript = {});

struct DistillationPolicy {
    int primary_candidates = 1;
    int fallback_candidates = 0;
    FallbackContext fallback_context = FallbackContext::None;
    int repair_max_candidates = 20;
    int max_retries = 2;  // extra calls after an adapter failure, per attempt
    int ceiling = 64;
    PromptTemplates prompts;

    // Throws std::invalid_argument when a count is out of range.
    void validate() const;

    // Single candidate, no fallback, 20 repair candidates.
    static DistillationPolicy core_reason();
    // Eight candidates, then three transcript-augmented regenerations.
    static DistillationPolicy meta_reason();
    // Keys: profile ("core_reason" | "meta_reason"), primary_candidates,
    // fallback_candidates, fallback_context ("none" | "transcript"),
    // repair_max_candidates, max_retries, ceiling, prompts{primary,fallback,repair}.
    static DistillationPolicy from_json(const json& j);
    json to_json() const;
};

enum class ItemVerdict { Accepted, Excluded, Errored };

struct AttemptLog {
    int attempt = 0;
    Phase phase = Phase::Primary;
    bool accepted = false;
    std::optional<std::string> matched_keyword;
    std::optional<char> answer;  // letter extracted from the candidate
    int calls = 0;               // adapter invocations including retries
    std::string error;
};

struct ItemOutcome {
    ItemVerdict verdict = ItemVerdict::Excluded;
    std::optional<Phase> phase;  // set when accepted
    int attempts = 0;            // candidates requested from the teacher
    std::string candidate;       // accepted text
    std::vector<AttemptLog> log;
    std::string error;
    bool fallback_skipped = false;  // transcript fallback configured but no transcript
};

// Requests candidates until one passes the filter. The primary phase runs
// policy.primary_candidates attempts; the fallback phase runs
// policy.fallback_candidates more, with the transcript injected when
// fallback_context is Transcript (and is skipped if none is supplied).
ItemOutcome distill_item(const Sample& item, const DistillationPolicy& policy, const RejectionList& rejection,
                         TeacherAdapter& teacher, const std::optional<std::string>& transcript = std::nullopt);

// Copies think/solution from a tagged candidate (or takes the whole candidate
// as the solution) and records phase and attempts in provenance["distill"].
Sample apply_candidate(const Sample& item, const ItemOutcome& outcome, const json& teacher_info);

struct ItemLog {
    std::string item_id;
    int attempts = 0;
    std::string verdict;  // "primary" | "fallback" | "excluded" | "errored"
    std::optional<std::string> matched_keyword;
    std::string error;
};

struct CampaignReport {
    std::size_t total = 0;
    std::size_t primary_accepted = 0;
    std::size_t fallback_accepted = 0;
    std::size_t excluded = 0;
    std::size_t errored = 0;
    std::vector<ItemLog> per_item_logs;  // ordered by item id

    bool conserved() const { return primary_accepted + fallback_accepted + excluded + errored == total; }
    // Associative merge; logs stay sorted by item id.
    CampaignReport& operator+=(const CampaignReport& other);
};

json report_to_json(const CampaignReport& report);

struct CampaignResult {
    CampaignReport report;
    Corpus accepted;  // input order
};

// Throws std::invalid_argument if any item fails validate_sample.
CampaignResult run_campaign(const Corpus& corpus, const DistillationPolicy& policy, const RejectionList& rejection,
                            TeacherAdapter& teacher, const std::map<std::string, std::string>& transcripts = {},
                            std::size_t parallelism = 1);

struct RepairLog {
    std::string item_id;
    int attempts = 0;
    bool recovered = false;
    bool errored = false;
    std::string note;
};

struct RepairReport {
    std::size_t flagged = 0;
    std::size_t recovered = 0;
    std::size_t unrecovered = 0;
    std::size_t errored = 0;
    std::vector<RepairLog> per_item_logs;  // ordered by item id
};

json repair_report_to_json(const RepairReport& report);

struct RepairResult {
    RepairReport report;
    Corpus recovered;  // input order, provenance["distill"]["phase"] == "repair"
};

// Regenerates up to policy.repair_max_candidates candidates per item; a
// candidate is kept only if it passes the filter and its final answer letter
// equals the item's gold answer.
RepairResult run_repair(const Corpus& flagged, const DistillationPolicy& policy, const RejectionList& rejection,
                        TeacherAdapter& teacher, std::size_t parallelism = 1);

// flagged / total. Throws std::invalid_argument when total is zero.
double malformed_rate(std::size_t flagged, std::size_t total);

}  // namespace edusft::distill
