#include "edusft/distill.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "edusft/answer.hpp"
#include "edusft/parallel.hpp"
#include "edusft/syntax.hpp"

namespace edusft::distill {

RejectionList::RejectionList(std::vector<std::string> keywords, bool fold_case, bool fold_diacritics)
    : keywords_(std::move(keywords)), fold_case_(fold_case), fold_diacritics_(fold_diacritics) {
    std::set<std::string> seen;
    for (const auto& k : keywords_) {
        if (k.empty()) throw std::invalid_argument("rejection keyword is empty");
        auto folded = text::fold(k, fold_options());
        if (!seen.insert(folded).second) throw std::invalid_argument("duplicate rejection keyword after folding: " + k);
        folded_.push_back(std::move(folded));
    }
}

RejectionList RejectionList::from_file(const std::filesystem::path& path, bool fold_case, bool fold_diacritics) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open rejection list " + path.string());
    std::vector<std::string> keywords;
    std::string line;
    while (std::getline(in, line)) {
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        keywords.emplace_back(t);
    }
    return RejectionList(std::move(keywords), fold_case, fold_diacritics);
}

RejectionVerdict check_rejection(std::string_view text, const RejectionList& list) {
    if (list.empty()) return {};
    const auto folded = text::fold(text, list.fold_options());
    const auto& keys = list.folded_keywords();
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (folded.find(keys[i]) != std::string::npos) return {false, list.keywords()[i]};
    }
    return {};
}

std::string render_prompt(const std::string& tmpl, const Sample& item, const std::string& transcript) {
    std::string choices;
    for (const auto& c : item.choices) {
        if (!choices.empty()) choices.push_back('\n');
        choices += c.letter + ") " + c.text;
    }
    std::string out = text::replace_all(tmpl, "{question}", item.question_text);
    out = text::replace_all(out, "{choices}", choices);
    out = text::replace_all(out, "{meta}", item.meta ? syntax::serialize_meta(*item.meta) : std::string());
    out = text::replace_all(out, "{transcript}", transcript);
    return out;
}

void DistillationPolicy::validate() const {
    auto check = [&](int v, const char* name, int min) {
        if (v < min || v > ceiling) {
            throw std::invalid_argument(std::string(name) + " must be in [" + std::to_string(min) + ", " +
                                        std::to_string(ceiling) + "], got " + std::to_string(v));
        }
    };
    if (ceiling < 1) throw std::invalid_argument("ceiling must be positive");
    check(primary_candidates, "primary_candidates", 1);
    check(fallback_candidates, "fallback_candidates", 0);
    check(repair_max_candidates, "repair_max_candidates", 0);
    if (max_retries < 0) throw std::invalid_argument("max_retries must be non-negative");
}

DistillationPolicy DistillationPolicy::core_reason() { return DistillationPolicy{}; }

DistillationPolicy DistillationPolicy::meta_reason() {
    DistillationPolicy p;
    p.primary_candidates = 8;
    p.fallback_candidates = 3;
    p.fallback_context = FallbackContext::Transcript;
    return p;
}

DistillationPolicy DistillationPolicy::from_json(const json& j) {
    DistillationPolicy p;
    const auto profile = j.value("profile", std::string("core_reason"));
    if (profile == "meta_reason") p = meta_reason();
    else if (profile != "core_reason") throw std::invalid_argument("unknown policy profile: " + profile);
    p.primary_candidates = j.value("primary_candidates", p.primary_candidates);
    p.fallback_candidates = j.value("fallback_candidates", p.fallback_candidates);
    if (j.contains("fallback_context")) {
        const auto ctx = j.at("fallback_context").get<std::string>();
        if (ctx == "none") p.fallback_context = FallbackContext::None;
        else if (ctx == "transcript") p.fallback_context = FallbackContext::Transcript;
        else throw std::invalid_argument("unknown fallback_context: " + ctx);
    }
    p.repair_max_candidates = j.value("repair_max_candidates", p.repair_max_candidates);
    p.max_retries = j.value("max_retries", p.max_retries);
    p.ceiling = j.value("ceiling", p.ceiling);
    if (j.contains("prompts")) {
        const auto& pr = j.at("prompts");
        p.prompts.primary = pr.value("primary", p.prompts.primary);
        p.prompts.fallback = pr.value("fallback", p.prompts.fallback);
        p.prompts.repair = pr.value("repair", p.prompts.repair);
    }
    p.validate();
    return p;
}

json DistillationPolicy::to_json() const {
    return json{{"primary_candidates", primary_candidates},
                {"fallback_candidates", fallback_candidates},
                {"fallback_context", fallback_context == FallbackContext::Transcript ? "transcript" : "none"},
                {"repair_max_candidates", repair_max_candidates},
                {"max_retries", max_retries},
                {"ceiling", ceiling}};
}

namespace {

// One candidate attempt with bounded retries. Returns nullopt on exhaustion.
std::optional<std::string> request_candidate(TeacherAdapter& teacher, const TeacherRequest& req, int max_retries,
                                             AttemptLog& log) {
    for (int call = 0; call <= max_retries; ++call) {
        ++log.calls;
        try {
            return teacher.generate(req);
        } catch (const AdapterError& e) {
            log.error = e.what();
        }
    }
    return std::nullopt;
}

bool run_phase(ItemOutcome& out, const Sample& item, Phase phase, int count, const std::string& prompt,
               const DistillationPolicy& policy, const RejectionList& rejection, TeacherAdapter& teacher) {
    for (int i = 0; i < count; ++i) {
        AttemptLog log;
        log.attempt = ++out.attempts;
        log.phase = phase;
        TeacherRequest req{item.id, prompt, item.image_refs, log.attempt, phase};
        auto candidate = request_candidate(teacher, req, policy.max_retries, log);
        if (!candidate) {
            out.verdict = ItemVerdict::Errored;
            out.error = log.error;
            out.log.push_back(std::move(log));
            return true;
        }
        log.error.clear();
        const auto verdict = check_rejection(*candidate, rejection);
        log.accepted = verdict.accepted;
        log.matched_keyword = verdict.matched_keyword;
        log.answer = extract_answer(*candidate);
        out.log.push_back(log);
        if (verdict.accepted) {
            out.verdict = ItemVerdict::Accepted;
            out.phase = phase;
            out.candidate = std::move(*candidate);
            return true;
        }
    }
    return false;
}

}  // namespace

ItemOutcome distill_item(const Sample& item, const DistillationPolicy& policy, const RejectionList& rejection,
                         TeacherAdapter& teacher, const std::optional<std::string>& transcript) {
    ItemOutcome out;
    const auto primary_prompt = render_prompt(policy.prompts.primary, item);
    if (run_phase(out, item, Phase::Primary, policy.primary_candidates, primary_prompt, policy, rejection, teacher)) {
        return out;
    }
    if (policy.fallback_candidates > 0) {
        if (policy.fallback_context == FallbackContext::Transcript) {
            if (transcript) {
                const auto prompt = render_prompt(policy.prompts.fallback, item, *transcript);
                if (run_phase(out, item, Phase::Fallback, policy.fallback_candidates, prompt, policy, rejection,
                              teacher)) {
                    return out;
                }
            } else {
                out.fallback_skipped = true;
            }
        } else if (run_phase(out, item, Phase::Fallback, policy.fallback_candidates, primary_prompt, policy,
                             rejection, teacher)) {
            return out;
        }
    }
    out.verdict = ItemVerdict::Excluded;
    return out;
}

namespace {

std::optional<std::string> tagged_block(const std::string& text, std::string_view tag) {
    const std::string open = "<" + std::string(tag) + ">";
    const std::string close = "</" + std::string(tag) + ">";
    const auto b = text.find(open);
    if (b == std::string::npos) return std::nullopt;
    const auto e = text.find(close, b + open.size());
    if (e == std::string::npos) return std::nullopt;
    return text.substr(b + open.size(), e - b - open.size());
}

// Candidate text with think/answer blocks and any leftover tags removed.
std::string untagged_solution(std::string text) {
    for (std::string_view tag : {"think", "answer"}) {
        const std::string open = "<" + std::string(tag) + ">";
        const std::string close = "</" + std::string(tag) + ">";
        for (auto b = text.find(open); b != std::string::npos; b = text.find(open)) {
            const auto e = text.find(close, b);
            text.erase(b, e == std::string::npos ? std::string::npos : e + close.size() - b);
        }
    }
    for (auto c : syntax::kAllComponents) {
        const std::string name(syntax::tag_name(c));
        text = text::replace_all(text, "<" + name + ">", "");
        text = text::replace_all(text, "</" + name + ">", "");
    }
    return std::string(text::trim(text));
}

}  // namespace

Sample apply_candidate(const Sample& item, const ItemOutcome& outcome, const json& teacher_info) {
    Sample s = item;
    if (auto sol = tagged_block(outcome.candidate, "solution")) {
        s.solution = std::string(text::trim(*sol));
    } else {
        s.solution = untagged_solution(outcome.candidate);
    }
    if (auto think = tagged_block(outcome.candidate, "think")) s.think = std::string(text::trim(*think));
    json d{{"phase", outcome.phase ? std::string(to_string(*outcome.phase)) : std::string()},
           {"attempts", outcome.attempts},
           {"teacher", teacher_info}};
    if (auto a = extract_answer(outcome.candidate)) d["teacher_answer"] = std::string(1, *a);
    s.provenance["distill"] = std::move(d);
    return s;
}

CampaignReport& CampaignReport::operator+=(const CampaignReport& other) {
    total += other.total;
    primary_accepted += other.primary_accepted;
    fallback_accepted += other.fallback_accepted;
    excluded += other.excluded;
    errored += other.errored;
    per_item_logs.insert(per_item_logs.end(), other.per_item_logs.begin(), other.per_item_logs.end());
    std::stable_sort(per_item_logs.begin(), per_item_logs.end(),
                     [](const ItemLog& a, const ItemLog& b) { return a.item_id < b.item_id; });
    return *this;
}

json report_to_json(const CampaignReport& r) {
    json logs = json::array();
    for (const auto& l : r.per_item_logs) {
        json e{{"item_id", l.item_id}, {"attempts", l.attempts}, {"verdict", l.verdict}};
        if (l.matched_keyword) e["matched_keyword"] = *l.matched_keyword;
        if (!l.error.empty()) e["error"] = l.error;
        logs.push_back(std::move(e));
    }
    return json{{"total", r.total},
                {"primary_accepted", r.primary_accepted},
                {"fallback_accepted", r.fallback_accepted},
                {"excluded", r.excluded},
                {"errored", r.errored},
                {"per_item_logs", std::move(logs)}};
}

namespace {

void require_valid(const Corpus& corpus) {
    for (const auto& s : corpus) {
        const auto report = validate_sample(s);
        if (!report.ok()) {
            throw std::invalid_argument("sample '" + s.id + "' fails validation: " + report.violations.front().message);
        }
    }
}

std::optional<std::string> last_matched(const std::vector<AttemptLog>& log) {
    for (auto it = log.rbegin(); it != log.rend(); ++it) {
        if (it->matched_keyword) return it->matched_keyword;
    }
    return std::nullopt;
}

}  // namespace

CampaignResult run_campaign(const Corpus& corpus, const DistillationPolicy& policy, const RejectionList& rejection,
                            TeacherAdapter& teacher, const std::map<std::string, std::string>& transcripts,
                            std::size_t parallelism) {
    policy.validate();
    require_valid(corpus);
    std::vector<ItemOutcome> outcomes(corpus.size());
    parallel_for(corpus.size(), parallelism, [&](std::size_t i) {
        std::optional<std::string> transcript;
        if (auto it = transcripts.find(corpus[i].id); it != transcripts.end()) transcript = it->second;
        outcomes[i] = distill_item(corpus[i], policy, rejection, teacher, transcript);
    });

    CampaignResult result;
    auto& r = result.report;
    const auto teacher_info = teacher.describe();
    r.total = corpus.size();
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& o = outcomes[i];
        ItemLog log{corpus[i].id, o.attempts, "", last_matched(o.log), o.error};
        switch (o.verdict) {
            case ItemVerdict::Accepted:
                if (o.phase == Phase::Primary) {
                    ++r.primary_accepted;
                    log.verdict = "primary";
                } else {
                    ++r.fallback_accepted;
                    log.verdict = "fallback";
                }
                result.accepted.push_back(apply_candidate(corpus[i], o, teacher_info));
                break;
            case ItemVerdict::Excluded:
                ++r.excluded;
                log.verdict = "excluded";
                break;
            case ItemVerdict::Errored:
                ++r.errored;
                log.verdict = "errored";
                break;
        }
        r.per_item_logs.push_back(std::move(log));
    }
    std::sort(r.per_item_logs.begin(), r.per_item_logs.end(),
              [](const ItemLog& a, const ItemLog& b) { return a.item_id < b.item_id; });
    return result;
}

json repair_report_to_json(const RepairReport& r) {
    json logs = json::array();
    for (const auto& l : r.per_item_logs) {
        json e{{"item_id", l.item_id}, {"attempts", l.attempts}, {"recovered", l.recovered}};
        if (l.errored) e["errored"] = true;
        if (!l.note.empty()) e["note"] = l.note;
        logs.push_back(std::move(e));
    }
    return json{{"flagged", r.flagged},
                {"recovered", r.recovered},
                {"unrecovered", r.unrecovered},
                {"errored", r.errored},
                {"per_item_logs", std::move(logs)}};
}

RepairResult run_repair(const Corpus& flagged, const DistillationPolicy& policy, const RejectionList& rejection,
                        TeacherAdapter& teacher, std::size_t parallelism) {
    policy.validate();
    struct Slot {
        ItemOutcome outcome;
        RepairLog log;
    };
    std::vector<Slot> slots(flagged.size());
    parallel_for(flagged.size(), parallelism, [&](std::size_t i) {
        const auto& item = flagged[i];
        auto& slot = slots[i];
        slot.log.item_id = item.id;
        if (!item.gold_answer || !is_option_letter(*item.gold_answer)) {
            slot.log.note = "no valid gold answer to check against";
            return;
        }
        const auto prompt = render_prompt(policy.prompts.repair, item);
        auto& out = slot.outcome;
        for (int k = 0; k < policy.repair_max_candidates; ++k) {
            AttemptLog log;
            log.attempt = ++out.attempts;
            log.phase = Phase::Repair;
            auto candidate = request_candidate(teacher, {item.id, prompt, item.image_refs, log.attempt, Phase::Repair},
                                               policy.max_retries, log);
            if (!candidate) {
                out.verdict = ItemVerdict::Errored;
                slot.log.errored = true;
                slot.log.note = log.error;
                out.log.push_back(std::move(log));
                break;
            }
            log.error.clear();
            const auto verdict = check_rejection(*candidate, rejection);
            log.accepted = verdict.accepted;
            log.matched_keyword = verdict.matched_keyword;
            log.answer = extract_answer(*candidate);
            out.log.push_back(log);
            if (verdict.accepted && log.answer && std::string(1, *log.answer) == *item.gold_answer) {
                out.verdict = ItemVerdict::Accepted;
                out.phase = Phase::Repair;
                out.candidate = std::move(*candidate);
                slot.log.recovered = true;
                break;
            }
        }
        slot.log.attempts = out.attempts;
    });

    RepairResult result;
    auto& r = result.report;
    const auto teacher_info = teacher.describe();
    r.flagged = flagged.size();
    for (std::size_t i = 0; i < flagged.size(); ++i) {
        auto& slot = slots[i];
        slot.log.attempts = slot.outcome.attempts;
        if (slot.log.recovered) {
            ++r.recovered;
            result.recovered.push_back(apply_candidate(flagged[i], slot.outcome, teacher_info));
        } else if (slot.log.errored) {
            ++r.errored;
        } else {
            ++r.unrecovered;
        }
        r.per_item_logs.push_back(std::move(slot.log));
    }
    std::sort(r.per_item_logs.begin(), r.per_item_logs.end(),
              [](const RepairLog& a, const RepairLog& b) { return a.item_id < b.item_id; });
    return result;
}

double malformed_rate(std::size_t flagged, std::size_t total) {
    if (total == 0) throw std::invalid_argument("malformed_rate: total must be positive");
    return static_cast<double>(flagged) / static_cast<double>(total);
}

}  // namespace edusft::distill
