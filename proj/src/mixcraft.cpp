#include "edusft/mixcraft.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "edusft/rng.hpp"
#include "edusft/text.hpp"

namespace edusft::mix {

std::vector<SourceTag> MixSpec::parse_sources(std::string_view list) {
    std::set<std::string> names;
    std::size_t start = 0;
    while (start <= list.size()) {
        auto end = list.find_first_of(",+", start);
        if (end == std::string_view::npos) end = list.size();
        const auto token = text::trim(list.substr(start, end - start));
        if (!token.empty()) {
            if (!parse_source_tag(token)) throw MixError("unknown source tag '" + std::string(token) + "'");
            names.emplace(token);
        }
        start = end + 1;
    }
    if (names.empty()) throw MixError("mix needs at least one source");
    std::vector<SourceTag> out;
    for (const auto& n : names) out.push_back(*parse_source_tag(n));
    return out;
}

std::string MixSpec::name() const {
    std::vector<std::string> names;
    for (auto s : sources) names.emplace_back(to_string(s));
    std::sort(names.begin(), names.end());
    std::string out;
    for (const auto& n : names) out += (out.empty() ? "" : "+") + n;
    if (mr_filter == MrFilter::PrimaryPhaseOnly) out += " (No Video)";
    return out;
}

json MixSpec::to_json() const {
    json src = json::array();
    for (auto s : sources) src.push_back(std::string(to_string(s)));
    return json{{"sources", src},
                {"seed", seed},
                {"dedupe", dedupe},
                {"mr_filter", mr_filter == MrFilter::PrimaryPhaseOnly ? "primary_phase_only" : "none"}};
}

std::vector<MixExperiment> enumerate_mix_experiments(std::uint64_t seed) {
    auto make = [&](const char* name, const char* sources, MrFilter filter, double acc) {
        MixSpec spec;
        spec.sources = MixSpec::parse_sources(sources);
        spec.seed = seed;
        spec.mr_filter = filter;
        return MixExperiment{name, spec, acc};
    };
    return {
        make("CR+MR+CV", "CR,MR,CV", MrFilter::None, 0.5599),
        make("CR+CV", "CR,CV", MrFilter::None, 0.5561),
        make("MR+CV", "MR,CV", MrFilter::None, 0.5539),
        make("MR+CR", "MR,CR", MrFilter::None, 0.5502),
        make("MR", "MR", MrFilter::None, 0.5399),
        make("CR", "CR", MrFilter::None, 0.5340),
        make("MR (No Video)", "MR", MrFilter::PrimaryPhaseOnly, 0.5334),
    };
}

std::string dedupe_key(const Sample& sample) {
    return text::collapse_whitespace(text::fold(sample.question_text, {true, false}));
}

json MixManifest::to_json() const {
    json drops = json::array();
    for (const auto& [d, s] : dropped) drops.push_back({{"dropped", d}, {"kept", s}});
    return json{{"spec", spec.to_json()},
                {"input_counts", input_counts},
                {"output_counts", output_counts},
                {"filtered_out", filtered_out},
                {"dedupe_drops", dedupe_drops},
                {"dropped", drops}};
}

namespace {

bool is_primary_phase(const Sample& s) {
    const auto& p = s.provenance;
    return p.contains("distill") && p.at("distill").is_object() && p.at("distill").value("phase", "") == "primary";
}

}  // namespace

MixResult mix(const std::map<SourceTag, Corpus>& corpora, const MixSpec& spec) {
    if (spec.sources.empty()) throw MixError("mix needs at least one source");
    // process sources in lexicographic order of their tag names
    std::vector<SourceTag> order = spec.sources;
    std::sort(order.begin(), order.end(), [](SourceTag a, SourceTag b) { return to_string(a) < to_string(b); });
    order.erase(std::unique(order.begin(), order.end()), order.end());

    MixResult result;
    auto& m = result.manifest;
    m.spec = spec;
    std::unordered_map<std::string, std::string> seen;  // dedupe key -> survivor id
    std::set<std::string> ids;
    for (auto tag : order) {
        const auto it = corpora.find(tag);
        if (it == corpora.end()) throw MixError("no corpus supplied for source " + std::string(to_string(tag)));
        const std::string name(to_string(tag));
        m.input_counts[name] = it->second.size();
        m.output_counts[name] = 0;
        for (const auto& s : it->second) {
            if (s.source_tag != tag) {
                throw MixError("sample '" + s.id + "' is tagged " + std::string(to_string(s.source_tag)) +
                               " but supplied as " + name);
            }
            if (tag == SourceTag::MR && spec.mr_filter == MrFilter::PrimaryPhaseOnly && !is_primary_phase(s)) {
                ++m.filtered_out;
                continue;
            }
            if (spec.dedupe) {
                auto [pos, inserted] = seen.emplace(dedupe_key(s), s.id);
                if (!inserted) {
                    ++m.dedupe_drops;
                    m.dropped.emplace_back(s.id, pos->second);
                    continue;
                }
            }
            if (!ids.insert(s.id).second) throw MixError("sample id '" + s.id + "' occurs in more than one source");
            result.samples.push_back(s);
            ++m.output_counts[name];
        }
    }
    std::sort(result.samples.begin(), result.samples.end(),
              [](const Sample& a, const Sample& b) { return a.id < b.id; });
    Rng rng(spec.seed);
    rng.shuffle(result.samples);
    return result;
}

std::map<std::string, std::size_t> largest_remainder(const std::map<std::string, std::size_t>& group_sizes,
                                                     std::size_t quota) {
    std::size_t total = 0;
    for (const auto& [_, n] : group_sizes) total += n;
    std::map<std::string, std::size_t> out;
    if (total == 0) return out;
    struct Rem {
        std::string key;
        std::size_t remainder;
    };
    std::vector<Rem> rems;
    std::size_t assigned = 0;
    for (const auto& [key, n] : group_sizes) {
        const auto scaled = static_cast<unsigned __int128>(quota) * n;
        out[key] = static_cast<std::size_t>(scaled / total);
        assigned += out[key];
        rems.push_back({key, static_cast<std::size_t>(scaled % total)});
    }
    std::stable_sort(rems.begin(), rems.end(), [](const Rem& a, const Rem& b) { return a.remainder > b.remainder; });
    for (std::size_t i = 0; assigned < quota && i < rems.size(); ++i, ++assigned) ++out[rems[i].key];
    return out;
}

SplitResult split_holdout(const Corpus& corpus, const SplitSpec& spec) {
    if (spec.holdout_count == 0) throw MixError("holdout_count must be positive");
    if (spec.holdout_count >= corpus.size()) {
        throw MixError("holdout_count " + std::to_string(spec.holdout_count) + " must be smaller than the corpus (" +
                       std::to_string(corpus.size()) + " items)");
    }
    Rng rng(spec.seed);
    std::vector<bool> in_test(corpus.size(), false);
    SplitResult result;
    if (spec.stratify_by == Stratify::None) {
        for (auto i : rng.sample_indices(corpus.size(), spec.holdout_count)) in_test[i] = true;
    } else {
        std::map<std::string, std::vector<std::size_t>> members;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const auto& s = corpus[i];
            if (!s.meta || s.meta->topic_id.empty()) throw MixError("sample '" + s.id + "' has no topic_id");
            members[s.meta->topic_id].push_back(i);
        }
        std::map<std::string, std::size_t> sizes;
        for (const auto& [topic, idx] : members) sizes[topic] = idx.size();
        const auto quotas = largest_remainder(sizes, spec.holdout_count);
        for (const auto& [topic, idx] : members) {
            for (auto k : rng.sample_indices(idx.size(), quotas.at(topic))) in_test[idx[k]] = true;
        }
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (in_test[i]) {
            result.test.push_back(corpus[i]);
            ++result.test_per_topic[corpus[i].meta ? corpus[i].meta->topic_id : std::string()];
        } else {
            result.train.push_back(corpus[i]);
        }
    }
    return result;
}

std::size_t masked_count(double ratio, std::size_t n, Rounding rounding) {
    const double x = ratio * static_cast<double>(n);
    // tolerance absorbs representation error such as 0.29 * 100 = 28.999...
    const double k = rounding == Rounding::Floor ? std::floor(x + 1e-9) : std::floor(x + 0.5 + 1e-9);
    return std::min(n, static_cast<std::size_t>(std::max(0.0, k)));
}

json masked_to_json(const MaskedRecord& m) {
    json j = syntax::record_to_json(m.record);
    j["mask_indices"] = m.mask_indices;
    j["tokenizer_id"] = m.tokenizer_id;
    return j;
}

std::vector<MaskedRecord> mask_completions(const std::vector<syntax::RenderedRecord>& records, const MaskPlan& plan,
                                           const Tokenizer& tokenizer) {
    if (!(plan.ratio >= 0.0 && plan.ratio <= 1.0)) throw MixError("mask ratio must lie in [0, 1]");
    Rng rng(derive_seed(plan.seed, plan.epoch));
    std::vector<MaskedRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (r.prompt_end_offset > r.text.size()) {
            throw MixError("record '" + r.sample_id + "' has prompt_end_offset beyond its text");
        }
        const auto completion = std::string_view(r.text).substr(r.prompt_end_offset);
        MaskedRecord m{r, {}, tokenizer.count(completion), tokenizer.id()};
        const auto k = masked_count(plan.ratio, m.completion_tokens, plan.rounding);
        m.mask_indices = rng.sample_indices(m.completion_tokens, k);
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace edusft::mix
