// Command-line entry point: one subcommand per pipeline stage.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 configuration error, 3 data error,
// 4 when the adapter failed on every item. Failures print {"error": {"kind", "message"}} on
// stderr.

#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <iostream>
#include <pthread.h>
#include <thread>

#include "edusft/adapters.hpp"
#include "edusft/corpus.hpp"
#include "edusft/digest.hpp"
#include "edusft/distill.hpp"
#include "edusft/evalbench.hpp"
#include "edusft/format.hpp"
#include "edusft/ingest.hpp"
#include "edusft/mixcraft.hpp"
#include "edusft/review.hpp"
#include "edusft/syntax.hpp"
#include "edusft/text.hpp"

namespace fs = std::filesystem;
using namespace edusft;

namespace {

constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class DataError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw ConfigError(what + " not found: " + p.string());
}

json load_config(const fs::path& p, const std::string& what) {
    require_file(p, what);
    try {
        return json::parse(read_file(p));
    } catch (const json::parse_error& e) {
        throw ConfigError(what + " " + p.string() + " is not valid JSON: " + e.what());
    }
}

// Runs a config-building step, reporting any failure as a configuration error.
template <typename F>
auto as_config(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

Corpus load_corpus(const fs::path& p) {
    require_file(p, "corpus");
    return read_corpus(p);
}

std::vector<syntax::RenderedRecord> load_records(const fs::path& p) {
    require_file(p, "rendered records");
    std::vector<syntax::RenderedRecord> out;
    std::size_t line_no = 0;
    const auto content = read_file(p);
    for (auto line : text::split_lines(content)) {
        ++line_no;
        if (text::is_blank(line)) continue;
        try {
            out.push_back(syntax::record_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw CorpusError(line_no, "record", e.what());
        }
    }
    return out;
}

template <typename T, typename F>
std::string to_jsonl(const std::vector<T>& items, F&& f) {
    std::string out;
    for (const auto& item : items) out += f(item).dump() + "\n";
    return out;
}

// Collects planned writes, then either performs them with a manifest or, in
// dry-run mode, reports them.
class Run {
public:
    Run(std::string command, bool dry_run) : command_(std::move(command)), dry_run_(dry_run) {}

    void input(const fs::path& p) { inputs_.push_back({{"path", p.string()}, {"sha256", file_sha256(p)}}); }
    void output(const fs::path& p, std::string content) { writes_.emplace_back(p, std::move(content)); }
    void config(const std::string& key, json value) { config_[key] = std::move(value); }
    void seed(std::uint64_t s) { seed_ = s; }
    json& counts() { return counts_; }
    void manifest_at(fs::path p) { manifest_path_ = std::move(p); }

    int finish(json summary = json::object()) {
        if (!manifest_path_ && !writes_.empty()) manifest_path_ = fs::path(writes_.front().first.string() + ".manifest.json");
        json outputs = json::array();
        for (const auto& [path, content] : writes_) {
            outputs.push_back({{"path", path.string()}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
        }
        if (dry_run_) {
            summary["dry_run"] = true;
            summary["would_write"] = outputs;
            if (manifest_path_) summary["manifest"] = manifest_path_->string();
        } else {
            for (const auto& [path, content] : writes_) write_file_atomic(path, content);
            if (manifest_path_) {
                json m{{"command", command_}, {"tool_version", kVersion}};
                m["seed"] = seed_ ? json(*seed_) : json(nullptr);
                m["config_hash"] = sha256_hex(config_.dump());
                m["config"] = config_;
                m["inputs"] = inputs_;
                m["outputs"] = outputs;
                m["counts"] = counts_;
                write_file_atomic(*manifest_path_, m.dump(2) + "\n");
                summary["manifest"] = manifest_path_->string();
            }
        }
        summary["counts"] = counts_;
        std::cout << summary.dump() << std::endl;
        return 0;
    }

private:
    std::string command_;
    bool dry_run_;
    json inputs_ = json::array();
    std::vector<std::pair<fs::path, std::string>> writes_;
    json config_ = json::object();
    std::optional<std::uint64_t> seed_;
    json counts_ = json::object();
    std::optional<fs::path> manifest_path_;
};

struct TeacherOptions {
    std::string script;
    std::string endpoint;
};

std::unique_ptr<TeacherAdapter> make_teacher(const TeacherOptions& o, Run& run) {
    if (o.script.empty() == o.endpoint.empty()) throw ConfigError("give exactly one of --teacher-script or --endpoint");
    if (!o.script.empty()) {
        const auto j = load_config(o.script, "teacher script");
        run.input(o.script);
        run.config("teacher", {{"kind", "scripted"}, {"script_sha256", file_sha256(o.script)}});
        return std::make_unique<ScriptedTeacher>(j);
    }
    const auto cfg = as_config("endpoint", [&] { return EndpointConfig::from_json(load_config(o.endpoint, "endpoint")); });
    run.config("teacher", cfg.to_json());
    return std::make_unique<HttpTeacher>(cfg);
}

distill::DistillationPolicy load_policy(const std::string& policy_path, const std::string& profile) {
    return as_config("policy", [&] {
        distill::DistillationPolicy p;
        if (!policy_path.empty()) {
            p = distill::DistillationPolicy::from_json(load_config(policy_path, "policy"));
        } else if (profile == "core_reason") {
            p = distill::DistillationPolicy::core_reason();
        } else if (profile == "meta_reason") {
            p = distill::DistillationPolicy::meta_reason();
        } else {
            throw ConfigError("unknown profile '" + profile + "'");
        }
        p.validate();
        return p;
    });
}

distill::RejectionList load_rejection(const std::string& path) {
    require_file(path, "rejection list");
    return as_config("rejection list", [&] { return distill::RejectionList::from_file(path); });
}

// --- subcommands --------------------------------------------------------------

struct Common {
    bool dry_run = false;
    std::size_t parallelism = 1;
};

int cmd_ingest(const Common& c, const std::string& site, const std::string& rules_path, const std::string& out) {
    const auto rules = rules_path.empty() ? ingest::SiteRules{}
                                          : as_config("site rules", [&] {
                                                return ingest::SiteRules::from_json(load_config(rules_path, "site rules"));
                                            });
    if (!fs::is_directory(site)) throw ConfigError("site directory not found: " + site);
    Run run("ingest", c.dry_run);
    const auto docs = ingest::load_site(site, rules);
    for (const auto& d : docs) run.input(fs::path(site) / d.rel_path);
    if (!rules_path.empty()) run.config("site_rules", load_config(rules_path, "site rules"));
    const auto result = ingest::ingest_site(docs, rules, site, c.parallelism);
    const fs::path dir(out);
    for (auto& [name, content] : ingest::render_outputs(result)) run.output(dir / name, std::move(content));
    const auto samples = ingest::triplets_to_samples(result.articles);
    run.output(dir / "samples.jsonl", serialize_corpus(samples));
    run.output(dir / "report.json", result.report.to_json().dump(2) + "\n");
    run.manifest_at(dir / "manifest.json");
    run.counts() = result.report.to_json();
    run.counts()["samples"] = samples.size();
    return run.finish();
}

int cmd_distill(const Common& c, const std::string& in, const std::string& out, const std::string& policy_path,
                const std::string& profile, const std::string& rejection_path, const TeacherOptions& teacher_opts,
                const std::string& transcripts_path) {
    Run run("distill", c.dry_run);
    const auto policy = load_policy(policy_path, profile);
    const auto rejection = load_rejection(rejection_path);
    std::map<std::string, std::string> transcripts;
    if (!transcripts_path.empty()) {
        transcripts = as_config("transcripts", [&] {
            return load_config(transcripts_path, "transcripts").get<std::map<std::string, std::string>>();
        });
        run.input(transcripts_path);
    }
    const auto corpus = load_corpus(in);
    run.input(in);
    run.input(rejection_path);
    run.config("policy", policy.to_json());
    run.config("rejection_sha256", file_sha256(rejection_path));
    auto teacher = make_teacher(teacher_opts, run);
    const auto result = distill::run_campaign(corpus, policy, rejection, *teacher, transcripts, c.parallelism);
    if (!result.report.conserved()) throw DataError("campaign report does not conserve item counts");
    if (result.report.total > 0 && result.report.errored == result.report.total) {
        throw AdapterError("teacher failed on every item");
    }
    run.output(out, serialize_corpus(result.accepted));
    run.output(out + ".report.json", distill::report_to_json(result.report).dump(2) + "\n");
    auto report = distill::report_to_json(result.report);
    report.erase("per_item_logs");
    run.counts() = report;
    return run.finish();
}

int cmd_repair(const Common& c, const std::string& in, const std::string& out, const std::string& policy_path,
               const std::string& profile, const std::string& rejection_path, const TeacherOptions& teacher_opts) {
    Run run("repair", c.dry_run);
    const auto policy = load_policy(policy_path, profile);
    const auto rejection = load_rejection(rejection_path);
    const auto corpus = load_corpus(in);
    run.input(in);
    run.input(rejection_path);
    run.config("policy", policy.to_json());
    auto teacher = make_teacher(teacher_opts, run);
    const auto result = distill::run_repair(corpus, policy, rejection, *teacher, c.parallelism);
    if (result.report.flagged > 0 && result.report.errored == result.report.flagged) {
        throw AdapterError("teacher failed on every item");
    }
    run.output(out, serialize_corpus(result.recovered));
    run.output(out + ".report.json", distill::repair_report_to_json(result.report).dump(2) + "\n");
    run.counts() = {{"flagged", result.report.flagged},
                    {"recovered", result.report.recovered},
                    {"unrecovered", result.report.unrecovered},
                    {"errored", result.report.errored}};
    return run.finish();
}

int cmd_filter_check(const std::string& rejection_path, const std::string& in, const std::vector<std::string>& texts) {
    const auto rejection = load_rejection(rejection_path);
    std::size_t rejected = 0;
    std::size_t checked = 0;
    auto report = [&](const std::string& id, const std::string& text) {
        const auto v = distill::check_rejection(text, rejection);
        ++checked;
        if (!v.accepted) ++rejected;
        json line{{"id", id}, {"accepted", v.accepted}};
        if (v.matched_keyword) line["keyword"] = *v.matched_keyword;
        std::cout << line.dump() << "\n";
    };
    for (std::size_t i = 0; i < texts.size(); ++i) report("text-" + std::to_string(i + 1), texts[i]);
    if (!in.empty()) {
        for (const auto& s : load_corpus(in)) report(s.id, s.think.value_or("") + "\n" + s.solution.value_or(""));
    }
    std::cout << json{{"checked", checked}, {"rejected", rejected}, {"keywords", rejection.keywords().size()}}.dump()
              << std::endl;
    return 0;
}

int cmd_compose(const Common& c, const std::string& config_name, const std::string& in, const std::string& out) {
    const auto config = as_config("syntax config", [&] { return syntax::SyntaxConfig::parse(config_name); });
    Run run("compose", c.dry_run);
    const auto corpus = load_corpus(in);
    run.input(in);
    run.config("syntax", config.name());
    const auto result = syntax::render_dataset(corpus, config);
    run.output(out, to_jsonl(result.records, syntax::record_to_json));
    json skips = json::array();
    for (const auto& s : result.skips) skips.push_back({{"id", s.sample_id}, {"reason", s.reason}});
    run.counts() = {{"input", corpus.size()}, {"records", result.records.size()}, {"skipped", result.skips.size()}};
    return run.finish({{"skips", skips}});
}

int cmd_parse(const Common& c, const std::string& in, const std::string& out, bool lenient) {
    Run run("parse", c.dry_run);
    const auto records = load_records(in);
    run.input(in);
    run.config("lenient", lenient);
    std::string lines;
    for (const auto& r : records) {
        syntax::ComponentMap parts;
        try {
            parts = lenient ? syntax::parse_lenient(r.text) : syntax::parse(r.text);
        } catch (const syntax::ParseError& e) {
            throw DataError("record " + r.sample_id + ": " + e.what());
        }
        json comps = json::object();
        for (const auto& [comp, body] : parts) comps[std::string(syntax::tag_name(comp))] = body;
        lines += json{{"sample_id", r.sample_id}, {"config", r.config}, {"components", comps}}.dump() + "\n";
    }
    if (!out.empty()) run.output(out, lines);
    else std::cout << lines;
    run.counts() = {{"records", records.size()}};
    return run.finish();
}

int cmd_mix(const Common& c, const std::string& sources, std::uint64_t seed, const std::map<SourceTag, std::string>& paths,
            bool no_dedupe, bool no_video, const std::string& out) {
    mix::MixSpec spec;
    spec.sources = as_config("sources", [&] { return mix::MixSpec::parse_sources(sources); });
    spec.seed = seed;
    spec.dedupe = !no_dedupe;
    spec.mr_filter = no_video ? mix::MrFilter::PrimaryPhaseOnly : mix::MrFilter::None;
    Run run("mix", c.dry_run);
    run.seed(seed);
    run.config("mix", spec.to_json());
    std::map<SourceTag, Corpus> corpora;
    for (auto tag : spec.sources) {
        const auto it = paths.find(tag);
        if (it == paths.end() || it->second.empty()) {
            throw ConfigError("source " + std::string(to_string(tag)) + " selected but no corpus path given");
        }
        corpora[tag] = load_corpus(it->second);
        run.input(it->second);
    }
    const auto result = mix::mix(corpora, spec);
    run.output(out, serialize_corpus(result.samples));
    run.counts() = result.manifest.to_json();
    run.counts()["total"] = result.samples.size();
    return run.finish();
}

int cmd_split(const Common& c, const std::string& in, std::size_t holdout, std::uint64_t seed, const std::string& stratify,
              const std::string& train, const std::string& test) {
    mix::SplitSpec spec;
    spec.holdout_count = holdout;
    spec.seed = seed;
    if (stratify == "topic") spec.stratify_by = mix::Stratify::Topic;
    else if (stratify != "none") throw ConfigError("--stratify must be 'topic' or 'none'");
    Run run("split", c.dry_run);
    run.seed(seed);
    run.config("split", {{"holdout", holdout}, {"stratify", stratify}, {"seed", seed}});
    const auto corpus = load_corpus(in);
    run.input(in);
    const auto result = mix::split_holdout(corpus, spec);
    run.output(train, serialize_corpus(result.train));
    run.output(test, serialize_corpus(result.test));
    run.counts() = {{"input", corpus.size()}, {"train", result.train.size()}, {"test", result.test.size()},
                    {"test_per_topic", result.test_per_topic}};
    return run.finish();
}

int cmd_mask(const Common& c, const std::string& in, const std::string& out, std::uint64_t seed, double ratio,
             const std::string& rounding, std::uint64_t epoch, const std::string& tokenizer_id) {
    mix::MaskPlan plan;
    plan.ratio = ratio;
    plan.seed = seed;
    plan.epoch = epoch;
    if (rounding == "floor") plan.rounding = mix::Rounding::Floor;
    else if (rounding != "round") throw ConfigError("--rounding must be 'round' or 'floor'");
    const auto tokenizer = as_config("tokenizer", [&] { return make_tokenizer(tokenizer_id); });
    Run run("mask", c.dry_run);
    run.seed(seed);
    run.config("mask", {{"ratio", ratio}, {"rounding", rounding}, {"epoch", epoch}, {"tokenizer", tokenizer_id}});
    const auto records = load_records(in);
    run.input(in);
    const auto masked = mix::mask_completions(records, plan, *tokenizer);
    std::size_t completion = 0, chosen = 0;
    for (const auto& m : masked) {
        completion += m.completion_tokens;
        chosen += m.mask_indices.size();
    }
    run.output(out, to_jsonl(masked, mix::masked_to_json));
    run.counts() = {{"records", masked.size()}, {"completion_tokens", completion}, {"masked_tokens", chosen},
                    {"mask_rate", completion == 0 ? 0.0 : static_cast<double>(chosen) / static_cast<double>(completion)}};
    return run.finish();
}

struct EvalArgs {
    std::string bench;
    std::string model_script;
    std::string endpoint;
    bool echo_gold = false;
    std::string out;
    std::string responses;
    int max_retries = 2;
    std::string developer, model, type = "Open";
};

int cmd_eval(const Common& c, const EvalArgs& a) {
    Run run("eval", c.dry_run);
    const auto bench = load_corpus(a.bench);
    run.input(a.bench);
    std::unique_ptr<ModelAdapter> adapter;
    const int chosen = static_cast<int>(!a.model_script.empty()) + static_cast<int>(!a.endpoint.empty()) +
                       static_cast<int>(a.echo_gold);
    if (chosen != 1) throw ConfigError("give exactly one of --model-script, --endpoint or --echo-gold");
    if (!a.model_script.empty()) {
        adapter = std::make_unique<ScriptedModel>(load_config(a.model_script, "model script"));
        run.input(a.model_script);
    } else if (a.echo_gold) {
        adapter = std::make_unique<ScriptedModel>(ScriptedModel::echo_gold(bench));
    } else {
        adapter = std::make_unique<HttpModel>(
            as_config("endpoint", [&] { return EndpointConfig::from_json(load_config(a.endpoint, "endpoint")); }));
    }
    run.config("model", adapter->describe());
    eval::EvalOptions opts;
    opts.max_retries = a.max_retries;
    opts.parallelism = c.parallelism;
    if (!a.model.empty()) opts.row_label = eval::LeaderboardRow{a.developer, a.model, a.type, 0.0};
    const auto result = eval::evaluate(bench, *adapter, opts);
    const auto& verdicts = result.report.verdicts;
    if (!verdicts.empty() &&
        std::all_of(verdicts.begin(), verdicts.end(), [](const eval::EvalVerdict& v) { return !v.error.empty(); })) {
        throw AdapterError("model failed on every item: " + verdicts.front().error);
    }
    run.output(a.out, eval::report_to_json(result.report).dump(2) + "\n");
    if (!a.responses.empty()) {
        std::string lines;
        for (std::size_t i = 0; i < result.responses.size(); ++i) {
            lines += json{{"item_id", result.report.verdicts[i].item_id}, {"response", result.responses[i]}}.dump() + "\n";
        }
        run.output(a.responses, lines);
    }
    run.counts() = {{"total", result.report.total},
                    {"correct", result.report.correct},
                    {"unanswered", result.report.unanswered},
                    {"accuracy", result.report.accuracy()},
                    {"accuracy_text", format_percent(result.report.accuracy())}};
    return run.finish();
}

int cmd_leaderboard(const Common& c, const std::vector<std::string>& reports, bool no_reference, const std::string& format,
                    const std::string& out) {
    std::vector<eval::LeaderboardRow> rows;
    if (!no_reference) rows = eval::reference_leaderboard();
    Run run("leaderboard", c.dry_run);
    for (const auto& path : reports) {
        const auto report = eval::report_from_json(load_config(path, "eval report"));
        run.input(path);
        if (report.leaderboard_rows.empty()) throw DataError("report " + path + " carries no leaderboard row label");
        rows.insert(rows.end(), report.leaderboard_rows.begin(), report.leaderboard_rows.end());
    }
    const auto board = eval::render_leaderboard(rows);
    std::string rendered;
    if (format == "markdown") rendered = board.markdown;
    else if (format == "json") rendered = board.to_json().dump(2) + "\n";
    else throw ConfigError("--format must be 'markdown' or 'json'");
    run.counts() = {{"rows", board.rows.size()}};
    if (out.empty()) {
        std::cout << rendered;
        return 0;
    }
    run.output(out, rendered);
    return run.finish();
}

struct FlagArgs {
    std::string in, out, merge, report, rejection, criteria;
    std::optional<std::size_t> lowest_topics;
    bool filter_reject = false, repair_outputs = false;
    std::vector<std::string> manual;
};

int cmd_flag(const Common& c, const FlagArgs& a) {
    Run run("flag", c.dry_run);
    review::FlagCriteria criteria;
    if (!a.criteria.empty()) {
        criteria = as_config("flag criteria", [&] { return review::FlagCriteria::from_json(load_config(a.criteria, "flag criteria")); });
    }
    if (a.lowest_topics) criteria.lowest_topics = a.lowest_topics;
    criteria.filter_reject |= a.filter_reject;
    criteria.repair_outputs |= a.repair_outputs;
    criteria.manual_ids.insert(criteria.manual_ids.end(), a.manual.begin(), a.manual.end());
    const auto corpus = load_corpus(a.in);
    run.input(a.in);
    std::optional<eval::EvalReport> report;
    std::optional<distill::RejectionList> rejection;
    review::FlagSignals signals;
    if (!a.report.empty()) {
        report = eval::report_from_json(load_config(a.report, "eval report"));
        run.input(a.report);
        signals.report = &*report;
    }
    if (!a.rejection.empty()) {
        rejection = load_rejection(a.rejection);
        run.input(a.rejection);
        signals.rejection = &*rejection;
    }
    if ((criteria.lowest_topics && !signals.report) || (criteria.filter_reject && !signals.rejection)) {
        throw ConfigError("flag criterion references a signal that was not supplied (--report / --rejection)");
    }
    review::Queue existing;
    if (!a.merge.empty()) {
        require_file(a.merge, "queue");
        existing = review::read_queue(a.merge);
        run.input(a.merge);
    }
    json cj{{"filter_reject", criteria.filter_reject}, {"repair_outputs", criteria.repair_outputs},
            {"manual_ids", criteria.manual_ids}};
    if (criteria.lowest_topics) cj["lowest_topics"] = *criteria.lowest_topics;
    run.config("criteria", cj);
    const auto queue = review::flag_samples(corpus, signals, criteria, std::move(existing));
    std::string lines;
    std::map<std::string, std::size_t> per_flag;
    for (const auto& [id, item] : queue) {
        lines += review::item_to_json(item).dump() + "\n";
        for (auto f : item.flags) ++per_flag[std::string(review::to_string(f))];
    }
    run.output(a.out, lines);
    run.counts() = {{"corpus", corpus.size()}, {"queued", queue.size()}, {"per_flag", per_flag}};
    return run.finish();
}

review::Queue initial_queue(const std::string& path) {
    if (path.empty()) return {};
    require_file(path, "queue");
    return review::read_queue(path);
}

int cmd_serve(const std::string& queue_path, const std::string& base_path, const std::string& state,
              const std::string& config_path, const std::string& host, int port, std::size_t snapshot_every) {
    auto config = config_path.empty()
                      ? review::ServerConfig{}
                      : as_config("server config", [&] { return review::ServerConfig::from_json(load_config(config_path, "server config")); });
    if (!host.empty()) config.host = host;
    if (port >= 0) config.port = port;
    if (config.tokens.empty()) throw ConfigError("server config maps no bearer tokens to reviewers");
    const auto base = base_path.empty() ? Corpus{} : load_corpus(base_path);

    // Signals are taken by a dedicated thread so shutdown is a plain stop().
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    review::ReviewStore store(state, initial_queue(queue_path), snapshot_every);
    review::ReviewServer server(store, base, config);
    int bound = config.port;
    if (config.port == 0) {
        bound = server.bind_any();
        if (bound < 0) throw ConfigError("cannot bind " + config.host);
    }
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
    });
    waiter.detach();
    std::thread announce([&] {
        server.wait_until_ready();
        std::cout << json{{"listening", {{"host", config.host}, {"port", bound}}},
                          {"items", store.view()->size()},
                          {"seq", store.sequence()}}
                         .dump()
                  << std::endl;
    });
    bool ok = true;
    if (config.port == 0) server.listen_after_bind();
    else ok = server.listen();
    announce.join();
    if (!ok) throw ConfigError("cannot listen on " + config.host + ":" + std::to_string(config.port));
    return 0;
}

int cmd_export(const Common& c, const std::string& queue_path, const std::string& state, const std::string& base_path,
               const std::string& out) {
    Run run("export-reviewed", c.dry_run);
    auto queue = initial_queue(queue_path);
    if (!queue_path.empty()) run.input(queue_path);
    if (!state.empty()) {
        if (!fs::is_directory(state)) throw ConfigError("state directory not found: " + state);
        queue = review::ReviewStore::replay(state, queue);
        run.config("state_dir", state);
    }
    const auto base = load_corpus(base_path);
    run.input(base_path);
    const auto result = review::export_reviewed(queue, base);
    run.output(out, serialize_corpus(result.corpus));
    run.counts() = review::stats_to_json(result.stats);
    run.counts()["base"] = base.size();
    run.counts()["exported"] = result.corpus.size();
    return run.finish();
}

int cmd_stats(const std::vector<std::string>& inputs, const std::string& tokenizer_id) {
    const auto tokenizer = as_config("tokenizer", [&] { return make_tokenizer(tokenizer_id); });
    CorpusStats total;
    json per_file = json::object();
    for (const auto& p : inputs) {
        const auto s = compute_stats(load_corpus(p), *tokenizer);
        per_file[p] = stats_to_json(s);
        total += s;
    }
    std::cout << json{{"tokenizer", tokenizer_id}, {"total", stats_to_json(total)}, {"files", per_file}}.dump(2) << std::endl;
    return 0;
}

int cmd_integrity(const std::string& bench, bool reference, std::optional<std::size_t> items,
                  std::optional<std::size_t> topics, const std::string& image_root) {
    auto expect = reference ? eval::reference_expectations() : eval::IntegrityExpectations{};
    if (items) expect.item_count = items;
    if (topics) expect.topic_count = topics;
    if (!image_root.empty()) expect.image_root = image_root;
    const auto report = eval::benchmark_integrity_check(load_corpus(bench), expect);
    std::cout << report.to_json().dump(2) << std::endl;
    return report.passed() ? 0 : 3;
}

int fail(const std::string& kind, const std::string& message, int code) {
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << std::endl;
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Curriculum reasoning corpus pipeline"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub, bool mutating) {
        sub->add_option("--parallelism", common.parallelism, "Worker bound")->check(CLI::PositiveNumber);
        if (mutating) sub->add_flag("--dry-run", common.dry_run, "Report intended writes without writing");
    };

    std::string in, out, policy, profile = "core_reason", rejection, transcripts, rules, site, config_name, sources,
                                 stratify = "topic", train, test, rounding = "round", tokenizer = "whitespace",
                                 format = "markdown", state, base, server_config, host, queue;
    TeacherOptions teacher;
    std::uint64_t seed = 0, epoch = 0;
    std::size_t holdout = 0, snapshot_every = 16;
    double ratio = 0.2;
    bool lenient = false, no_dedupe = false, no_video = false, no_reference = false, reference = false;
    int port = -1;
    std::vector<std::string> texts, reports, inputs;
    std::map<SourceTag, std::string> mix_paths;
    EvalArgs eval_args;
    FlagArgs flag_args;
    std::optional<std::size_t> items, topics;

    auto* ingest = app.add_subcommand("ingest", "Convert a crawled site into articles, image contexts and triplets");
    ingest->add_option("--site", site, "Site directory")->required();
    ingest->add_option("--rules", rules, "Site rules JSON");
    ingest->add_option("--out", out, "Output directory")->required();
    add_common(ingest, true);

    auto add_teacher = [&](CLI::App* sub) {
        sub->add_option("--teacher-script", teacher.script, "Scripted teacher JSON");
        sub->add_option("--endpoint", teacher.endpoint, "Chat-completions endpoint JSON");
        sub->add_option("--policy", policy, "Distillation policy JSON");
        sub->add_option("--profile", profile, "core_reason | meta_reason (when no --policy)");
        sub->add_option("--rejection", rejection, "Rejection keyword file")->required();
    };
    auto* distill = app.add_subcommand("distill", "Generate and filter teacher solutions");
    distill->add_option("--in", in, "Input corpus")->required();
    distill->add_option("--out", out, "Accepted corpus")->required();
    distill->add_option("--transcripts", transcripts, "JSON object of item id to transcript");
    add_teacher(distill);
    add_common(distill, true);

    auto* repair = app.add_subcommand("repair", "Regenerate flagged items until the answer matches gold");
    repair->add_option("--in", in, "Flagged corpus")->required();
    repair->add_option("--out", out, "Recovered corpus")->required();
    add_teacher(repair);
    add_common(repair, true);

    auto* filter_check = app.add_subcommand("filter-check", "Screen text or a corpus with the rejection filter");
    filter_check->add_option("--rejection", rejection, "Rejection keyword file")->required();
    filter_check->add_option("--in", in, "Corpus to screen (think + solution)");
    filter_check->add_option("--text", texts, "Literal text to screen");

    auto* compose = app.add_subcommand("compose", "Render a corpus into tagged training text");
    compose->add_option("--config", config_name, "Syntax config, e.g. QMSA")->required();
    compose->add_option("--in", in, "Input corpus")->required();
    compose->add_option("--out", out, "Rendered records")->required();
    add_common(compose, true);

    auto* parse = app.add_subcommand("parse", "Parse rendered records back into components");
    parse->add_option("--in", in, "Rendered records")->required();
    parse->add_option("--out", out, "Parsed components (stdout when omitted)");
    parse->add_flag("--lenient", lenient, "Recover from malformed tags");
    add_common(parse, true);

    auto* mixc = app.add_subcommand("mix", "Union, dedupe and shuffle source corpora");
    mixc->add_option("--sources", sources, "CR,MR,CV subset")->required();
    mixc->add_option("--seed", seed, "Shuffle seed")->required();
    mixc->add_option("--cr", mix_paths[SourceTag::CR], "CoreReason corpus");
    mixc->add_option("--mr", mix_paths[SourceTag::MR], "MetaReason corpus");
    mixc->add_option("--cv", mix_paths[SourceTag::CV], "ContextVQA corpus");
    mixc->add_flag("--no-dedupe", no_dedupe, "Keep duplicate questions");
    mixc->add_flag("--no-video", no_video, "Keep only MR items accepted without the transcript fallback");
    mixc->add_option("--out", out, "Mixed corpus")->required();
    add_common(mixc, true);

    auto* split = app.add_subcommand("split", "Seeded train / holdout partition");
    split->add_option("--in", in, "Input corpus")->required();
    split->add_option("--holdout", holdout, "Holdout size")->required();
    split->add_option("--seed", seed, "Split seed")->required();
    split->add_option("--stratify", stratify, "topic | none");
    split->add_option("--train", train, "Train output")->required();
    split->add_option("--test", test, "Holdout output")->required();
    add_common(split, true);

    auto* mask = app.add_subcommand("mask", "Choose completion tokens to mask");
    mask->add_option("--in", in, "Rendered records")->required();
    mask->add_option("--out", out, "Masked records")->required();
    mask->add_option("--seed", seed, "Mask seed")->required();
    mask->add_option("--ratio", ratio, "Masked fraction of completion tokens")->check(CLI::Range(0.0, 1.0));
    mask->add_option("--rounding", rounding, "round | floor");
    mask->add_option("--epoch", epoch, "Epoch index");
    mask->add_option("--tokenizer", tokenizer, "whitespace | byte");
    add_common(mask, true);

    auto* evalc = app.add_subcommand("eval", "Score a model on a keyed multiple-choice benchmark");
    evalc->add_option("--bench", eval_args.bench, "Benchmark corpus")->required();
    evalc->add_option("--model-script", eval_args.model_script, "Scripted model JSON");
    evalc->add_option("--endpoint", eval_args.endpoint, "Chat-completions endpoint JSON");
    evalc->add_flag("--echo-gold", eval_args.echo_gold, "Answer every item with its gold letter");
    evalc->add_option("--out", eval_args.out, "Report JSON")->required();
    evalc->add_option("--responses", eval_args.responses, "Raw responses JSONL");
    evalc->add_option("--max-retries", eval_args.max_retries, "Retries per item");
    evalc->add_option("--developer", eval_args.developer, "Leaderboard developer");
    evalc->add_option("--model", eval_args.model, "Leaderboard model name");
    evalc->add_option("--type", eval_args.type, "Leaderboard model type");
    add_common(evalc, true);

    auto* board = app.add_subcommand("leaderboard", "Render the accuracy leaderboard");
    board->add_option("--report", reports, "Eval report with a row label");
    board->add_flag("--no-reference", no_reference, "Omit the published reference rows");
    board->add_option("--format", format, "markdown | json");
    board->add_option("--out", out, "Output file (stdout when omitted)");
    add_common(board, true);

    auto* flag = app.add_subcommand("flag", "Queue suspect samples for review");
    flag->add_option("--in", flag_args.in, "Corpus")->required();
    flag->add_option("--out", flag_args.out, "Queue JSONL")->required();
    flag->add_option("--merge", flag_args.merge, "Existing queue to merge into");
    flag->add_option("--report", flag_args.report, "Eval report for topic ranking");
    flag->add_option("--rejection", flag_args.rejection, "Rejection keyword file");
    flag->add_option("--criteria", flag_args.criteria, "Criteria JSON");
    flag->add_option("--lowest-topics", flag_args.lowest_topics, "Flag the k lowest-accuracy topics");
    flag->add_flag("--filter-reject", flag_args.filter_reject, "Flag samples the filter rejects");
    flag->add_flag("--repair-outputs", flag_args.repair_outputs, "Flag repair-phase samples");
    flag->add_option("--manual", flag_args.manual, "Sample ids to flag")->delimiter(',');
    add_common(flag, true);

    auto* serve = app.add_subcommand("serve", "Run the review service");
    serve->add_option("--queue", queue, "Initial queue JSONL (used when the state dir is empty)");
    serve->add_option("--base", base, "Base corpus for /api/export");
    serve->add_option("--state", state, "State directory (journal + snapshot)")->required();
    serve->add_option("--config", server_config, "Server config JSON");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 picks a free one)");
    serve->add_option("--snapshot-every", snapshot_every, "Decisions between snapshots")->check(CLI::PositiveNumber);

    auto* exportc = app.add_subcommand("export-reviewed", "Apply review decisions to the base corpus");
    exportc->add_option("--queue", queue, "Queue JSONL");
    exportc->add_option("--state", state, "Review state directory");
    exportc->add_option("--base", base, "Base corpus")->required();
    exportc->add_option("--out", out, "Corrected corpus")->required();
    add_common(exportc, true);

    auto* stats = app.add_subcommand("stats", "Item, token, source and topic counts");
    stats->add_option("--in", inputs, "Corpus files")->required();
    stats->add_option("--tokenizer", tokenizer, "whitespace | byte");

    auto* integrity = app.add_subcommand("integrity", "Check a benchmark's structure");
    integrity->add_option("--bench", in, "Benchmark corpus")->required();
    integrity->add_flag("--reference", reference, "Expect the published item and topic counts");
    integrity->add_option("--items", items, "Expected item count");
    integrity->add_option("--topics", topics, "Expected topic count");
    integrity->add_option("--image-root", rules, "Resolve image refs against this directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        if (*ingest) return cmd_ingest(common, site, rules, out);
        if (*distill) return cmd_distill(common, in, out, policy, profile, rejection, teacher, transcripts);
        if (*repair) return cmd_repair(common, in, out, policy, profile, rejection, teacher);
        if (*filter_check) return cmd_filter_check(rejection, in, texts);
        if (*compose) return cmd_compose(common, config_name, in, out);
        if (*parse) return cmd_parse(common, in, out, lenient);
        if (*mixc) return cmd_mix(common, sources, seed, mix_paths, no_dedupe, no_video, out);
        if (*split) return cmd_split(common, in, holdout, seed, stratify, train, test);
        if (*mask) return cmd_mask(common, in, out, seed, ratio, rounding, epoch, tokenizer);
        if (*evalc) return cmd_eval(common, eval_args);
        if (*board) return cmd_leaderboard(common, reports, no_reference, format, out);
        if (*flag) return cmd_flag(common, flag_args);
        if (*serve) return cmd_serve(queue, base, state, server_config, host, port, snapshot_every);
        if (*exportc) return cmd_export(common, queue, state, base, out);
        if (*stats) return cmd_stats(inputs, tokenizer);
        if (*integrity) return cmd_integrity(in, reference, items, topics, rules);
    } catch (const ConfigError& e) {
        return fail("config", e.what(), 2);
    } catch (const syntax::SyntaxError& e) {
        return fail("config", e.what(), 2);
    } catch (const AdapterError& e) {
        return fail("adapter", e.what(), 4);
    } catch (const CorpusError& e) {
        return fail("data", e.what(), 3);
    } catch (const DataError& e) {
        return fail("data", e.what(), 3);
    } catch (const review::ReviewError& e) {
        return fail("data", e.what(), 3);
    } catch (const json::exception& e) {
        return fail("data", e.what(), 3);
    } catch (const std::invalid_argument& e) {
        return fail("data", e.what(), 3);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
    return 0;
}
