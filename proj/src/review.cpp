#include "edusft/review.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <set>

#include "edusft/digest.hpp"
#include "edusft/text.hpp"

namespace edusft::review {

namespace {

constexpr std::string_view kStatusNames[] = {"pending", "accepted", "edited", "discarded"};
constexpr std::string_view kFlagNames[] = {"filter_reject", "low_topic_accuracy", "repair_output", "manual"};
constexpr std::string_view kActionNames[] = {"accept", "edit", "discard"};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::string_view (&names)[N], std::string_view s) {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == s) return static_cast<E>(i);
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(Status s) { return kStatusNames[static_cast<int>(s)]; }
std::optional<Status> parse_status(std::string_view s) { return lookup<Status>(kStatusNames, s); }
std::string_view to_string(FlagReason f) { return kFlagNames[static_cast<int>(f)]; }
std::optional<FlagReason> parse_flag(std::string_view s) { return lookup<FlagReason>(kFlagNames, s); }

json item_to_json(const ReviewItem& item) {
    json flags = json::array();
    for (auto f : item.flags) flags.push_back(to_string(f));
    json log = json::array();
    for (const auto& e : item.log) {
        log.push_back({{"timestamp", e.timestamp}, {"reviewer_id", e.reviewer_id}, {"action", e.action}, {"diff", e.diff}});
    }
    json j{{"id", item.id()},
           {"status", to_string(item.status)},
           {"version", item.version},
           {"flags", std::move(flags)},
           {"sample", sample_to_json(item.sample)}};
    if (item.working) j["working"] = sample_to_json(*item.working);
    j["log"] = std::move(log);
    return j;
}

ReviewItem item_from_json(const json& j) {
    ReviewItem item;
    item.sample = sample_from_json(j.at("sample"), ReadMode::Lenient);
    if (j.contains("working")) item.working = sample_from_json(j.at("working"), ReadMode::Lenient);
    for (const auto& f : j.value("flags", json::array())) {
        const auto flag = parse_flag(f.get<std::string>());
        if (!flag) throw std::invalid_argument("unknown flag reason '" + f.get<std::string>() + "'");
        item.flags.push_back(*flag);
    }
    std::sort(item.flags.begin(), item.flags.end());
    item.flags.erase(std::unique(item.flags.begin(), item.flags.end()), item.flags.end());
    const auto status = parse_status(j.value("status", "pending"));
    if (!status) throw std::invalid_argument("unknown status in review item " + item.id());
    item.status = *status;
    item.version = j.value("version", std::uint64_t{0});
    for (const auto& e : j.value("log", json::array())) {
        item.log.push_back({e.at("timestamp").get<std::string>(), e.at("reviewer_id").get<std::string>(),
                            e.at("action").get<std::string>(), e.value("diff", json::object())});
    }
    return item;
}

json queue_to_json(const Queue& queue) {
    json items = json::array();
    for (const auto& [id, item] : queue) items.push_back(item_to_json(item));
    return items;
}

Queue queue_from_json(const json& j) {
    Queue q;
    for (const auto& e : j) {
        auto item = item_from_json(e);
        const auto id = item.id();
        if (!q.emplace(id, std::move(item)).second) throw std::invalid_argument("duplicate review item " + id);
    }
    return q;
}

Queue read_queue(const std::filesystem::path& path) {
    Queue q;
    std::size_t line_no = 0;
    const auto content = read_file(path);
    for (auto line : text::split_lines(content)) {
        ++line_no;
        if (text::is_blank(line)) continue;
        try {
            auto item = item_from_json(json::parse(line));
            const auto id = item.id();
            if (!q.emplace(id, std::move(item)).second) throw std::invalid_argument("duplicate review item " + id);
        } catch (const std::exception& e) {
            throw CorpusError(line_no, "queue", e.what());
        }
    }
    return q;
}

void write_queue(const Queue& queue, const std::filesystem::path& path) {
    std::string out;
    for (const auto& [id, item] : queue) out += item_to_json(item).dump() + "\n";
    write_file_atomic(path, out);
}

json stats_to_json(const ReviewQueueStats& s) {
    return json{{"pending", s.pending},
                {"accepted", s.accepted},
                {"edited", s.edited},
                {"discarded", s.discarded},
                {"total", s.total()}};
}

ReviewQueueStats queue_stats(const Queue& queue) {
    ReviewQueueStats s;
    for (const auto& [id, item] : queue) {
        switch (item.status) {
            case Status::Pending: ++s.pending; break;
            case Status::Accepted: ++s.accepted; break;
            case Status::Edited: ++s.edited; break;
            case Status::Discarded: ++s.discarded; break;
        }
    }
    return s;
}

// --- flagging ---------------------------------------------------------------

FlagCriteria FlagCriteria::from_json(const json& j) {
    FlagCriteria c;
    if (j.contains("lowest_topics")) c.lowest_topics = j.at("lowest_topics").get<std::size_t>();
    c.filter_reject = j.value("filter_reject", false);
    c.repair_outputs = j.value("repair_outputs", false);
    if (j.contains("manual_ids")) c.manual_ids = j.at("manual_ids").get<std::vector<std::string>>();
    for (const auto& [key, value] : j.items()) {
        if (key != "lowest_topics" && key != "filter_reject" && key != "repair_outputs" && key != "manual_ids") {
            throw std::invalid_argument("unknown flag criterion '" + key + "'");
        }
    }
    return c;
}

Queue flag_samples(const Corpus& corpus, const FlagSignals& signals, const FlagCriteria& criteria, Queue queue) {
    if (criteria.lowest_topics && !signals.report) {
        throw ReviewError(ReviewError::Kind::MissingSignal, "lowest_topics criterion needs an eval report");
    }
    if (criteria.filter_reject && !signals.rejection) {
        throw ReviewError(ReviewError::Kind::MissingSignal, "filter_reject criterion needs a rejection list");
    }
    std::set<std::string> low_topics;
    if (criteria.lowest_topics && *criteria.lowest_topics > 0) {
        const auto k = std::min(*criteria.lowest_topics, signals.report->per_topic.size());
        for (const auto& t : eval::rank_topics(*signals.report, k)) low_topics.insert(t.topic_id);
    }
    std::set<std::string> manual(criteria.manual_ids.begin(), criteria.manual_ids.end());
    for (const auto& id : manual) {
        if (std::none_of(corpus.begin(), corpus.end(), [&](const Sample& s) { return s.id == id; })) {
            throw ReviewError(ReviewError::Kind::NotFound, "manual flag references unknown id " + id);
        }
    }

    for (const auto& s : corpus) {
        std::vector<FlagReason> reasons;
        if (criteria.filter_reject) {
            const auto text = s.think.value_or("") + "\n" + s.solution.value_or("");
            if (!distill::check_rejection(text, *signals.rejection).accepted) reasons.push_back(FlagReason::FilterReject);
        }
        if (!low_topics.empty() && s.meta && low_topics.contains(s.meta->topic_id)) {
            reasons.push_back(FlagReason::LowTopicAccuracy);
        }
        if (criteria.repair_outputs) {
            const auto* d = s.provenance.contains("distill") ? &s.provenance.at("distill") : nullptr;
            if (d && d->is_object() && d->value("phase", "") == "repair") reasons.push_back(FlagReason::RepairOutput);
        }
        if (manual.contains(s.id)) reasons.push_back(FlagReason::Manual);
        if (reasons.empty()) continue;

        auto [it, inserted] = queue.try_emplace(s.id);
        if (inserted) it->second.sample = s;
        auto& flags = it->second.flags;
        flags.insert(flags.end(), reasons.begin(), reasons.end());
        std::sort(flags.begin(), flags.end());
        flags.erase(std::unique(flags.begin(), flags.end()), flags.end());
    }
    return queue;
}

// --- decisions --------------------------------------------------------------

Action Action::from_json(const std::string& action, const json& payload) {
    Action a;
    if (action == "accept") {
        a.kind = Kind::Accept;
    } else if (action == "discard") {
        a.kind = Kind::Discard;
    } else if (action == "edit") {
        a.kind = Kind::Edit;
        if (!payload.is_object()) throw ReviewError(ReviewError::Kind::Validation, "edit needs a payload object");
        if (payload.contains("solution")) {
            if (!payload.at("solution").is_string()) throw ReviewError(ReviewError::Kind::Validation, "solution must be a string");
            a.new_solution = payload.at("solution").get<std::string>();
        }
        if (payload.contains("answer") && !payload.at("answer").is_null()) {
            if (!payload.at("answer").is_string()) throw ReviewError(ReviewError::Kind::Validation, "answer must be a string");
            a.new_answer = payload.at("answer").get<std::string>();
        }
        if (!a.new_solution && !a.new_answer) {
            throw ReviewError(ReviewError::Kind::Validation, "edit changes neither solution nor answer");
        }
    } else {
        throw ReviewError(ReviewError::Kind::Validation, "unknown action '" + action + "'");
    }
    return a;
}

json event_to_json(const DecisionEvent& e) {
    json j{{"seq", e.seq},
           {"item_id", e.item_id},
           {"version", e.version},
           {"reviewer_id", e.reviewer_id},
           {"timestamp", e.timestamp},
           {"action", kActionNames[static_cast<int>(e.action.kind)]}};
    if (e.action.kind == Action::Kind::Edit) {
        json p = json::object();
        if (e.action.new_solution) p["solution"] = *e.action.new_solution;
        if (e.action.new_answer) p["answer"] = *e.action.new_answer;
        j["payload"] = std::move(p);
    }
    return j;
}

DecisionEvent event_from_json(const json& j) {
    DecisionEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.item_id = j.at("item_id").get<std::string>();
    e.version = j.at("version").get<std::uint64_t>();
    e.reviewer_id = j.at("reviewer_id").get<std::string>();
    e.timestamp = j.at("timestamp").get<std::string>();
    e.action = Action::from_json(j.at("action").get<std::string>(), j.value("payload", json::object()));
    return e;
}

void apply_decision(Queue& queue, const DecisionEvent& event) {
    const auto it = queue.find(event.item_id);
    if (it == queue.end()) throw ReviewError(ReviewError::Kind::NotFound, "no review item " + event.item_id);
    auto& item = it->second;
    if (item.status != Status::Pending) {
        throw ReviewError(ReviewError::Kind::Conflict,
                          "item " + event.item_id + " already " + std::string(to_string(item.status)));
    }
    if (item.version != event.version) {
        throw ReviewError(ReviewError::Kind::Conflict, "item " + event.item_id + " is at version " +
                                                           std::to_string(item.version) + ", not " +
                                                           std::to_string(event.version));
    }
    DecisionEntry entry{event.timestamp, event.reviewer_id,
                        std::string(kActionNames[static_cast<int>(event.action.kind)]), json::object()};
    std::optional<Sample> working;
    Status next = Status::Accepted;
    if (event.action.kind == Action::Kind::Discard) {
        next = Status::Discarded;
    } else if (event.action.kind == Action::Kind::Edit) {
        next = Status::Edited;
        Sample w = item.sample;
        if (event.action.new_solution) {
            if (text::is_blank(*event.action.new_solution)) {
                throw ReviewError(ReviewError::Kind::Validation, "edited solution is empty");
            }
            entry.diff["solution"] = {{"before", item.sample.solution ? json(*item.sample.solution) : json(nullptr)},
                                      {"after", *event.action.new_solution}};
            w.solution = event.action.new_solution;
        }
        if (event.action.new_answer) {
            if (!is_option_letter(*event.action.new_answer)) {
                throw ReviewError(ReviewError::Kind::Validation, "answer must be one of A-E");
            }
            entry.diff["answer"] = {{"before", item.sample.gold_answer ? json(*item.sample.gold_answer) : json(nullptr)},
                                    {"after", *event.action.new_answer}};
            w.gold_answer = event.action.new_answer;
        }
        const auto report = validate_sample(w);
        if (!report.ok()) {
            throw ReviewError(ReviewError::Kind::Validation,
                              "edited sample fails " + report.violations.front().rule_id + ": " +
                                  report.violations.front().message);
        }
        working = std::move(w);
    }
    item.status = next;
    item.working = std::move(working);
    item.log.push_back(std::move(entry));
    ++item.version;
}

// --- export -----------------------------------------------------------------

ExportResult export_reviewed(const Queue& queue, const Corpus& base) {
    ExportResult out;
    out.stats = queue_stats(queue);
    for (const auto& s : base) {
        const auto it = queue.find(s.id);
        if (it == queue.end()) {
            out.corpus.push_back(s);
            continue;
        }
        const auto& item = it->second;
        if (item.status == Status::Discarded) continue;
        Sample copy = item.status == Status::Edited && item.working ? *item.working : s;
        json r{{"status", to_string(item.status)}};
        json flags = json::array();
        for (auto f : item.flags) flags.push_back(to_string(f));
        r["flags"] = std::move(flags);
        if (!item.log.empty()) r["reviewer_id"] = item.log.back().reviewer_id;
        copy.provenance["review"] = std::move(r);
        out.corpus.push_back(std::move(copy));
    }
    return out;
}

// --- durable store ----------------------------------------------------------

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

namespace {

struct Recovered {
    Queue queue;
    std::uint64_t seq = 0;
    std::uintmax_t valid_bytes = 0;  // journal prefix made of complete lines
    std::size_t replayed = 0;
};

Recovered recover(const std::filesystem::path& dir, const Queue& initial) {
    Recovered r;
    const auto snap = dir / "snapshot.json";
    if (std::filesystem::exists(snap)) {
        const auto j = json::parse(read_file(snap));
        r.seq = j.at("seq").get<std::uint64_t>();
        r.queue = queue_from_json(j.at("items"));
    } else {
        r.queue = initial;
    }
    const auto journal = dir / "journal.jsonl";
    if (!std::filesystem::exists(journal)) return r;
    const auto content = read_file(journal);
    std::size_t pos = 0;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        if (nl == std::string::npos) break;  // torn tail
        const std::string_view line(content.data() + pos, nl - pos);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw std::runtime_error("corrupt journal record at byte " + std::to_string(pos));
        }
        const auto event = event_from_json(j);
        if (event.seq > r.seq) {
            if (event.seq != r.seq + 1) {
                throw std::runtime_error("journal gap: expected seq " + std::to_string(r.seq + 1) + ", found " +
                                         std::to_string(event.seq));
            }
            apply_decision(r.queue, event);
            r.seq = event.seq;
            ++r.replayed;
        }
        pos = nl + 1;
    }
    r.valid_bytes = pos;
    return r;
}

void fsync_dir(const std::filesystem::path& dir) {
    const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
}

}  // namespace

Queue ReviewStore::replay(const std::filesystem::path& dir, const Queue& initial) { return recover(dir, initial).queue; }

ReviewStore::ReviewStore(std::filesystem::path dir, const Queue& initial, std::size_t snapshot_every,
                         std::function<std::string()> clock)
    : dir_(std::move(dir)), snapshot_every_(std::max<std::size_t>(1, snapshot_every)), clock_(std::move(clock)) {
    std::filesystem::create_directories(dir_);
    auto r = recover(dir_, initial);
    const auto journal = dir_ / "journal.jsonl";
    if (std::filesystem::exists(journal) && std::filesystem::file_size(journal) != r.valid_bytes) {
        std::filesystem::resize_file(journal, r.valid_bytes);
    }
    if (!std::filesystem::exists(dir_ / "snapshot.json")) write_snapshot(r.queue, r.seq);
    journal_fd_ = ::open(journal.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (journal_fd_ < 0) throw std::runtime_error("cannot open journal: " + std::string(std::strerror(errno)));
    fsync_dir(dir_);
    seq_ = r.seq;
    since_snapshot_ = r.replayed;
    view_ = std::make_shared<const Queue>(std::move(r.queue));
}

ReviewStore::~ReviewStore() {
    if (journal_fd_ >= 0) ::close(journal_fd_);
}

std::shared_ptr<const Queue> ReviewStore::view() const {
    std::lock_guard lock(view_mutex_);
    return view_;
}

std::uint64_t ReviewStore::sequence() const {
    std::lock_guard lock(view_mutex_);
    return seq_;
}

void ReviewStore::write_snapshot(const Queue& queue, std::uint64_t seq) {
    const json j{{"seq", seq}, {"items", queue_to_json(queue)}};
    write_file_atomic(dir_ / "snapshot.json", j.dump());
}

ReviewItem ReviewStore::decide(const std::string& item_id, const Action& action, const std::string& reviewer_id,
                               std::uint64_t expected_version) {
    std::lock_guard writer(writer_);
    const auto current = view();
    DecisionEvent event{seq_ + 1, item_id, expected_version, reviewer_id, clock_(), action};
    Queue next = *current;
    apply_decision(next, event);

    const auto line = event_to_json(event).dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
        const auto n = ::write(journal_fd_, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw std::runtime_error("journal write failed: " + std::string(std::strerror(errno)));
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(journal_fd_) != 0) throw std::runtime_error("journal fsync failed: " + std::string(std::strerror(errno)));

    ReviewItem updated = next.at(item_id);
    auto published = std::make_shared<const Queue>(std::move(next));
    {
        std::lock_guard lock(view_mutex_);
        view_ = published;
        seq_ = event.seq;
    }
    if (++since_snapshot_ >= snapshot_every_) {
        write_snapshot(*published, event.seq);
        since_snapshot_ = 0;
    }
    return updated;
}

}  // namespace edusft::review
