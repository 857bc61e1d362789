#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "edusft/corpus.hpp"
#include "edusft/distill.hpp"
#include "edusft/evalbench.hpp"

namespace edusft::review {

enum class Status { Pending, Accepted, Edited, Discarded };
enum class FlagReason { FilterReject, LowTopicAccuracy, RepairOutput, Manual };

std::string_view to_string(Status s);
std::optional<Status> parse_status(std::string_view s);
std::string_view to_string(FlagReason f);
std::optional<FlagReason> parse_flag(std::string_view s);

struct DecisionEntry {
    std::string timestamp;
    std::string reviewer_id;
    std::string action;
    json diff = json::object();

    bool operator==(const DecisionEntry&) const = default;
};

struct ReviewItem {
    Sample sample;                   // original, never modified
    std::optional<Sample> working;   // set by an edit
    std::vector<FlagReason> flags;   // sorted, unique
    Status status = Status::Pending;
    std::uint64_t version = 0;
    std::vector<DecisionEntry> log;

    const std::string& id() const { return sample.id; }
    bool operator==(const ReviewItem&) const = default;
};

json item_to_json(const ReviewItem& item);
ReviewItem item_from_json(const json& j);

using Queue = std::map<std::string, ReviewItem>;

json queue_to_json(const Queue& queue);
Queue queue_from_json(const json& j);
Queue read_queue(const std::filesystem::path& path);
void write_queue(const Queue& queue, const std::filesystem::path& path);

struct ReviewQueueStats {
    std::size_t pending = 0;
    std::size_t accepted = 0;
    std::size_t edited = 0;
    std::size_t discarded = 0;

    std::size_t total() const { return pending + accepted + edited + discarded; }
    bool operator==(const ReviewQueueStats&) const = default;
};

json stats_to_json(const ReviewQueueStats& stats);
ReviewQueueStats queue_stats(const Queue& queue);

class ReviewError : public std::runtime_error {
public:
    enum class Kind { NotFound, Conflict, Validation, MissingSignal };
    ReviewError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// --- flagging ---------------------------------------------------------------

struct FlagCriteria {
    std::optional<std::size_t> lowest_topics;  // needs an eval report
    bool filter_reject = false;                // needs a rejection list; screens think and solution
    bool repair_outputs = false;               // provenance.distill.phase == "repair"
    std::vector<std::string> manual_ids;

    bool empty() const { return !lowest_topics && !filter_reject && !repair_outputs && manual_ids.empty(); }
    static FlagCriteria from_json(const json& j);
};

struct FlagSignals {
    const eval::EvalReport* report = nullptr;
    const distill::RejectionList* rejection = nullptr;
};

// Adds every matching sample to `queue`; an item already queued only gains
// new reasons, its status and log are untouched.
Queue flag_samples(const Corpus& corpus, const FlagSignals& signals, const FlagCriteria& criteria, Queue queue = {});

// --- decisions --------------------------------------------------------------

struct Action {
    enum class Kind { Accept, Edit, Discard } kind = Kind::Accept;
    std::optional<std::string> new_solution;
    std::optional<std::string> new_answer;

    static Action from_json(const std::string& action, const json& payload);
};

struct DecisionEvent {
    std::uint64_t seq = 0;
    std::string item_id;
    std::uint64_t version = 0;  // version the decision was made against
    std::string reviewer_id;
    std::string timestamp;
    Action action;
};

json event_to_json(const DecisionEvent& e);
DecisionEvent event_from_json(const json& j);

// Pure transition. Throws ReviewError (NotFound, Conflict, Validation);
// `queue` is unchanged on error.
void apply_decision(Queue& queue, const DecisionEvent& event);

// --- export -----------------------------------------------------------------

struct ExportResult {
    Corpus corpus;
    ReviewQueueStats stats;
};

// Discarded items are dropped, edited items replaced by their working copy,
// accepted and pending items kept with provenance["review"] recording status.
ExportResult export_reviewed(const Queue& queue, const Corpus& base);

// --- durable store ----------------------------------------------------------

std::string utc_timestamp();

// Append-only decision journal plus periodic snapshots in `dir`:
//   journal.jsonl   one DecisionEvent per line, fsynced before acknowledging
//   snapshot.json   {"seq": n, "items": [...]}, rewritten atomically
// Recovery loads the snapshot and replays journal events with a larger seq.
// A torn final journal line (crash mid-write) is dropped.
class ReviewStore {
public:
    ReviewStore(std::filesystem::path dir, const Queue& initial, std::size_t snapshot_every = 16,
                std::function<std::string()> clock = utc_timestamp);
    ~ReviewStore();
    ReviewStore(const ReviewStore&) = delete;
    ReviewStore& operator=(const ReviewStore&) = delete;

    ReviewItem decide(const std::string& item_id, const Action& action, const std::string& reviewer_id,
                      std::uint64_t expected_version);

    std::shared_ptr<const Queue> view() const;
    std::uint64_t sequence() const;
    const std::filesystem::path& dir() const { return dir_; }

    // Snapshot + journal replay from disk, independent of any live store.
    static Queue replay(const std::filesystem::path& dir, const Queue& initial);

private:
    void write_snapshot(const Queue& queue, std::uint64_t seq);

    std::filesystem::path dir_;
    std::size_t snapshot_every_;
    std::function<std::string()> clock_;
    int journal_fd_ = -1;
    std::mutex writer_;
    mutable std::mutex view_mutex_;
    std::shared_ptr<const Queue> view_;
    std::uint64_t seq_ = 0;
    std::size_t since_snapshot_ = 0;
};

// --- HTTP -------------------------------------------------------------------

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::map<std::string, std::string> tokens;  // bearer token -> reviewer_id
    std::filesystem::path static_dir;
    std::filesystem::path image_root;
    std::filesystem::path export_path;
    std::size_t page_size = 20;

    static ServerConfig from_json(const json& j);
};

class ReviewServer {
public:
    ReviewServer(ReviewStore& store, Corpus base, ServerConfig config);
    ~ReviewServer();

    // Binds and serves until stop(). Returns false if the bind failed.
    bool listen();
    // Binds an ephemeral port; returns it (or -1).
    int bind_any();
    void listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace edusft::review
