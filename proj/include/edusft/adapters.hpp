#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "edusft/corpus.hpp"

namespace edusft {

// Raised by adapters when a call fails (network, HTTP status, missing script
// entry). Callers retry a bounded number of times.
class AdapterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Phase { Primary, Fallback, Repair };
std::string_view to_string(Phase phase);

struct TeacherRequest {
    std::string item_id;
    std::string prompt;
    std::vector<std::string> attachments;
    int attempt = 1;  // 1-based across all phases of one item
    Phase phase = Phase::Primary;
};

class TeacherAdapter {
public:
    virtual ~TeacherAdapter() = default;
    virtual std::string generate(const TeacherRequest& request) = 0;
    // Free-form description recorded in provenance (model, decoding settings).
    virtual json describe() const = 0;
};

struct EvalQuery {
    std::string item_id;
    std::string question_text;
    std::vector<std::string> image_refs;
    std::vector<Choice> choices;
};

class ModelAdapter {
public:
    virtual ~ModelAdapter() = default;
    virtual std::string answer(const EvalQuery& query) = 0;
    virtual json describe() const = 0;
};

// Candidate script keyed by (item_id, attempt). Accepted layouts:
//   {"items": {"<id>": ["cand for attempt 1", "cand for attempt 2", ...]}}
//   {"items": {"<id>": {"1": "...", "3": "..."}}}
// A candidate may be {"error": "message"} to simulate a failed call. Lookups
// without an entry fall back to "default" when present, else fail.
class ScriptedTeacher final : public TeacherAdapter {
public:
    explicit ScriptedTeacher(json script);
    static ScriptedTeacher from_file(const std::filesystem::path& path);

    std::string generate(const TeacherRequest& request) override;
    json describe() const override;

private:
    json script_;
};

// Responses keyed by item id: {"responses": {"<id>": "text"}}. Entries may be
// {"error": "..."} like ScriptedTeacher.
class ScriptedModel final : public ModelAdapter {
public:
    explicit ScriptedModel(json script);
    static ScriptedModel from_file(const std::filesystem::path& path);
    // Answers every item with "<answer>gold</answer>".
    static ScriptedModel echo_gold(const Corpus& benchmark);

    std::string answer(const EvalQuery& query) override;
    json describe() const override;

private:
    json script_;
};

// --- live chat-completions adapter -----------------------------------------

struct EndpointConfig {
    std::string base_url;            // e.g. "http://localhost:8080/v1"
    std::string model;
    std::string token_env = "EDUSFT_API_TOKEN";
    std::string system_prompt;
    double temperature = 0.7;
    int max_tokens = 2048;
    std::chrono::milliseconds timeout{60000};
    double min_interval_s = 0.0;     // per-adapter rate limit
    std::filesystem::path journal;   // request/response log; empty disables

    static EndpointConfig from_json(const json& j);
    json to_json() const;
};

// One POST to {base_url}/chat/completions per call. Image attachments are sent
// as image_url parts using their relative paths.
class ChatCompletionsClient {
public:
    explicit ChatCompletionsClient(EndpointConfig config);
    std::string complete(const std::string& prompt, const std::vector<std::string>& images);
    const EndpointConfig& config() const { return config_; }

private:
    void throttle();
    void log(const json& entry);

    EndpointConfig config_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point last_call_{};
};

class HttpTeacher final : public TeacherAdapter {
public:
    explicit HttpTeacher(EndpointConfig config) : client_(std::move(config)) {}
    std::string generate(const TeacherRequest& request) override;
    json describe() const override;

private:
    ChatCompletionsClient client_;
};

class HttpModel final : public ModelAdapter {
public:
    explicit HttpModel(EndpointConfig config) : client_(std::move(config)) {}
    std::string answer(const EvalQuery& query) override;
    json describe() const override;

private:
    ChatCompletionsClient client_;
};

// Default multiple-choice prompt: question, then "A) ..." lines.
std::string format_question_prompt(const std::string& question_text, const std::vector<Choice>& choices);

}  // namespace edusft
