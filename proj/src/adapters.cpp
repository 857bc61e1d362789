#include "edusft/adapters.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <thread>

#include "edusft/digest.hpp"

namespace edusft {

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::Primary: return "primary";
        case Phase::Fallback: return "fallback";
        case Phase::Repair: return "repair";
    }
    return "primary";
}

namespace {

std::string candidate_text(const json& entry, const std::string& what) {
    if (entry.is_string()) return entry.get<std::string>();
    if (entry.is_object() && entry.contains("error")) {
        throw AdapterError(what + ": " + entry.at("error").get<std::string>());
    }
    throw AdapterError(what + ": malformed script entry");
}

json load_json_file(const std::filesystem::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

}  // namespace

ScriptedTeacher::ScriptedTeacher(json script) : script_(std::move(script)) {
    if (!script_.is_object() || !script_.contains("items") || !script_.at("items").is_object()) {
        throw std::invalid_argument("teacher script must be an object with an \"items\" object");
    }
}

ScriptedTeacher ScriptedTeacher::from_file(const std::filesystem::path& path) {
    return ScriptedTeacher(load_json_file(path));
}

std::string ScriptedTeacher::generate(const TeacherRequest& request) {
    const std::string what = "scripted teacher (" + request.item_id + ", attempt " + std::to_string(request.attempt) + ")";
    const auto& items = script_.at("items");
    if (auto it = items.find(request.item_id); it != items.end()) {
        const auto& entry = *it;
        if (entry.is_array()) {
            const auto idx = static_cast<std::size_t>(request.attempt - 1);
            if (request.attempt >= 1 && idx < entry.size()) return candidate_text(entry.at(idx), what);
        } else if (entry.is_object()) {
            if (auto a = entry.find(std::to_string(request.attempt)); a != entry.end()) return candidate_text(*a, what);
        }
    }
    if (script_.contains("default")) return candidate_text(script_.at("default"), what);
    throw AdapterError(what + ": no scripted candidate");
}

json ScriptedTeacher::describe() const { return json{{"adapter", "scripted"}, {"script_sha256", sha256_hex(script_.dump())}}; }

ScriptedModel::ScriptedModel(json script) : script_(std::move(script)) {
    if (!script_.is_object() || !script_.contains("responses") || !script_.at("responses").is_object()) {
        throw std::invalid_argument("model script must be an object with a \"responses\" object");
    }
}

ScriptedModel ScriptedModel::from_file(const std::filesystem::path& path) { return ScriptedModel(load_json_file(path)); }

ScriptedModel ScriptedModel::echo_gold(const Corpus& benchmark) {
    json responses = json::object();
    for (const auto& s : benchmark) responses[s.id] = "<answer>" + s.gold_answer.value_or("") + "</answer>";
    return ScriptedModel(json{{"responses", std::move(responses)}});
}

std::string ScriptedModel::answer(const EvalQuery& query) {
    const std::string what = "scripted model (" + query.item_id + ")";
    const auto& responses = script_.at("responses");
    if (auto it = responses.find(query.item_id); it != responses.end()) return candidate_text(*it, what);
    if (script_.contains("default")) return candidate_text(script_.at("default"), what);
    throw AdapterError(what + ": no scripted response");
}

json ScriptedModel::describe() const { return json{{"adapter", "scripted"}, {"script_sha256", sha256_hex(script_.dump())}}; }

EndpointConfig EndpointConfig::from_json(const json& j) {
    EndpointConfig c;
    if (!j.contains("base_url") || !j.contains("model")) {
        throw std::invalid_argument("endpoint config needs base_url and model");
    }
    c.base_url = j.at("base_url").get<std::string>();
    c.model = j.at("model").get<std::string>();
    c.token_env = j.value("token_env", c.token_env);
    c.system_prompt = j.value("system_prompt", c.system_prompt);
    c.temperature = j.value("temperature", c.temperature);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.timeout = std::chrono::milliseconds(static_cast<long>(j.value("timeout_s", 60.0) * 1000));
    c.min_interval_s = j.value("min_interval_s", c.min_interval_s);
    if (j.contains("journal")) c.journal = j.at("journal").get<std::string>();
    return c;
}

json EndpointConfig::to_json() const {
    return json{{"base_url", base_url},
                {"model", model},
                {"token_env", token_env},
                {"temperature", temperature},
                {"max_tokens", max_tokens},
                {"timeout_s", timeout.count() / 1000.0},
                {"min_interval_s", min_interval_s}};
}

ChatCompletionsClient::ChatCompletionsClient(EndpointConfig config) : config_(std::move(config)) {
    if (config_.base_url.rfind("http://", 0) != 0 && config_.base_url.rfind("https://", 0) != 0) {
        throw std::invalid_argument("base_url must start with http:// or https://");
    }
}

void ChatCompletionsClient::throttle() {
    if (config_.min_interval_s <= 0) return;
    std::lock_guard lock(mutex_);
    const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(config_.min_interval_s));
    const auto now = std::chrono::steady_clock::now();
    if (last_call_.time_since_epoch().count() != 0 && now < last_call_ + interval) {
        std::this_thread::sleep_until(last_call_ + interval);
    }
    last_call_ = std::chrono::steady_clock::now();
}

void ChatCompletionsClient::log(const json& entry) {
    if (config_.journal.empty()) return;
    std::lock_guard lock(mutex_);
    std::ofstream out(config_.journal, std::ios::app);
    out << entry.dump() << '\n';
}

std::string ChatCompletionsClient::complete(const std::string& prompt, const std::vector<std::string>& images) {
    const auto scheme_end = config_.base_url.find("://") + 3;
    const auto path_start = config_.base_url.find('/', scheme_end);
    const std::string origin = config_.base_url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    path += "/chat/completions";

    json content = json::array();
    content.push_back({{"type", "text"}, {"text", prompt}});
    for (const auto& img : images) content.push_back({{"type", "image_url"}, {"image_url", {{"url", img}}}});
    json messages = json::array();
    if (!config_.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", config_.system_prompt}});
    messages.push_back({{"role", "user"}, {"content", images.empty() ? json(prompt) : content}});
    const json body{{"model", config_.model},
                    {"messages", messages},
                    {"temperature", config_.temperature},
                    {"max_tokens", config_.max_tokens}};

    throttle();
    httplib::Client client(origin);
    const auto secs = config_.timeout.count() / 1000;
    const auto usecs = (config_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    httplib::Headers headers;
    if (const char* token = std::getenv(config_.token_env.c_str()); token && *token) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        log({{"request", body}, {"error", httplib::to_string(res.error())}});
        throw AdapterError("request to " + origin + path + " failed: " + httplib::to_string(res.error()));
    }
    log({{"request", body}, {"status", res->status}, {"response", res->body}});
    if (res->status != 200) throw AdapterError("endpoint returned HTTP " + std::to_string(res->status));
    try {
        const auto reply = json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw AdapterError(std::string("unexpected response body: ") + e.what());
    }
}

std::string HttpTeacher::generate(const TeacherRequest& request) { return client_.complete(request.prompt, request.attachments); }

json HttpTeacher::describe() const {
    auto j = client_.config().to_json();
    j["adapter"] = "http";
    return j;
}

std::string HttpModel::answer(const EvalQuery& query) {
    return client_.complete(format_question_prompt(query.question_text, query.choices), query.image_refs);
}

json HttpModel::describe() const {
    auto j = client_.config().to_json();
    j["adapter"] = "http";
    return j;
}

std::string format_question_prompt(const std::string& question_text, const std::vector<Choice>& choices) {
    std::string out = question_text;
    for (const auto& c : choices) out += "\n" + c.letter + ") " + c.text;
    return out;
}

}  // namespace edusft
