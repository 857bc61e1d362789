#include <httplib.h>

#include <algorithm>

#include "edusft/digest.hpp"
#include "edusft/review.hpp"

namespace edusft::review {

ServerConfig ServerConfig::from_json(const json& j) {
    ServerConfig c;
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    if (j.contains("tokens")) c.tokens = j.at("tokens").get<std::map<std::string, std::string>>();
    if (j.contains("static_dir")) c.static_dir = j.at("static_dir").get<std::string>();
    if (j.contains("image_root")) c.image_root = j.at("image_root").get<std::string>();
    if (j.contains("export_path")) c.export_path = j.at("export_path").get<std::string>();
    c.page_size = j.value("page_size", c.page_size);
    return c;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
    send_json(res, status, json{{"error", {{"kind", kind}, {"message", message}}}});
}

int status_for(ReviewError::Kind kind) {
    switch (kind) {
        case ReviewError::Kind::NotFound: return 404;
        case ReviewError::Kind::Conflict: return 409;
        case ReviewError::Kind::Validation: return 422;
        case ReviewError::Kind::MissingSignal: return 400;
    }
    return 500;
}

std::string_view kind_name(ReviewError::Kind kind) {
    switch (kind) {
        case ReviewError::Kind::NotFound: return "not_found";
        case ReviewError::Kind::Conflict: return "conflict";
        case ReviewError::Kind::Validation: return "validation";
        case ReviewError::Kind::MissingSignal: return "missing_signal";
    }
    return "error";
}

std::size_t param_size(const httplib::Request& req, const char* key, std::size_t fallback) {
    if (!req.has_param(key)) return fallback;
    const auto v = req.get_param_value(key);
    std::size_t n = 0;
    if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; }) || v.size() > 9) {
        throw ReviewError(ReviewError::Kind::Validation, std::string(key) + " must be a positive integer");
    }
    n = std::stoul(v);
    if (n == 0) throw ReviewError(ReviewError::Kind::Validation, std::string(key) + " must be a positive integer");
    return n;
}

}  // namespace

struct ReviewServer::Impl {
    ReviewStore& store;
    Corpus base;
    ServerConfig config;
    httplib::Server server;
    std::mutex export_mutex;

    Impl(ReviewStore& s, Corpus b, ServerConfig c) : store(s), base(std::move(b)), config(std::move(c)) { routes(); }

    std::optional<std::string> reviewer(const httplib::Request& req) const {
        const auto auth = req.get_header_value("Authorization");
        const std::string prefix = "Bearer ";
        if (auth.rfind(prefix, 0) != 0) return std::nullopt;
        const auto it = config.tokens.find(auth.substr(prefix.size()));
        if (it == config.tokens.end()) return std::nullopt;
        return it->second;
    }

    json item_view(const ReviewItem& item) const {
        auto j = item_to_json(item);
        json urls = json::array();
        for (const auto& ref : item.sample.image_refs) urls.push_back("/images/" + ref);
        j["image_urls"] = std::move(urls);
        return j;
    }

    void routes() {
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const ReviewError& e) {
                send_error(res, status_for(e.kind()), std::string(kind_name(e.kind())), e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "internal", e.what());
            }
        });

        server.Get("/api/queue", [this](const httplib::Request& req, httplib::Response& res) {
            const auto page = param_size(req, "page", 1);
            const auto page_size = std::min<std::size_t>(param_size(req, "page_size", config.page_size), 500);
            std::optional<Status> status;
            std::optional<FlagReason> flag;
            if (req.has_param("status")) {
                status = parse_status(req.get_param_value("status"));
                if (!status) throw ReviewError(ReviewError::Kind::Validation, "unknown status filter");
            }
            if (req.has_param("flag")) {
                flag = parse_flag(req.get_param_value("flag"));
                if (!flag) throw ReviewError(ReviewError::Kind::Validation, "unknown flag filter");
            }
            const auto topic = req.has_param("topic") ? std::optional(req.get_param_value("topic")) : std::nullopt;
            const auto queue = store.view();
            std::vector<const ReviewItem*> matched;
            for (const auto& [id, item] : *queue) {
                if (status && item.status != *status) continue;
                if (flag && std::find(item.flags.begin(), item.flags.end(), *flag) == item.flags.end()) continue;
                if (topic && (!item.sample.meta || item.sample.meta->topic_id != *topic)) continue;
                matched.push_back(&item);
            }
            json items = json::array();
            for (std::size_t i = (page - 1) * page_size; i < std::min(matched.size(), page * page_size); ++i) {
                const auto& item = *matched[i];
                json flags = json::array();
                for (auto f : item.flags) flags.push_back(to_string(f));
                items.push_back({{"id", item.id()},
                                 {"topic", item.sample.meta ? item.sample.meta->topic_id : ""},
                                 {"flags", std::move(flags)},
                                 {"status", to_string(item.status)},
                                 {"version", item.version}});
            }
            send_json(res, 200,
                      json{{"total", matched.size()},
                           {"page", page},
                           {"page_size", page_size},
                           {"pages", (matched.size() + page_size - 1) / page_size},
                           {"items", std::move(items)}});
        });

        server.Get(R"(/api/items/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const auto queue = store.view();
            const auto it = queue->find(req.matches[1].str());
            if (it == queue->end()) throw ReviewError(ReviewError::Kind::NotFound, "no review item " + req.matches[1].str());
            send_json(res, 200, item_view(it->second));
        });

        server.Post(R"(/api/items/([^/]+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
            const auto who = reviewer(req);
            if (!who) return send_error(res, 401, "unauthorized", "missing or unknown bearer token");
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::parse_error& e) {
                return send_error(res, 400, "bad_request", e.what());
            }
            if (!body.is_object() || !body.contains("action") || !body.at("action").is_string()) {
                throw ReviewError(ReviewError::Kind::Validation, "body needs a string 'action'");
            }
            if (!body.contains("version") || !body.at("version").is_number_unsigned()) {
                throw ReviewError(ReviewError::Kind::Validation, "body needs a non-negative integer 'version'");
            }
            const auto action = Action::from_json(body.at("action").get<std::string>(), body.value("payload", json()));
            const auto updated =
                store.decide(req.matches[1].str(), action, *who, body.at("version").get<std::uint64_t>());
            send_json(res, 200, item_view(updated));
        });

        server.Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, stats_to_json(queue_stats(*store.view())));
        });

        server.Post("/api/export", [this](const httplib::Request& req, httplib::Response& res) {
            if (!reviewer(req)) return send_error(res, 401, "unauthorized", "missing or unknown bearer token");
            const auto queue = store.view();
            const auto result = export_reviewed(*queue, base);
            const auto payload = serialize_corpus(result.corpus);
            json body{{"count", result.corpus.size()},
                      {"base_count", base.size()},
                      {"stats", stats_to_json(result.stats)},
                      {"sha256", sha256_hex(payload)}};
            if (!config.export_path.empty()) {
                std::lock_guard lock(export_mutex);
                write_file_atomic(config.export_path, payload);
                body["path"] = config.export_path.string();
            }
            send_json(res, 200, body);
        });

        if (!config.image_root.empty() && std::filesystem::is_directory(config.image_root)) {
            server.set_mount_point("/images", config.image_root.string());
        }
        if (!config.static_dir.empty() && std::filesystem::is_directory(config.static_dir)) {
            server.set_mount_point("/", config.static_dir.string());
        }
    }
};

ReviewServer::ReviewServer(ReviewStore& store, Corpus base, ServerConfig config)
    : impl_(std::make_unique<Impl>(store, std::move(base), std::move(config))) {}

ReviewServer::~ReviewServer() = default;

bool ReviewServer::listen() { return impl_->server.listen(impl_->config.host, impl_->config.port); }

int ReviewServer::bind_any() { return impl_->server.bind_to_any_port(impl_->config.host); }

void ReviewServer::listen_after_bind() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() { impl_->server.stop(); }

void ReviewServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace edusft::review
