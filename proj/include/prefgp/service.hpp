#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>

// Eigen must come before httplib: <resolv.h> defines a _res macro.
#include "json_io.hpp"
#include "session.hpp"

#include <httplib.h>

namespace prefgp::service {

/// Status + JSON body, independent of the HTTP layer.
struct Reply {
    int status = 200;
    json body;
};

inline Reply error_reply(int status, const std::string& code, const std::string& message) {
    return {status, {{"error", {{"code", code}, {"message", message}}}}};
}

namespace detail {
/// Appends text and fsyncs before returning.
inline void append_durable(const std::filesystem::path& path, const std::string& text) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw std::runtime_error("cannot open event log " + path.string());
    std::size_t off = 0;
    while (off < text.size()) {
        const auto n = ::write(fd, text.data() + off, text.size() - off);
        if (n < 0) {
            ::close(fd);
            throw std::runtime_error("write to event log " + path.string() + " failed");
        }
        off += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
}
}  // namespace detail

/// Live sessions with optional durable event logs, one <id>.jsonl per
/// session. Responses within one session are strictly serialized; a second
/// concurrent submit gets a conflict.
class SessionService {
public:
    explicit SessionService(std::optional<std::filesystem::path> log_dir = std::nullopt) : log_dir_(std::move(log_dir)) {
        if (log_dir_) {
            std::filesystem::create_directories(*log_dir_);
            restore();
        }
    }

    std::size_t size() const {
        std::shared_lock lock(map_mutex_);
        return sessions_.size();
    }

    Reply create(const json& body) {
        SessionConfig cfg;
        std::unique_ptr<Entry> entry;
        std::string id;
        try {
            cfg = config_from_json(body);
            id = new_id();
            entry = std::make_unique<Entry>(Session(id, std::move(cfg)));
        } catch (const Error& e) {
            return error_reply(400, "invalid_config", e.what());
        }
        persist(*entry);
        Reply r{201, {{"id", id}, {"query", payload_to_json(entry->session.next_query())}}};
        std::unique_lock lock(map_mutex_);
        sessions_.emplace(id, std::shared_ptr<Entry>(std::move(entry)));
        return r;
    }

    Reply query(const std::string& id) {
        auto entry = find(id);
        if (!entry) return not_found(id);
        std::lock_guard lock(entry->mutex);
        if (entry->session.finished()) return error_reply(410, "finished", "session is finished");
        return {200, payload_to_json(entry->session.next_query())};
    }

    Reply respond(const std::string& id, const json& body) {
        auto entry = find(id);
        if (!entry) return not_found(id);
        std::unique_lock lock(entry->mutex, std::try_to_lock);
        if (!lock.owns_lock()) return error_reply(409, "conflict", "another response is being processed");
        auto& s = entry->session;
        if (s.finished()) return error_reply(410, "finished", "session is finished");
        try {
            const auto resp = response_from_json(body);
            s.submit_response(resp);
        } catch (const ExhaustedError& e) {
            return error_reply(410, "finished", e.what());
        } catch (const json::exception& e) {
            return error_reply(422, "item_mismatch", std::string("malformed response: ") + e.what());
        } catch (const Error& e) {
            return error_reply(422, "item_mismatch", e.what());
        }
        persist(*entry);
        json out = {{"query_count", s.query_count()}, {"finished", s.finished()}, {"fit_failures", s.fit_failures()},
                    {"best", best_json(s)}};
        out["query"] = s.finished() ? json(nullptr) : payload_to_json(s.next_query());
        return {200, out};
    }

    Reply best(const std::string& id) {
        auto entry = find(id);
        if (!entry) return not_found(id);
        std::lock_guard lock(entry->mutex);
        if (entry->session.query_count() == 0) return error_reply(404, "not_found", "no responses yet, no best item");
        return {200, best_json(entry->session)};
    }

    Reply finish(const std::string& id) {
        auto entry = find(id);
        if (!entry) return not_found(id);
        std::unique_lock lock(entry->mutex, std::try_to_lock);
        if (!lock.owns_lock()) return error_reply(409, "conflict", "another request is being processed");
        entry->session.finish();
        persist(*entry);
        const auto& s = entry->session;
        return {200, {{"finished", true}, {"query_count", s.query_count()}, {"best", s.query_count() ? best_json(s) : json(nullptr)}}};
    }

    Reply log(const std::string& id) {
        auto entry = find(id);
        if (!entry) return not_found(id);
        std::lock_guard lock(entry->mutex);
        json events = json::array();
        for (const auto& e : entry->session.events()) events.push_back(event_to_json(e));
        return {200, {{"id", id}, {"events", events}}};
    }

    /// Holds a session's ingestion lock, as an in-flight response would.
    std::unique_lock<std::mutex> hold(const std::string& id) {
        auto entry = find(id);
        if (!entry) throw InputError("no session '" + id + "'");
        return std::unique_lock(entry->mutex);
    }

    /// Registers the JSON API routes on an httplib server.
    void mount(httplib::Server& server) {
        auto send = [](httplib::Response& res, const Reply& r) {
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
        };
        auto parse = [](const httplib::Request& req) -> std::optional<json> {
            try {
                return json::parse(req.body);
            } catch (const json::parse_error&) {
                return std::nullopt;
            }
        };
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                    {"Access-Control-Allow-Headers", "Content-Type"},
                                    {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
        server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        server.Post("/sessions", [=, this](const httplib::Request& req, httplib::Response& res) {
            auto body = parse(req);
            send(res, body ? create(*body) : error_reply(400, "invalid_config", "body is not valid JSON"));
        });
        server.Get(R"(/sessions/([^/]+)/query)", [=, this](const httplib::Request& req, httplib::Response& res) {
            send(res, query(req.matches[1]));
        });
        server.Post(R"(/sessions/([^/]+)/response)", [=, this](const httplib::Request& req, httplib::Response& res) {
            auto body = parse(req);
            send(res, body ? respond(req.matches[1], *body) : error_reply(422, "item_mismatch", "body is not valid JSON"));
        });
        server.Get(R"(/sessions/([^/]+)/best)", [=, this](const httplib::Request& req, httplib::Response& res) {
            send(res, best(req.matches[1]));
        });
        server.Post(R"(/sessions/([^/]+)/finish)", [=, this](const httplib::Request& req, httplib::Response& res) {
            send(res, finish(req.matches[1]));
        });
        server.Get(R"(/sessions/([^/]+)/log)", [=, this](const httplib::Request& req, httplib::Response& res) {
            send(res, log(req.matches[1]));
        });
    }

private:
    struct Entry {
        explicit Entry(Session s) : session(std::move(s)) {}
        std::mutex mutex;
        Session session;
        std::size_t persisted = 0;  // events already written
    };

    std::shared_ptr<Entry> find(const std::string& id) const {
        std::shared_lock lock(map_mutex_);
        auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : it->second;
    }

    static Reply not_found(const std::string& id) { return error_reply(404, "not_found", "no session '" + id + "'"); }

    json best_json(const Session& s) const {
        const auto [best, mean] = s.current_best();
        const auto& info = s.candidate_info(best);
        json j = {{"id", best}, {"mean", mean}, {"values", s.candidates().value(best)}, {"raw", info.values}};
        if (!info.label.empty()) j["label"] = info.label;
        return j;
    }

    std::string new_id() {
        std::unique_lock lock(map_mutex_);
        std::string id;
        do {
            char buf[32];
            std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(++counter_));
            id = buf;
        } while (sessions_.contains(id) || (log_dir_ && std::filesystem::exists(*log_dir_ / (id + ".jsonl"))));
        return id;
    }

    void persist(Entry& e) {
        const auto& events = e.session.events();
        if (log_dir_ && e.persisted < events.size()) {
            const std::vector<Event> fresh(events.begin() + static_cast<std::ptrdiff_t>(e.persisted), events.end());
            detail::append_durable(*log_dir_ / (e.session.id() + ".jsonl"), events_to_jsonl(fresh));
        }
        e.persisted = events.size();
    }

    void restore() {
        for (const auto& file : std::filesystem::directory_iterator(*log_dir_)) {
            if (file.path().extension() != ".jsonl") continue;
            std::ifstream in(file.path());
            std::stringstream text;
            text << in.rdbuf();
            const auto id = file.path().stem().string();
            try {
                auto entry = std::make_shared<Entry>(Session::replay(id, events_from_jsonl(text.str())));
                entry->persisted = entry->session.events().size();
                sessions_.emplace(id, std::move(entry));
            } catch (const std::exception& e) {
                std::cerr << "skipping session log " << file.path() << ": " << e.what() << '\n';
            }
        }
    }

    std::optional<std::filesystem::path> log_dir_;
    mutable std::shared_mutex map_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::uint64_t counter_ = 0;
};

}  // namespace prefgp::service
