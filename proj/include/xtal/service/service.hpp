// SPDX-License-Identifier: Apache-2.0
// REST facade over sessions. Each session lives in <root>/<id>/ with its
// events.jsonl; a restarted store replays every log it finds there.
#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xtal/agents/session.hpp"

namespace xtal {

class UnknownSession : public Error {
public:
    explicit UnknownSession(const std::string& id) : Error("unknown session '" + id + "'") {}
};

/// id, state, task text, current step and timestamps; derived from the log.
nlohmann::json session_summary(const Session& s);

class SessionStore {
public:
    /// `make_config` supplies backend, toolbox and environment for each new
    /// or restored session; the store fills in the workspace when `root` is set.
    SessionStore(std::function<SessionConfig()> make_config, std::optional<std::filesystem::path> root = {});

    /// Registers a fresh session in AwaitingTask.
    std::shared_ptr<Session> create();
    std::shared_ptr<Session> get(const std::string& id) const;  // throws UnknownSession
    std::vector<std::shared_ptr<Session>> list() const;         // by id

    std::size_t restored() const noexcept { return restored_; }

private:
    std::string next_id();

    std::function<SessionConfig()> make_config_;
    std::optional<std::filesystem::path> root_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    int counter_ = 0;
    std::size_t restored_ = 0;
};

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    /// When set, every request needs "Authorization: Bearer <token>".
    std::optional<std::string> token;
};

/// HTTP server for a SessionStore. Routes:
///   POST /sessions                              TaskSpec -> 201 snapshot
///   GET  /sessions                              summaries
///   GET  /sessions/{id}                         snapshot
///   POST /sessions/{id}/plan                    retry planning
///   POST /sessions/{id}/plan/verdict            {"verdict": "approve"|"revise", "feedback"}
///   POST /sessions/{id}/steps/current/run
///   POST /sessions/{id}/steps/current/verdict   {"verdict": "approve"|"feedback"|"abort", "text"}
///   GET  /sessions/{id}/events                  text/event-stream, history then live
///   GET  /sessions/{id}/artifacts               names
///   GET  /sessions/{id}/artifacts/{name}        chemical/x-cif or application/json
/// Errors: 401 bad token, 404 unknown session or artifact, 409 illegal
/// transition, 422 malformed body, 502 backend failure.
class ApiServer {
public:
    ApiServer(std::shared_ptr<SessionStore> store, ServiceOptions options);
    ~ApiServer();

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    /// Throws IoError when the address cannot be bound.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace xtal
