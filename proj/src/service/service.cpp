// SPDX-License-Identifier: Apache-2.0
#include "xtal/service/service.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <thread>

// After the xtal headers: httplib pulls in <resolv.h>, whose _res macro
// breaks Eigen.
#include <httplib.h>

namespace xtal {

namespace fs = std::filesystem;

nlohmann::json session_summary(const Session& s)
{
    auto snap = s.snapshot();
    auto events = s.events();
    return {{"id", snap.id},
            {"state", to_string(snap.state)},
            {"task", snap.task ? nlohmann::json(snap.task->task) : nlohmann::json()},
            {"kind", snap.task ? nlohmann::json(to_string(snap.task->kind)) : nlohmann::json()},
            {"current_step", snap.current_step},
            {"steps", snap.workflow ? static_cast<int>(snap.workflow->size()) : 0},
            {"created_at", events.empty() ? std::string() : events.front().time},
            {"updated_at", snap.updated_at}};
}

SessionStore::SessionStore(std::function<SessionConfig()> make_config, std::optional<fs::path> root)
    : make_config_(std::move(make_config)), root_(std::move(root))
{
    if (!root_)
        return;
    fs::create_directories(*root_);
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(*root_))
        if (entry.is_directory() && fs::exists(entry.path() / "events.jsonl"))
            dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        auto id = dir.filename().string();
        auto config = make_config_();
        config.workspace = dir;
        sessions_[id] = Session::restore(id, std::move(config), load_event_log(dir / "events.jsonl"));
        ++restored_;
        int n = 0;
        if (std::sscanf(id.c_str(), "s%d", &n) == 1)
            counter_ = std::max(counter_, n);
    }
}

std::string SessionStore::next_id()
{
    char buf[32];
    do
        std::snprintf(buf, sizeof buf, "s%04d", ++counter_);
    while (sessions_.count(buf));
    return buf;
}

std::shared_ptr<Session> SessionStore::create()
{
    std::lock_guard lock(mutex_);
    auto id = next_id();
    auto config = make_config_();
    if (root_)
        config.workspace = *root_ / id;
    auto s = std::make_shared<Session>(id, std::move(config));
    sessions_[id] = s;
    return s;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end())
        throw UnknownSession(id);
    return it->second;
}

std::vector<std::shared_ptr<Session>> SessionStore::list() const
{
    std::lock_guard lock(mutex_);
    std::vector<std::shared_ptr<Session>> out;
    for (const auto& [id, s] : sessions_)
        out.push_back(s);
    return out;
}

namespace {

class BadRequest : public Error {
public:
    using Error::Error;
};

void send_json(httplib::Response& res, int status, const nlohmann::json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

nlohmann::json parse_body(const httplib::Request& req, bool allow_empty = false)
{
    if (req.body.empty()) {
        if (allow_empty)
            return nlohmann::json::object();
        throw BadRequest("request body must be a JSON object");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
        throw BadRequest(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object())
        throw BadRequest("request body must be a JSON object");
    return j;
}

std::string string_field(const nlohmann::json& j, const char* key, bool required)
{
    if (!j.contains(key)) {
        if (required)
            throw BadRequest(std::string("missing field '") + key + "'");
        return {};
    }
    if (!j[key].is_string())
        throw BadRequest(std::string("field '") + key + "' must be a string");
    return j[key].get<std::string>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known)
{
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* name : known)
            ok = ok || k == name;
        if (!ok)
            throw BadRequest("unexpected field '" + k + "'");
    }
}

TaskSpec task_from_body(const nlohmann::json& j)
{
    reject_unknown(j, {"task", "intuition", "kind", "parameters", "step_intuitions"});
    try {
        auto t = TaskSpec::from_json(j);
        t.validate();
        return t;
    } catch (const Error& e) {
        throw BadRequest(e.what());
    } catch (const nlohmann::json::exception& e) {
        throw BadRequest(std::string("invalid task: ") + e.what());
    }
}

PlanVerdict plan_verdict_from_body(const nlohmann::json& j)
{
    reject_unknown(j, {"verdict", "feedback", "source"});
    PlanVerdict v;
    auto kind = string_field(j, "verdict", true);
    v.feedback = string_field(j, "feedback", false);
    if (j.contains("source"))
        v.source = string_field(j, "source", true);
    if (kind == "approve")
        v.kind = PlanVerdict::Kind::Approve;
    else if (kind == "revise")
        v.kind = PlanVerdict::Kind::Revise;
    else
        throw BadRequest("verdict must be \"approve\" or \"revise\", got \"" + kind + "\"");
    if (v.kind == PlanVerdict::Kind::Revise && v.feedback.empty())
        throw BadRequest("a revise verdict needs feedback");
    return v;
}

StepVerdict step_verdict_from_body(const nlohmann::json& j)
{
    reject_unknown(j, {"verdict", "text", "source"});
    StepVerdict v;
    auto kind = string_field(j, "verdict", true);
    v.text = string_field(j, "text", false);
    if (j.contains("source"))
        v.source = string_field(j, "source", true);
    if (kind == "approve")
        v.kind = StepVerdict::Kind::Approve;
    else if (kind == "feedback")
        v.kind = StepVerdict::Kind::Feedback;
    else if (kind == "abort")
        v.kind = StepVerdict::Kind::Abort;
    else
        throw BadRequest("verdict must be \"approve\", \"feedback\" or \"abort\", got \"" + kind + "\"");
    if (v.kind == StepVerdict::Kind::Feedback && v.text.empty())
        throw BadRequest("a feedback verdict needs text");
    return v;
}

const char* content_type_for(const std::string& name)
{
    auto ends_with = [&](const char* suffix) {
        std::string s(suffix);
        return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".cif"))
        return "chemical/x-cif";
    if (ends_with(".json"))
        return "application/json";
    return "text/plain";
}

bool terminal(SessionState s)
{
    return s == SessionState::Completed || s == SessionState::Failed;
}

std::string sse_frame(const SessionEvent& e)
{
    return "id: " + std::to_string(e.seq) + "\nevent: " + e.type + "\ndata: " + e.to_json().dump() + "\n\n";
}

/// Per-connection queue fed by a session subscription.
struct EventStream {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<SessionEvent> queue;
    int last_sent = 0;
    int token = -1;
};

} // namespace

struct ApiServer::Impl {
    std::shared_ptr<SessionStore> store;
    ServiceOptions options;
    httplib::Server server;
    std::thread thread;
    std::atomic<bool> stopping{false};

    /// Runs `fn` and maps exceptions onto status codes.
    template <class Fn>
    void guarded(httplib::Response& res, Fn&& fn, const std::shared_ptr<Session>& session = nullptr)
    {
        auto with_session = [&](nlohmann::json body) {
            if (session)
                body["session"] = session->snapshot().to_json();
            return body;
        };
        try {
            fn();
        } catch (const UnknownSession& e) {
            send_json(res, 404, {{"error", e.what()}});
        } catch (const IllegalTransition& e) {
            send_json(res, 409, {{"error", e.what()}, {"state", to_string(e.current())}});
        } catch (const BadRequest& e) {
            send_json(res, 422, {{"error", e.what()}});
        } catch (const IoError& e) {
            send_json(res, 500, {{"error", e.what()}});
        } catch (const Error& e) {
            // Backend failures and planner output the session could not use.
            send_json(res, 502, with_session({{"error", e.what()}}));
        } catch (const std::exception& e) {
            send_json(res, 500, {{"error", e.what()}});
        }
    }

    /// Session transition endpoint: looks the session up, applies `fn` and
    /// returns the new snapshot.
    template <class Fn>
    void transition(const httplib::Request& req, httplib::Response& res, Fn&& fn)
    {
        std::shared_ptr<Session> session;
        guarded(res, [&] {
            session = store->get(req.matches[1]);
            guarded(
                res,
                [&] {
                    fn(*session);
                    send_json(res, 200, session->snapshot().to_json());
                },
                session);
        });
    }

    void stream_events(const httplib::Request& req, httplib::Response& res)
    {
        std::shared_ptr<Session> session;
        try {
            session = store->get(req.matches[1]);
        } catch (const UnknownSession& e) {
            send_json(res, 404, {{"error", e.what()}});
            return;
        }
        int since = 0;
        try {
            if (req.has_header("Last-Event-ID"))
                since = std::stoi(req.get_header_value("Last-Event-ID"));
            else if (req.has_param("since"))
                since = std::stoi(req.get_param_value("since"));
        } catch (const std::exception&) {
            send_json(res, 422, {{"error", "since / Last-Event-ID must be an integer"}});
            return;
        }

        auto stream = std::make_shared<EventStream>();
        stream->last_sent = since;
        stream->token = session->subscribe([stream](const SessionEvent& e) {
            {
                std::lock_guard lock(stream->mutex);
                stream->queue.push_back(e);
            }
            stream->cv.notify_all();
        });
        // History after subscribing; duplicates are dropped by sequence number.
        auto history = session->events();
        {
            std::lock_guard lock(stream->mutex);
            stream->queue.insert(stream->queue.begin(), history.begin(), history.end());
        }

        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream",
            [this, session, stream](std::size_t, httplib::DataSink& sink) {
                auto last_write = std::chrono::steady_clock::now();
                while (!stopping) {
                    std::deque<SessionEvent> batch;
                    {
                        std::unique_lock lock(stream->mutex);
                        stream->cv.wait_for(lock, std::chrono::milliseconds(200),
                                            [&] { return !stream->queue.empty(); });
                        batch.swap(stream->queue);
                    }
                    for (const auto& e : batch) {
                        if (e.seq <= stream->last_sent)
                            continue;
                        auto frame = sse_frame(e);
                        if (!sink.is_writable() || !sink.write(frame.data(), frame.size()))
                            return false;
                        stream->last_sent = e.seq;
                        last_write = std::chrono::steady_clock::now();
                    }
                    if (batch.empty() && terminal(session->state())) {
                        std::lock_guard lock(stream->mutex);
                        if (stream->queue.empty())
                            break;
                    }
                    if (std::chrono::steady_clock::now() - last_write > std::chrono::seconds(15)) {
                        static const std::string ping = ": ping\n\n";
                        if (!sink.is_writable() || !sink.write(ping.data(), ping.size()))
                            return false;
                        last_write = std::chrono::steady_clock::now();
                    }
                }
                sink.done();
                return true;
            },
            [session, stream](bool) { session->unsubscribe(stream->token); });
    }

    void install_routes()
    {
        if (options.token) {
            server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
                if (req.get_header_value("Authorization") == "Bearer " + *options.token)
                    return httplib::Server::HandlerResponse::Unhandled;
                send_json(res, 401, {{"error", "missing or invalid bearer token"}});
                return httplib::Server::HandlerResponse::Handled;
            });
        }

        server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto task = task_from_body(parse_body(req));
                auto session = store->create();
                guarded(
                    res,
                    [&] {
                        session->submit_task(task);
                        res.set_header("Location", "/sessions/" + session->id());
                        send_json(res, 201, session->snapshot().to_json());
                    },
                    session);
            });
        });

        server.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                nlohmann::json out = nlohmann::json::array();
                for (const auto& s : store->list())
                    out.push_back(session_summary(*s));
                send_json(res, 200, out);
            });
        });

        server.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, store->get(req.matches[1])->snapshot().to_json()); });
        });

        server.Post(R"(/sessions/([^/]+)/plan)", [this](const httplib::Request& req, httplib::Response& res) {
            transition(req, res, [&](Session& s) {
                parse_body(req, true);
                s.propose_plan();
            });
        });

        server.Post(R"(/sessions/([^/]+)/plan/verdict)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        transition(req, res, [&](Session& s) { s.review_plan(plan_verdict_from_body(parse_body(req))); });
                    });

        server.Post(R"(/sessions/([^/]+)/steps/current/run)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        transition(req, res, [&](Session& s) {
                            parse_body(req, true);
                            s.run_step();
                        });
                    });

        server.Post(R"(/sessions/([^/]+)/steps/current/verdict)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        transition(req, res, [&](Session& s) { s.review_step(step_verdict_from_body(parse_body(req))); });
                    });

        server.Get(R"(/sessions/([^/]+)/events)",
                   [this](const httplib::Request& req, httplib::Response& res) { stream_events(req, res); });

        server.Get(R"(/sessions/([^/]+)/artifacts)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                nlohmann::json names = nlohmann::json::array();
                for (const auto& [name, _] : store->get(req.matches[1])->artifacts())
                    names.push_back(name);
                send_json(res, 200, names);
            });
        });

        server.Get(R"(/sessions/([^/]+)/artifacts/([^/]+))",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       guarded(res, [&] {
                           auto files = store->get(req.matches[1])->artifacts();
                           auto it = files.find(req.matches[2]);
                           if (it == files.end()) {
                               send_json(res, 404, {{"error", "unknown artifact '" + std::string(req.matches[2]) + "'"}});
                               return;
                           }
                           res.status = 200;
                           res.set_content(it->second, content_type_for(it->first));
                       });
                   });
    }
};

ApiServer::ApiServer(std::shared_ptr<SessionStore> store, ServiceOptions options) : impl_(std::make_unique<Impl>())
{
    impl_->store = std::move(store);
    impl_->options = std::move(options);
    impl_->install_routes();
}

ApiServer::~ApiServer()
{
    stop();
}

int ApiServer::start()
{
    auto& s = impl_->server;
    int port = impl_->options.port;
    if (port == 0)
        port = s.bind_to_any_port(impl_->options.host);
    else if (!s.bind_to_port(impl_->options.host, port))
        port = -1;
    if (port < 0)
        throw IoError("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void ApiServer::run()
{
    if (!impl_->server.bind_to_port(impl_->options.host, impl_->options.port))
        throw IoError("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
    impl_->server.listen_after_bind();
}

void ApiServer::stop()
{
    if (!impl_)
        return;
    impl_->stopping = true;
    impl_->server.stop();
    if (impl_->thread.joinable())
        impl_->thread.join();
}

} // namespace xtal
