// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <thread>

#include "agent_helpers.hpp"
#include "xtal/service/service.hpp"

// After the xtal headers: httplib pulls in <resolv.h>, whose _res macro
// breaks Eigen.
#include <httplib.h>

using namespace xtal;
using namespace xtal::testing;
using nlohmann::json;

namespace {

const std::string task_body = R"({"task": "Predict the stable crystal structure of Ba2Fe2F9.",
    "intuition": "Start from known fluoride prototypes with the same stoichiometry and relax them with the force field.",
    "kind": "csp", "parameters": {"composition": "Ba2Fe2F9"}})";

/// Every session gets its own copy of `fixture` and a counter clock.
std::function<SessionConfig()> config_factory(std::string fixture = "agents/csp_ba2fe2f9.json")
{
    auto env = csp_environment();
    return [env, fixture] {
        return session_config(std::make_shared<ScriptedBackend>(ScriptedBackend::load(fixture_path(fixture))), env);
    };
}

struct Harness {
    std::shared_ptr<SessionStore> store;
    std::unique_ptr<ApiServer> server;
    int port = 0;

    explicit Harness(std::function<SessionConfig()> make = config_factory(),
                     std::optional<std::filesystem::path> root = {}, std::optional<std::string> token = {})
        : store(std::make_shared<SessionStore>(std::move(make), std::move(root)))
    {
        ServiceOptions o;
        o.port = 0;
        o.token = std::move(token);
        server = std::make_unique<ApiServer>(store, o);
        port = server->start();
    }

    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }
};

json body_of(const httplib::Result& r)
{
    REQUIRE(r);
    return json::parse(r->body);
}

httplib::Result post(httplib::Client& c, const std::string& path, const std::string& body = "{}")
{
    return c.Post(path, body, "application/json");
}

/// Drives a planned session through approve/run/approve to the end. Uses
/// CHECK only, so it may run on worker threads.
void drive_to_completion(httplib::Client& c, const std::string& id)
{
    auto status = [](const httplib::Result& r) { return r ? r->status : -1; };
    CHECK(status(post(c, "/sessions/" + id + "/plan/verdict", R"({"verdict": "approve"})")) == 200);
    for (int t = 1; t <= 5; ++t) {
        auto run = post(c, "/sessions/" + id + "/steps/current/run");
        CHECK(status(run) == 200);
        CHECK(status(post(c, "/sessions/" + id + "/steps/current/verdict", R"({"verdict": "approve"})")) == 200);
    }
}

std::vector<json> parse_sse(const std::string& text)
{
    std::vector<json> out;
    std::size_t pos = 0;
    while ((pos = text.find("data: ", pos)) != std::string::npos) {
        auto end = text.find('\n', pos);
        out.push_back(json::parse(text.substr(pos + 6, end - pos - 6)));
        pos = end;
    }
    return out;
}

} // namespace

TEST_CASE("creating a session plans the task")
{
    Harness h;
    auto c = h.client();
    auto r = post(c, "/sessions", task_body);
    REQUIRE(r);
    CHECK(r->status == 201);
    auto snap = body_of(r);
    CHECK(snap["state"] == "PlanProposed");
    CHECK(snap["workflow"]["steps"].size() == 5);
    CHECK(r->get_header_value("Location") == "/sessions/" + snap["id"].get<std::string>());

    auto list = body_of(c.Get("/sessions"));
    REQUIRE(list.size() == 1);
    CHECK(list[0]["id"] == snap["id"]);
    CHECK(list[0]["state"] == "PlanProposed");
    CHECK(list[0]["task"] == "Predict the stable crystal structure of Ba2Fe2F9.");
    CHECK(list[0]["steps"] == 5);
    CHECK(list[0]["created_at"] == "t0001");

    auto got = c.Get("/sessions/" + snap["id"].get<std::string>());
    CHECK(got->status == 200);
    CHECK(body_of(got) == snap);
}

TEST_CASE("plan approval and illegal transitions")
{
    Harness h;
    auto c = h.client();
    auto id = body_of(post(c, "/sessions", task_body))["id"].get<std::string>();

    auto early = post(c, "/sessions/" + id + "/steps/current/run");
    CHECK(early->status == 409);
    CHECK(body_of(early)["state"] == "PlanProposed");
    CHECK(body_of(early)["error"].get<std::string>().find("PlanProposed") != std::string::npos);

    auto ok = post(c, "/sessions/" + id + "/plan/verdict", R"({"verdict": "approve"})");
    CHECK(ok->status == 200);
    CHECK(body_of(ok)["state"] == "PlanApproved");
    CHECK(body_of(ok)["current_step"] == 1);

    auto again = post(c, "/sessions/" + id + "/plan/verdict", R"({"verdict": "approve"})");
    CHECK(again->status == 409);
    CHECK(body_of(again)["state"] == "PlanApproved");
}

TEST_CASE("a session whose planning failed sits in AwaitingTask")
{
    // The backend has no replies, so planning fails with a backend error.
    Harness h([env = csp_environment()] {
        return session_config(std::make_shared<ScriptedBackend>(std::vector<ScriptedResponse>{}), env);
    });
    auto c = h.client();
    auto r = post(c, "/sessions", task_body);
    CHECK(r->status == 502);
    auto body = body_of(r);
    CHECK(body["error"].get<std::string>().find("scripted") != std::string::npos);
    CHECK(body["session"]["state"] == "AwaitingTask");
    auto id = body["session"]["id"].get<std::string>();

    auto run = post(c, "/sessions/" + id + "/steps/current/run");
    CHECK(run->status == 409);
    CHECK(body_of(run)["state"] == "AwaitingTask");

    auto retry = post(c, "/sessions/" + id + "/plan");
    CHECK(retry->status == 502);
    CHECK(body_of(retry)["session"]["planning_error"] != "");
}

TEST_CASE("request validation and unknown resources")
{
    Harness h;
    auto c = h.client();
    CHECK(c.Get("/sessions/nope")->status == 404);
    CHECK(post(c, "/sessions/nope/steps/current/run")->status == 404);
    CHECK(c.Get("/sessions/nope/events")->status == 404);

    CHECK(post(c, "/sessions", "{not json")->status == 422);
    CHECK(post(c, "/sessions", "[]")->status == 422);
    CHECK(post(c, "/sessions", R"({"intuition": "x"})")->status == 422);
    CHECK(post(c, "/sessions", R"({"task": "x", "kind": "alchemy"})")->status == 422);
    CHECK(post(c, "/sessions", R"({"task": "x", "colour": "red"})")->status == 422);
    CHECK(h.store->list().empty());

    auto id = body_of(post(c, "/sessions", task_body))["id"].get<std::string>();
    auto verdict = [&](const std::string& b) { return post(c, "/sessions/" + id + "/plan/verdict", b)->status; };
    CHECK(verdict("") == 422);
    CHECK(verdict(R"({"verdict": "maybe"})") == 422);
    CHECK(verdict(R"({"verdict": "revise"})") == 422);
    CHECK(verdict(R"({"verdict": 1})") == 422);
    CHECK(verdict(R"({"verdict": "approve", "extra": true})") == 422);
    CHECK(body_of(c.Get("/sessions/" + id))["state"] == "PlanProposed");

    CHECK(verdict(R"({"verdict": "approve"})") == 200);
    REQUIRE(post(c, "/sessions/" + id + "/steps/current/run")->status == 200);
    auto step = [&](const std::string& b) { return post(c, "/sessions/" + id + "/steps/current/verdict", b)->status; };
    CHECK(step(R"({"verdict": "feedback"})") == 422);
    CHECK(step(R"({"verdict": "skip"})") == 422);
    CHECK(c.Get("/sessions/" + id + "/artifacts/missing.cif")->status == 404);
}

TEST_CASE("a full session over HTTP with artifact downloads")
{
    Harness h;
    auto c = h.client();
    auto id = body_of(post(c, "/sessions", task_body))["id"].get<std::string>();
    drive_to_completion(c, id);

    auto snap = body_of(c.Get("/sessions/" + id));
    CHECK(snap["state"] == "Completed");
    CHECK(snap["results"].size() == 5);

    auto names = body_of(c.Get("/sessions/" + id + "/artifacts"));
    CHECK(std::find(names.begin(), names.end(), "report.json") != names.end());
    CHECK(std::find(names.begin(), names.end(), "step5_final.cif") != names.end());

    auto cif = c.Get("/sessions/" + id + "/artifacts/step5_final.cif");
    REQUIRE(cif->status == 200);
    CHECK(cif->get_header_value("Content-Type") == "chemical/x-cif");
    CHECK(cif->body.find("_cell_length_a") != std::string::npos);
    auto report = c.Get("/sessions/" + id + "/artifacts/report.json");
    CHECK(report->get_header_value("Content-Type") == "application/json");
    CHECK(json::parse(report->body)["steps"].size() == 5);
}

TEST_CASE("API and direct drivers write identical event logs")
{
    Harness h;
    auto c = h.client();
    auto id = body_of(post(c, "/sessions", task_body))["id"].get<std::string>();
    drive_to_completion(c, id);
    auto api_events = h.store->get(id)->events();

    Session direct(id, config_factory()());
    direct.submit_task(TaskSpec::from_json(json::parse(task_body)));
    direct.review_plan({});
    for (int t = 1; t <= 5; ++t) {
        direct.run_step();
        direct.review_step({});
    }
    CHECK(direct.state() == SessionState::Completed);
    auto direct_events = direct.events();

    REQUIRE(api_events.size() == direct_events.size());
    for (std::size_t i = 0; i < api_events.size(); ++i)
        CHECK(api_events[i].to_json() == direct_events[i].to_json());
}

TEST_CASE("event stream replays history and then tails live events")
{
    Harness h;
    auto c = h.client();
    auto id = body_of(post(c, "/sessions", task_body))["id"].get<std::string>();

    std::string streamed;
    std::thread reader([&] {
        auto sc = h.client();
        auto r = sc.Get("/sessions/" + id + "/events", [&](const char* data, std::size_t n) {
            streamed.append(data, n);
            return true;
        });
        CHECK(r);
        if (r)
            CHECK(r->get_header_value("Content-Type") == "text/event-stream");
    });
    // Let the reader receive history before the session moves on.
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    drive_to_completion(c, id);
    reader.join();  // the stream ends once the session is terminal

    auto events = parse_sse(streamed);
    auto log = h.store->get(id)->events();
    REQUIRE(events.size() == log.size());
    for (std::size_t i = 0; i < log.size(); ++i)
        CHECK(events[i] == log[i].to_json());

    // Resuming after a known sequence number.
    auto tail = parse_sse(c.Get("/sessions/" + id + "/events?since=10")->body);
    REQUIRE(tail.size() == log.size() - 10);
    CHECK(tail.front()["seq"] == 11);
    httplib::Headers hdr = {{"Last-Event-ID", std::to_string(log.size() - 1)}};
    auto last = parse_sse(c.Get("/sessions/" + id + "/events", hdr)->body);
    REQUIRE(last.size() == 1);
    CHECK(last[0]["type"] == "step_approved");
}

TEST_CASE("backend failures during a step surface as 502 and revert the state")
{
    // Planner reply only: the first tool-plan request finds the script exhausted.
    Harness h([env = csp_environment()] {
        auto full = ScriptedBackend::load(fixture_path("agents/csp_ba2fe2f9.json"));
        auto first = full.complete("Task:\"Predict the stable crystal structure of Ba2Fe2F9");
        return session_config(std::make_shared<ScriptedBackend>(std::vector<ScriptedResponse>{{"", first}}), env);
    });
    auto c = h.client();
    auto id = body_of(post(c, "/sessions", task_body))["id"].get<std::string>();
    REQUIRE(post(c, "/sessions/" + id + "/plan/verdict", R"({"verdict": "approve"})")->status == 200);
    auto run = post(c, "/sessions/" + id + "/steps/current/run");
    CHECK(run->status == 502);
    auto body = body_of(run);
    CHECK(body["session"]["state"] == "PlanApproved");
    CHECK(body["session"]["interruption"] == body["error"]);
}

TEST_CASE("sessions survive a restart through their event logs")
{
    TempDir dir("service_restart");
    std::string id;
    json before;
    {
        Harness h(config_factory(), dir.path);
        auto c = h.client();
        id = body_of(post(c, "/sessions", task_body))["id"].get<std::string>();
        REQUIRE(post(c, "/sessions/" + id + "/plan/verdict", R"({"verdict": "approve"})")->status == 200);
        REQUIRE(post(c, "/sessions/" + id + "/steps/current/run")->status == 200);
        before = body_of(c.Get("/sessions/" + id));
    }
    // The restored session's scripted backend restarts from the top of the
    // fixture, so continue with a backend that skips the planner reply.
    auto resume = [env = csp_environment()] {
        auto b = std::make_shared<ScriptedBackend>(ScriptedBackend::load(fixture_path("agents/csp_ba2fe2f9.json")));
        b->complete("Task:\"Predict the stable crystal structure of Ba2Fe2F9");
        b->complete("must define exactly one unique function named 'step1'");
        return session_config(b, env);
    };
    Harness h(resume, dir.path);
    CHECK(h.store->restored() == 1);
    auto c = h.client();
    auto after = body_of(c.Get("/sessions/" + id));
    CHECK(after == before);
    CHECK(after["state"] == "StepReview");

    REQUIRE(post(c, "/sessions/" + id + "/steps/current/verdict", R"({"verdict": "approve"})")->status == 200);
    for (int t = 2; t <= 5; ++t) {
        REQUIRE(post(c, "/sessions/" + id + "/steps/current/run")->status == 200);
        REQUIRE(post(c, "/sessions/" + id + "/steps/current/verdict", R"({"verdict": "approve"})")->status == 200);
    }
    CHECK(body_of(c.Get("/sessions/" + id))["state"] == "Completed");
    CHECK(std::filesystem::exists(dir.path / id / "report.json"));

    CHECK(h.store->create()->id() == "s0002");
}

TEST_CASE("a log that ends mid-step is closed as interrupted on restore")
{
    TempDir dir("service_midstep");
    {
        Session s("s0001", [&] {
            auto c = config_factory()();
            c.workspace = dir.path / "s0001";
            return c;
        }());
        s.submit_task(csp_task());
        s.review_plan({});
    }
    // Simulate a crash right after the step started.
    {
        std::ofstream log(dir.path / "s0001" / "events.jsonl", std::ios::app);
        log << SessionEvent{4, "t0004", "step_started", {{"step", 1}, {"intuition", ""}}}.to_json().dump() << "\n";
    }
    SessionStore store(config_factory(), dir.path);
    auto s = store.get("s0001");
    CHECK(s->state() == SessionState::PlanApproved);
    CHECK(s->events().back().type == "step_interrupted");
    CHECK_FALSE(s->snapshot().interruption.empty());
}

TEST_CASE("bearer token")
{
    Harness h(config_factory(), {}, std::string("s3cret"));
    auto c = h.client();
    CHECK(c.Get("/sessions")->status == 401);
    c.set_bearer_token_auth("wrong");
    CHECK(c.Get("/sessions")->status == 401);
    c.set_bearer_token_auth("s3cret");
    CHECK(c.Get("/sessions")->status == 200);
}

TEST_CASE("independent sessions run concurrently")
{
    Harness h;
    std::vector<std::thread> threads;
    std::vector<std::string> ids(6);
    for (std::size_t i = 0; i < ids.size(); ++i)
        threads.emplace_back([&, i] {
            auto c = h.client();
            auto r = post(c, "/sessions", task_body);
            CHECK(r);
            if (!r)
                return;
            ids[i] = json::parse(r->body)["id"].get<std::string>();
            drive_to_completion(c, ids[i]);
        });
    for (auto& t : threads)
        t.join();
    auto c = h.client();
    auto list = body_of(c.Get("/sessions"));
    REQUIRE(list.size() == ids.size());
    for (const auto& s : list)
        CHECK(s["state"] == "Completed");
}
