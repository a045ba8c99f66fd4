// SPDX-License-Identifier: Apache-2.0
#include "xtal/agents/session.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>

#include "xtal/io/cif.hpp"

namespace xtal {

namespace {

constexpr SessionState all_states[] = {SessionState::AwaitingTask, SessionState::PlanProposed,
                                       SessionState::PlanApproved, SessionState::StepExecuting,
                                       SessionState::StepReview,   SessionState::Completed,
                                       SessionState::Failed};

} // namespace

std::string to_string(SessionState s)
{
    switch (s) {
    case SessionState::AwaitingTask: return "AwaitingTask";
    case SessionState::PlanProposed: return "PlanProposed";
    case SessionState::PlanApproved: return "PlanApproved";
    case SessionState::StepExecuting: return "StepExecuting";
    case SessionState::StepReview: return "StepReview";
    case SessionState::Completed: return "Completed";
    case SessionState::Failed: return "Failed";
    }
    return "AwaitingTask";
}

SessionState session_state_from_string(const std::string& s)
{
    for (auto st : all_states)
        if (to_string(st) == s)
            return st;
    throw Error("unknown session state '" + s + "'");
}

nlohmann::json SessionEvent::to_json() const
{
    return {{"seq", seq}, {"time", time}, {"type", type}, {"data", data}};
}

SessionEvent SessionEvent::from_json(const nlohmann::json& j)
{
    try {
        return {j.at("seq").get<int>(), j.at("time").get<std::string>(), j.at("type").get<std::string>(),
                j.value("data", nlohmann::json::object())};
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed session event: ") + e.what());
    }
}

nlohmann::json SessionSnapshot::to_json() const
{
    auto keyed = [](const auto& m, auto fn) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [k, v] : m)
            out[std::to_string(k)] = fn(v);
        return out;
    };
    return {{"id", id},
            {"state", to_string(state)},
            {"task", task ? task->to_json() : nlohmann::json()},
            {"workflow", workflow ? workflow->to_json() : nlohmann::json()},
            {"current_step", current_step},
            {"plan_feedback", plan_feedback},
            {"step_feedback", keyed(step_feedback, [](const std::string& v) { return nlohmann::json(v); })},
            {"results", keyed(results, [](const StepResult& r) { return r.to_json(); })},
            {"attempts", keyed(attempts, [](const std::vector<nlohmann::json>& v) { return nlohmann::json(v); })},
            {"artifacts", keyed(artifacts, [](const std::vector<std::string>& v) { return nlohmann::json(v); })},
            {"last_error", last_error ? last_error->to_json() : nlohmann::json()},
            {"failure_reason", failure_reason},
            {"planning_error", planning_error},
            {"interruption", interruption},
            {"event_count", event_count},
            {"updated_at", updated_at}};
}

namespace {

void expect_state(const SessionSnapshot& s, const SessionEvent& e, std::initializer_list<SessionState> allowed)
{
    for (auto st : allowed)
        if (s.state == st)
            return;
    throw Error("event " + std::to_string(e.seq) + " (" + e.type + ") does not apply in state " + to_string(s.state));
}

WorkflowStep& step_at(SessionSnapshot& s, int t)
{
    if (!s.workflow || t < 1 || t > s.workflow->size())
        throw Error("event refers to step " + std::to_string(t) + " outside the workflow");
    return s.workflow->steps[static_cast<std::size_t>(t - 1)];
}

} // namespace

void apply_event(SessionSnapshot& s, const SessionEvent& e)
{
    using S = SessionState;
    if (e.seq != s.event_count + 1)
        throw Error("event sequence gap: expected " + std::to_string(s.event_count + 1) + ", got " +
                    std::to_string(e.seq));
    const auto& d = e.data;
    try {
        if (e.type == "task_submitted") {
            expect_state(s, e, {S::AwaitingTask});
            s.task = TaskSpec::from_json(d.at("task"));
        } else if (e.type == "planning_failed") {
            s.planning_error = d.at("error").get<std::string>();
        } else if (e.type == "plan_revision_requested") {
            expect_state(s, e, {S::PlanProposed});
            s.plan_feedback.push_back(d.at("feedback").get<std::string>());
        } else if (e.type == "plan_proposed") {
            expect_state(s, e, {S::AwaitingTask, S::PlanProposed});
            if (!s.task)
                throw Error("plan proposed before a task was submitted");
            s.workflow = Workflow::from_json(d.at("workflow"));
            s.planning_error.clear();
            s.state = S::PlanProposed;
        } else if (e.type == "plan_approved") {
            expect_state(s, e, {S::PlanProposed});
            for (auto& st : s.workflow->steps)
                st.status = StepStatus::Approved;
            s.current_step = 1;
            s.state = S::PlanApproved;
        } else if (e.type == "step_started") {
            expect_state(s, e, {S::PlanApproved, S::StepReview});
            step_at(s, d.at("step").get<int>()).status = StepStatus::Executing;
            s.interruption.clear();
            s.state = S::StepExecuting;
        } else if (e.type == "plan_attempt") {
            expect_state(s, e, {S::StepExecuting});
            s.attempts[d.at("step").get<int>()].push_back(d);
        } else if (e.type == "step_completed") {
            expect_state(s, e, {S::StepExecuting});
            int t = d.at("step").get<int>();
            step_at(s, t).status = StepStatus::Done;
            s.results[t] = StepResult::from_json(d.at("result"));
            s.artifacts[t] = d.at("artifacts").get<std::vector<std::string>>();
            s.last_error.reset();
            s.state = S::StepReview;
        } else if (e.type == "step_failed") {
            expect_state(s, e, {S::StepExecuting});
            step_at(s, d.at("step").get<int>()).status = StepStatus::Failed;
            s.last_error = ErrorSignal::from_json(d.at("error"));
            s.failure_reason = "step " + std::to_string(d.at("step").get<int>()) + " failed: " + s.last_error->message;
            s.state = S::Failed;
        } else if (e.type == "step_interrupted") {
            expect_state(s, e, {S::StepExecuting});
            auto resume = session_state_from_string(d.at("resume_state").get<std::string>());
            step_at(s, d.at("step").get<int>()).status =
                resume == S::StepReview ? StepStatus::Done : StepStatus::Approved;
            s.interruption = d.at("message").get<std::string>();
            s.state = resume;
        } else if (e.type == "step_feedback") {
            expect_state(s, e, {S::StepReview});
            s.step_feedback[d.at("step").get<int>()] = d.at("feedback").get<std::string>();
        } else if (e.type == "step_approved") {
            expect_state(s, e, {S::StepReview});
            int t = d.at("step").get<int>();
            if (t >= s.workflow->size()) {
                s.state = S::Completed;
            } else {
                s.current_step = t + 1;
                s.state = S::PlanApproved;
            }
        } else if (e.type == "session_aborted") {
            if (s.state == S::Completed || s.state == S::Failed)
                throw Error("session already finished");
            s.failure_reason = d.at("reason").get<std::string>();
            s.state = S::Failed;
        } else {
            throw Error("unknown event type '" + e.type + "'");
        }
    } catch (const nlohmann::json::exception& ex) {
        throw Error("event " + std::to_string(e.seq) + " (" + e.type + ") is malformed: " + ex.what());
    }
    s.event_count = e.seq;
    s.updated_at = e.time;
}

SessionSnapshot replay(const std::string& id, const std::vector<SessionEvent>& events)
{
    SessionSnapshot s;
    s.id = id;
    for (const auto& e : events)
        apply_event(s, e);
    return s;
}

std::string step_intuition(const SessionSnapshot& s, int t)
{
    if (auto it = s.step_feedback.find(t); it != s.step_feedback.end())
        return it->second;
    if (s.task) {
        if (auto it = s.task->step_intuitions.find(t); it != s.task->step_intuitions.end())
            return it->second;
        return s.task->intuition;
    }
    return {};
}

std::map<std::string, std::string> step_artifacts(int t, const StepResult& r)
{
    std::map<std::string, std::string> out;
    const std::string prefix = "step" + std::to_string(t) + "_";
    auto add_structure = [&](const std::string& name, const Value& v) {
        if (v.kind() == Value::Kind::Structure)
            out[prefix + name + ".cif"] = write_cif(v.as_structure());
        else if (v.kind() == Value::Kind::Object && v.contains("structure") &&
                 v.at("structure").kind() == Value::Kind::Structure)
            out[prefix + name + ".cif"] = write_cif(v.at("structure").as_structure());
    };
    for (const auto& [name, v] : r.bindings) {
        if (v.kind() == Value::Kind::List) {
            const auto& items = v.as_list();
            for (std::size_t i = 0; i < items.size(); ++i)
                add_structure(name + "_" + std::to_string(i), items[i]);
        } else {
            add_structure(name, v);
        }
    }
    out["step" + std::to_string(t) + "_result.json"] = r.to_json().dump(2) + "\n";
    return out;
}

std::map<std::string, std::string> render_artifacts(const SessionSnapshot& s)
{
    std::map<std::string, std::string> out;
    for (const auto& [t, r] : s.results)
        for (auto& [name, text] : step_artifacts(t, r))
            out[name] = std::move(text);
    if (s.state == SessionState::Completed && s.workflow) {
        nlohmann::json steps = nlohmann::json::array();
        for (const auto& st : s.workflow->steps) {
            auto it = s.results.find(st.index);
            steps.push_back({{"index", st.index},
                             {"description", st.description},
                             {"summary", it == s.results.end() ? "" : it->second.summary}});
        }
        auto last = s.results.find(s.workflow->size());
        nlohmann::json report{{"id", s.id},
                              {"task", s.task ? s.task->to_json() : nlohmann::json()},
                              {"steps", steps},
                              {"final", last == s.results.end() ? nlohmann::json() : last->second.to_json()}};
        out["report.json"] = report.dump(2) + "\n";
    }
    return out;
}

std::string utc_now()
{
    using namespace std::chrono;
    auto now = system_clock::now();
    auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    std::time_t tt = system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

std::vector<SessionEvent> load_event_log(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw IoError("cannot read " + file.string());
    std::vector<SessionEvent> events;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty())
            continue;
        try {
            events.push_back(SessionEvent::from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw ParseError(file.string() + ": " + e.what(), n);
        }
    }
    return events;
}

Session::Session(std::string id, SessionConfig config) : id_(std::move(id)), config_(std::move(config))
{
    if (!config_.backend)
        throw Error("session needs a language backend");
    if (!config_.toolbox)
        config_.toolbox = std::make_shared<Toolbox>(default_toolbox());
    if (!config_.environment)
        config_.environment = std::make_shared<ToolEnvironment>();
    if (!config_.clock)
        config_.clock = utc_now;
    snapshot_.id = id_;
    if (config_.workspace)
        std::filesystem::create_directories(*config_.workspace);
}

std::unique_ptr<Session> Session::restore(std::string id, SessionConfig config, std::vector<SessionEvent> events)
{
    auto s = std::make_unique<Session>(std::move(id), std::move(config));
    s->snapshot_ = replay(s->id_, events);
    s->events_ = std::move(events);
    if (s->snapshot_.state == SessionState::StepExecuting) {
        // The process stopped mid-step: close the step as interrupted.
        auto started = std::find_if(s->events_.rbegin(), s->events_.rend(),
                                    [](const SessionEvent& e) { return e.type == "step_started"; });
        std::vector<SessionEvent> before(s->events_.begin(), std::prev(started.base()));
        auto resume = replay(s->id_, before).state;
        s->emit("step_interrupted", {{"step", s->snapshot_.current_step},
                                     {"message", "the step was still running when the session was last saved"},
                                     {"resume_state", to_string(resume)}});
    }
    return s;
}

SessionState Session::state() const
{
    std::lock_guard lock(state_mutex_);
    return snapshot_.state;
}

SessionSnapshot Session::snapshot() const
{
    std::lock_guard lock(state_mutex_);
    return snapshot_;
}

std::vector<SessionEvent> Session::events() const
{
    std::lock_guard lock(state_mutex_);
    return events_;
}

std::vector<SessionEvent> Session::events_since(int seq) const
{
    std::lock_guard lock(state_mutex_);
    std::vector<SessionEvent> out;
    for (const auto& e : events_)
        if (e.seq > seq)
            out.push_back(e);
    return out;
}

std::map<std::string, std::string> Session::artifacts() const
{
    return render_artifacts(snapshot());
}

int Session::subscribe(Subscriber fn)
{
    std::lock_guard lock(state_mutex_);
    subscribers_.emplace(next_token_, std::move(fn));
    return next_token_++;
}

void Session::unsubscribe(int token)
{
    std::lock_guard lock(state_mutex_);
    subscribers_.erase(token);
}

void Session::emit(const std::string& type, nlohmann::json data)
{
    std::lock_guard lock(state_mutex_);
    SessionEvent e{static_cast<int>(events_.size()) + 1, config_.clock(), type, std::move(data)};
    apply_event(snapshot_, e);
    events_.push_back(e);
    if (config_.workspace) {
        std::ofstream log(*config_.workspace / "events.jsonl", std::ios::app);
        log << e.to_json().dump() << "\n";
        if (!log)
            throw IoError("cannot append to " + (*config_.workspace / "events.jsonl").string());
    }
    for (const auto& [token, fn] : subscribers_)
        fn(e);
}

void Session::require(bool ok, const std::string& action) const
{
    if (!ok)
        throw IllegalTransition(action, state());
}

void Session::write_artifacts(const std::map<std::string, std::string>& files) const
{
    if (!config_.workspace)
        return;
    for (const auto& [name, text] : files) {
        std::ofstream out(*config_.workspace / name, std::ios::binary);
        out << text;
        if (!out)
            throw IoError("cannot write " + (*config_.workspace / name).string());
    }
}

void Session::plan(std::vector<std::string> feedback)
{
    const TaskSpec task = *snapshot().task;
    try {
        auto wf = plan_workflow(*config_.backend, task, feedback, config_.decode);
        emit("plan_proposed", {{"workflow", wf.to_json()}});
    } catch (const Error& e) {
        emit("planning_failed", {{"error", e.what()}});
        throw;
    }
}

void Session::submit_task(const TaskSpec& task)
{
    std::lock_guard lock(transition_mutex_);
    auto s = snapshot();
    require(s.state == SessionState::AwaitingTask && !s.task, "submit a task");
    task.validate();
    emit("task_submitted", {{"task", task.to_json()}});
    plan({});
}

void Session::propose_plan()
{
    std::lock_guard lock(transition_mutex_);
    auto s = snapshot();
    require(s.state == SessionState::AwaitingTask && s.task.has_value(), "propose a plan");
    plan(s.plan_feedback);
}

void Session::review_plan(const PlanVerdict& verdict)
{
    std::lock_guard lock(transition_mutex_);
    auto s = snapshot();
    require(s.state == SessionState::PlanProposed, "review the plan");
    if (verdict.kind == PlanVerdict::Kind::Approve) {
        emit("plan_approved", {{"source", verdict.source}});
        return;
    }
    if (verdict.feedback.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error("plan revision needs feedback text");
    emit("plan_revision_requested", {{"feedback", verdict.feedback}, {"source", verdict.source}});
    plan(snapshot().plan_feedback);
}

void Session::run_step()
{
    std::lock_guard lock(transition_mutex_);
    auto st = state();
    require(st == SessionState::PlanApproved || st == SessionState::StepReview, "run a step");
    execute_current(to_string(st));
}

void Session::execute_current(const std::string& resume_state)
{
    auto s = snapshot();
    const int t = s.current_step;
    StepContext ctx;
    ctx.step = s.workflow->steps[static_cast<std::size_t>(t - 1)];
    if (auto it = s.results.find(t - 1); t > 1 && it != s.results.end())
        ctx.previous_result = it->second;
    ctx.step_intuition = step_intuition(s, t);
    ctx.parameters = s.task->parameters;

    emit("step_started", {{"step", t}, {"intuition", ctx.step_intuition}});
    ReflectionOutcome outcome;
    try {
        outcome = execute_with_reflection(
            *config_.backend, ctx, *config_.toolbox, *config_.environment, config_.max_retries,
            [&](const PlanAttempt& a) {
                emit("plan_attempt", {{"step", t},
                                      {"attempt", a.attempt},
                                      {"reply", a.reply},
                                      {"error", a.error ? a.error->to_json() : nlohmann::json()}});
            },
            config_.decode);
    } catch (const std::exception& e) {
        emit("step_interrupted", {{"step", t}, {"message", e.what()}, {"resume_state", resume_state}});
        throw;
    }
    if (!outcome.ok()) {
        emit("step_failed", {{"step", t}, {"error", outcome.last_error().to_json()}});
        return;
    }
    auto files = step_artifacts(t, *outcome.result);
    nlohmann::json names = nlohmann::json::array();
    for (const auto& [name, text] : files)
        names.push_back(name);
    emit("step_completed", {{"step", t}, {"result", outcome.result->to_json()}, {"artifacts", names}});
    write_artifacts(files);
}

void Session::review_step(const StepVerdict& verdict)
{
    std::lock_guard lock(transition_mutex_);
    auto s = snapshot();
    require(s.state == SessionState::StepReview, "review a step");
    const int t = s.current_step;
    switch (verdict.kind) {
    case StepVerdict::Kind::Approve:
        emit("step_approved", {{"step", t}, {"source", verdict.source}});
        if (state() == SessionState::Completed) {
            auto files = render_artifacts(snapshot());
            write_artifacts({{"report.json", files.at("report.json")}});
        }
        return;
    case StepVerdict::Kind::Feedback:
        if (verdict.text.find_first_not_of(" \t\r\n") == std::string::npos)
            throw Error("step feedback needs text");
        emit("step_feedback", {{"step", t}, {"feedback", verdict.text}, {"source", verdict.source}});
        execute_current(to_string(SessionState::StepReview));
        return;
    case StepVerdict::Kind::Abort:
        emit("session_aborted",
             {{"reason", verdict.text.empty() ? "aborted at step " + std::to_string(t) : verdict.text},
              {"source", verdict.source}});
        return;
    }
}

SessionState autopilot(Session& session, AutopilotPolicy policy)
{
    bool ran = false;
    while (true) {
        switch (session.state()) {
        case SessionState::AwaitingTask:
            if (!session.snapshot().task)
                throw Error("autopilot needs a submitted task");
            session.propose_plan();
            break;
        case SessionState::PlanProposed:
            session.review_plan({PlanVerdict::Kind::Approve, "", "autopilot"});
            break;
        case SessionState::PlanApproved:
            session.run_step();
            ran = true;
            break;
        case SessionState::StepReview:
            if (policy == AutopilotPolicy::ApproveAllPlansOnly) {
                if (ran)
                    return SessionState::StepReview;
                session.run_step();
                ran = true;
                break;
            }
            session.review_step({StepVerdict::Kind::Approve, "", "autopilot"});
            break;
        case SessionState::StepExecuting:
        case SessionState::Completed:
        case SessionState::Failed:
            return session.state();
        }
    }
}

} // namespace xtal
