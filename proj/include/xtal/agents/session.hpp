// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xtal/agents/tool_plan.hpp"

namespace xtal {

enum class SessionState { AwaitingTask, PlanProposed, PlanApproved, StepExecuting, StepReview, Completed, Failed };

std::string to_string(SessionState s);
SessionState session_state_from_string(const std::string& s);

class IllegalTransition : public Error {
public:
    IllegalTransition(const std::string& action, SessionState current)
        : Error("cannot " + action + " in state " + to_string(current)), current_(current)
    {
    }
    SessionState current() const noexcept { return current_; }

private:
    SessionState current_;
};

struct SessionEvent {
    int seq = 0;
    std::string time;
    std::string type;
    nlohmann::json data = nlohmann::json::object();

    nlohmann::json to_json() const;
    static SessionEvent from_json(const nlohmann::json& j);
};

/// Everything a session knows, derived only from its events.
struct SessionSnapshot {
    std::string id;
    SessionState state = SessionState::AwaitingTask;
    std::optional<TaskSpec> task;
    std::optional<Workflow> workflow;
    int current_step = 0;  // 1-based once the plan is approved
    std::vector<std::string> plan_feedback;
    std::map<int, std::string> step_feedback;  // latest Feedback verdict per step
    std::map<int, StepResult> results;
    std::map<int, std::vector<nlohmann::json>> attempts;  // plan_attempt payloads per step
    std::map<int, std::vector<std::string>> artifacts;
    std::optional<ErrorSignal> last_error;
    std::string failure_reason;
    std::string planning_error;  // last planner failure, cleared by a new plan
    std::string interruption;    // last backend failure during a step
    int event_count = 0;
    std::string updated_at;

    nlohmann::json to_json() const;
};

/// Applies one event. Throws xtal::Error on an event that does not fit.
void apply_event(SessionSnapshot& s, const SessionEvent& e);
SessionSnapshot replay(const std::string& id, const std::vector<SessionEvent>& events);

/// Reads an events.jsonl log. Throws IoError, or ParseError naming the line.
std::vector<SessionEvent> load_event_log(const std::filesystem::path& file);

/// Intuition for step t: a Feedback verdict, else the task's per-step
/// intuition, else the global one.
std::string step_intuition(const SessionSnapshot& s, int t);

/// Artifact files derivable from the snapshot: step{t}_{binding}.cif (list
/// items get a _{i} suffix), step{t}_result.json, and report.json once
/// the session has completed.
std::map<std::string, std::string> render_artifacts(const SessionSnapshot& s);
std::map<std::string, std::string> step_artifacts(int t, const StepResult& r);

using Clock = std::function<std::string()>;
/// ISO-8601 UTC wall clock with milliseconds.
std::string utc_now();

struct SessionConfig {
    BackendPtr backend;
    std::shared_ptr<const Toolbox> toolbox;
    std::shared_ptr<const ToolEnvironment> environment;
    int max_retries = max_reflection_retries;
    DecodeParams decode;
    std::optional<std::filesystem::path> workspace;  // events.jsonl and artifacts
    Clock clock = utc_now;
};

struct PlanVerdict {
    enum class Kind { Approve, Revise } kind = Kind::Approve;
    std::string feedback;
    std::string source = "human";
};

struct StepVerdict {
    enum class Kind { Approve, Feedback, Abort } kind = Kind::Approve;
    std::string text;
    std::string source = "human";
};

/// One mediated discovery session. Transitions are serialized; reads may run
/// concurrently with a transition and observe its intermediate events.
class Session {
public:
    Session(std::string id, SessionConfig config);

    /// Rebuilds a session from its log (no events are re-written). A log that
    /// ends mid-step gets a step_interrupted event appended.
    static std::unique_ptr<Session> restore(std::string id, SessionConfig config, std::vector<SessionEvent> events);

    /// AwaitingTask -> PlanProposed. Planning errors are logged, leave the
    /// state unchanged and are rethrown.
    void submit_task(const TaskSpec& task);
    /// Re-plans after a planning failure (AwaitingTask with a task).
    void propose_plan();
    void review_plan(const PlanVerdict& verdict);
    /// PlanApproved or StepReview -> StepExecuting -> StepReview, or Failed
    /// when reflection is exhausted. BackendError is rethrown after the
    /// state reverts.
    void run_step();
    void review_step(const StepVerdict& verdict);

    const std::string& id() const noexcept { return id_; }
    SessionState state() const;
    SessionSnapshot snapshot() const;
    std::vector<SessionEvent> events() const;
    std::vector<SessionEvent> events_since(int seq) const;

    std::map<std::string, std::string> artifacts() const;

    using Subscriber = std::function<void(const SessionEvent&)>;
    int subscribe(Subscriber fn);
    void unsubscribe(int token);

private:
    void emit(const std::string& type, nlohmann::json data);
    void plan(std::vector<std::string> feedback);
    void execute_current(const std::string& resume_state);
    void require(bool ok, const std::string& action) const;
    void write_artifacts(const std::map<std::string, std::string>& files) const;

    std::string id_;
    SessionConfig config_;
    mutable std::mutex transition_mutex_;
    mutable std::mutex state_mutex_;
    SessionSnapshot snapshot_;
    std::vector<SessionEvent> events_;
    std::map<int, Subscriber> subscribers_;
    int next_token_ = 0;
};

enum class AutopilotPolicy { ApproveAll, ApproveAllPlansOnly };

/// ApproveAll drives the session to Completed or Failed. ApproveAllPlansOnly
/// approves the plan and runs the current step, then stops at StepReview for
/// a human verdict.
SessionState autopilot(Session& session, AutopilotPolicy policy);

} // namespace xtal
