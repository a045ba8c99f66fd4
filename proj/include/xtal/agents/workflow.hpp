// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "xtal/agents/backend.hpp"

namespace xtal {

inline constexpr int max_workflow_steps = 5;
inline constexpr int planner_reprompts = 2;

enum class TaskKind { CSG, CSP, PropertyGuided };

std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

struct TaskSpec {
    std::string task;       // what to do
    std::string intuition;  // global expert guidance, may be empty
    TaskKind kind = TaskKind::CSP;
    /// e.g. composition -> "Ba2Fe2F9", constraint -> "bandgap>3"
    std::map<std::string, std::string> parameters;
    /// Optional per-step guidance overriding `intuition` for that step (1-based).
    std::map<int, std::string> step_intuitions;

    /// Throws xtal::Error when task is empty.
    void validate() const;
    nlohmann::json to_json() const;
    static TaskSpec from_json(const nlohmann::json& j);
};

enum class StepStatus { Pending, Approved, Executing, Done, Failed };

std::string to_string(StepStatus s);

struct WorkflowStep {
    int index = 1;
    std::string description;
    StepStatus status = StepStatus::Pending;
};

struct Workflow {
    std::vector<WorkflowStep> steps;
    std::string raw_text;

    int size() const noexcept { return static_cast<int>(steps.size()); }
    nlohmann::json to_json() const;
    static Workflow from_json(const nlohmann::json& j);
};

/// Planner reply with no usable "Step N:" lines, or numbering that is not 1..T.
class WorkflowParseError : public Error {
public:
    using Error::Error;
};

/// Planner reply with more than max_workflow_steps steps.
class StepCountError : public Error {
public:
    using Error::Error;
};

/// Planner prompt for a task. Empty intuition renders as an empty quoted field.
std::string render_planner_prompt(const std::string& task, const std::string& intuition);

/// "Step N: text" lines; following non-blank lines that are not another step
/// continue the description. Text before the first step and after a blank
/// line following the last step (the approval note) is ignored.
Workflow parse_workflow(const std::string& text);

/// Asks the backend for a plan; unparseable replies are re-prompted up to
/// planner_reprompts times. StepCountError is raised immediately. Extra
/// feedback lines (plan revisions) are appended to the intuition.
Workflow plan_workflow(LanguageBackend& backend, const TaskSpec& task, const std::vector<std::string>& feedback = {},
                       const DecodeParams& params = {});

} // namespace xtal
