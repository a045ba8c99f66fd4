// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xtal/agents/backend.hpp"
#include "xtal/agents/toolbox.hpp"
#include "xtal/agents/workflow.hpp"

namespace xtal {

inline constexpr int max_reflection_retries = 3;
inline constexpr std::size_t max_summary_bytes = 4096;

// A tool plan is the generator's output for one workflow step:
//
//   {"function name": "step3",
//    "plan": [{"tool": "relax", "args": {"structures": "$prev.candidates"}, "bind": "relaxed"}],
//    "comment": "..."}
//
// String arguments starting with '$' are references: "$name" or "$name.field"
// to an earlier bind in the same plan, "$prev.name[.field]" to the previous
// step's bindings, "$param.name" to a task parameter. Fields index objects by
// key and lists by position. References may appear inside lists and objects.

struct ToolCall {
    std::string tool;
    nlohmann::json args = nlohmann::json::object();
    std::string bind;  // defaults to the tool name

    std::string binding() const { return bind.empty() ? tool : bind; }
};

struct ToolPlan {
    std::string function_name;
    std::vector<ToolCall> calls;
    std::string comment;

    nlohmann::json to_json() const;
};

/// Unparseable or invalid plan. call_index is -1 when not tied to one call.
class PlanError : public Error {
public:
    PlanError(const std::string& what, int call_index = -1) : Error(what), call_index_(call_index) {}
    int call_index() const noexcept { return call_index_; }

private:
    int call_index_;
};

/// A tool raised while the plan ran.
class ToolExecutionError : public Error {
public:
    ToolExecutionError(const std::string& what, int call_index) : Error(what), call_index_(call_index) {}
    int call_index() const noexcept { return call_index_; }

private:
    int call_index_;
};

struct StepResult {
    std::map<std::string, Value> bindings;
    std::string summary;  // at most max_summary_bytes

    static StepResult from_bindings(std::map<std::string, Value> bindings);
    nlohmann::json to_json() const;
    static StepResult from_json(const nlohmann::json& j);
};

/// Rendering of bindings for prompts and people, cut at max_bytes on a UTF-8
/// boundary with a trailing "[truncated]" marker.
std::string summarize_bindings(const std::map<std::string, Value>& bindings, std::size_t max_bytes = max_summary_bytes);

struct StepContext {
    WorkflowStep step;
    std::optional<StepResult> previous_result;  // none for step 1
    std::string step_intuition;
    std::map<std::string, std::string> parameters;
    /// Audit mode: previous bindings are placeholders, so "$prev" references
    /// are checked by name only.
    bool dry_run = false;
};

struct ErrorSignal {
    std::string message;
    int failed_call_index = -1;  // -1: parse or plan-level validation failure
    int attempt = 0;

    nlohmann::json to_json() const;
    static ErrorSignal from_json(const nlohmann::json& j);
};

/// JSON object between the first '{' and the last '}' of the reply. Accepts
/// "function name" or "function_name", and "bind" or "bind_output".
ToolPlan parse_tool_plan(const std::string& text);

/// Checks the function name, tools, argument names, required arguments,
/// literal argument types, references and binding names. Throws PlanError.
void validate_plan(const ToolPlan& plan, const StepContext& ctx, const Toolbox& toolbox);

std::string render_tool_prompt(const StepContext& ctx, const Toolbox& toolbox);
std::string render_revision_prompt(const StepContext& ctx, const Toolbox& toolbox, const std::string& previous_reply,
                                   const ErrorSignal& error);

/// One backend call, parsed and validated.
ToolPlan generate_tool_plan(LanguageBackend& backend, const StepContext& ctx, const Toolbox& toolbox,
                            const DecodeParams& params = {});

/// Runs the calls in order. Throws ToolExecutionError.
StepResult execute_plan(const ToolPlan& plan, const StepContext& ctx, const Toolbox& toolbox,
                        const ToolEnvironment& env);

struct PlanAttempt {
    int attempt = 0;
    std::string prompt;
    std::string reply;
    std::optional<ErrorSignal> error;  // none on success
};

struct ReflectionOutcome {
    std::optional<StepResult> result;
    std::vector<PlanAttempt> attempts;
    int executions = 0;  // plans that passed validation and were run

    bool ok() const noexcept { return result.has_value(); }
    const ErrorSignal& last_error() const { return *attempts.back().error; }
};

using AttemptObserver = std::function<void(const PlanAttempt&)>;

/// Generates and runs a plan; on a parse, validation or runtime error the
/// backend is re-prompted with the error and its previous reply, at most
/// max_retries times. BackendError propagates.
ReflectionOutcome execute_with_reflection(LanguageBackend& backend, const StepContext& ctx, const Toolbox& toolbox,
                                          const ToolEnvironment& env, int max_retries = max_reflection_retries,
                                          const AttemptObserver& observer = {}, const DecodeParams& params = {});

} // namespace xtal
