// SPDX-License-Identifier: Apache-2.0
#include "xtal/agents/workflow.hpp"

#include <regex>
#include <sstream>

namespace xtal {

std::string to_string(TaskKind k)
{
    switch (k) {
    case TaskKind::CSG: return "csg";
    case TaskKind::CSP: return "csp";
    case TaskKind::PropertyGuided: return "prop";
    }
    return "csp";
}

TaskKind task_kind_from_string(const std::string& s)
{
    if (s == "csg")
        return TaskKind::CSG;
    if (s == "csp")
        return TaskKind::CSP;
    if (s == "prop")
        return TaskKind::PropertyGuided;
    throw Error("unknown task kind '" + s + "' (expected csg, csp or prop)");
}

void TaskSpec::validate() const
{
    if (task.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error("task description must not be empty");
    for (const auto& [t, _] : step_intuitions)
        if (t < 1 || t > max_workflow_steps)
            throw Error("step intuition index " + std::to_string(t) + " is outside 1.." +
                        std::to_string(max_workflow_steps));
}

nlohmann::json TaskSpec::to_json() const
{
    nlohmann::json steps = nlohmann::json::object();
    for (const auto& [t, text] : step_intuitions)
        steps[std::to_string(t)] = text;
    return {{"task", task},
            {"intuition", intuition},
            {"kind", to_string(kind)},
            {"parameters", parameters},
            {"step_intuitions", steps}};
}

TaskSpec TaskSpec::from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw Error("task must be a JSON object");
    TaskSpec t;
    try {
        t.task = j.at("task").get<std::string>();
        t.intuition = j.value("intuition", "");
        t.kind = task_kind_from_string(j.value("kind", "csp"));
        if (j.contains("parameters"))
            t.parameters = j["parameters"].get<std::map<std::string, std::string>>();
        if (j.contains("step_intuitions"))
            for (const auto& [k, v] : j["step_intuitions"].items())
                t.step_intuitions[std::stoi(k)] = v.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("invalid task: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw Error("invalid task: step_intuitions keys must be step numbers");
    }
    t.validate();
    return t;
}

std::string to_string(StepStatus s)
{
    switch (s) {
    case StepStatus::Pending: return "pending";
    case StepStatus::Approved: return "approved";
    case StepStatus::Executing: return "executing";
    case StepStatus::Done: return "done";
    case StepStatus::Failed: return "failed";
    }
    return "pending";
}

nlohmann::json Workflow::to_json() const
{
    nlohmann::json steps_json = nlohmann::json::array();
    for (const auto& s : steps)
        steps_json.push_back({{"index", s.index}, {"description", s.description}, {"status", to_string(s.status)}});
    return {{"steps", steps_json}, {"raw_text", raw_text}};
}

Workflow Workflow::from_json(const nlohmann::json& j)
{
    Workflow w;
    w.raw_text = j.at("raw_text").get<std::string>();
    for (const auto& s : j.at("steps")) {
        WorkflowStep step;
        step.index = s.at("index").get<int>();
        step.description = s.at("description").get<std::string>();
        auto status = s.value("status", "pending");
        for (auto st : {StepStatus::Pending, StepStatus::Approved, StepStatus::Executing, StepStatus::Done,
                        StepStatus::Failed})
            if (to_string(st) == status)
                step.status = st;
        w.steps.push_back(step);
    }
    return w;
}

// Protocol text: the planner template is reproduced exactly, including its
// punctuation, because prompt wording is part of the planner contract.
std::string render_planner_prompt(const std::string& task, const std::string& intuition)
{
    std::string p;
    p += "You are a Workflow Planner. Based on the task requirements and human expert intuition, provide a workflow "
         "as a list of necessary steps.\n";
    p += "The workflow should contain no more than 5 steps.\n";
    p += "Each step must involve data processing \u2014 steps such as environment setup, loading models, or loading "
         "data are not considered complete steps by themselves. End your output with a note for human approval or "
         "feedback.\n";
    p += "Each step should be detailed and written on a new line:\n\n";
    p += "Step 1:\n\nStep 2:\n\n...\n\n";
    p += "Task:\"" + task + "\"\n\n";
    p += "Human intuition:\"" + intuition + "\"\n";
    return p;
}

Workflow parse_workflow(const std::string& text)
{
    static const std::regex step_re(R"(^\s*(?:\*\*)?Step\s+(\d+)\s*(?:\*\*)?\s*[:.]\s*(?:\*\*)?\s*(.*)$)",
                                    std::regex::icase);
    Workflow w;
    w.raw_text = text;
    std::istringstream in(text);
    std::string line;
    bool in_step = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        std::smatch m;
        if (std::regex_match(line, m, step_re)) {
            WorkflowStep s;
            s.index = std::stoi(m[1].str());
            s.description = m[2].str();
            w.steps.push_back(s);
            in_step = true;
        } else if (line.find_first_not_of(" \t") == std::string::npos) {
            // a blank line ends a step once it has text; "Step 1:\n\ntext" keeps going
            if (in_step && !w.steps.back().description.empty())
                in_step = false;
        } else if (in_step) {
            auto& d = w.steps.back().description;
            auto start = line.find_first_not_of(" \t");
            d += (d.empty() ? "" : " ") + line.substr(start);
        }
    }
    for (auto& s : w.steps)
        while (!s.description.empty() && (s.description.back() == ' ' || s.description.back() == '\t'))
            s.description.pop_back();

    if (w.steps.empty())
        throw WorkflowParseError("no \"Step N:\" lines found");
    if (static_cast<int>(w.steps.size()) > max_workflow_steps)
        throw StepCountError("workflow has " + std::to_string(w.steps.size()) + " steps; at most " +
                             std::to_string(max_workflow_steps) + " are allowed");
    for (std::size_t i = 0; i < w.steps.size(); ++i) {
        if (w.steps[i].index != static_cast<int>(i) + 1)
            throw WorkflowParseError("step numbering must run 1.." + std::to_string(w.steps.size()) + ", found Step " +
                                     std::to_string(w.steps[i].index) + " at position " + std::to_string(i + 1));
        if (w.steps[i].description.empty())
            throw WorkflowParseError("Step " + std::to_string(i + 1) + " has no description");
    }
    return w;
}

Workflow plan_workflow(LanguageBackend& backend, const TaskSpec& task, const std::vector<std::string>& feedback,
                       const DecodeParams& params)
{
    task.validate();
    std::string intuition = task.intuition;
    for (const auto& f : feedback)
        intuition += (intuition.empty() ? "" : "\n") + std::string("Feedback on the previous plan: ") + f;
    const std::string prompt = render_planner_prompt(task.task, intuition);

    std::string current = prompt;
    for (int attempt = 0;; ++attempt) {
        std::string reply = backend.complete(current, params);
        try {
            return parse_workflow(reply);
        } catch (const WorkflowParseError& e) {
            if (attempt >= planner_reprompts)
                throw WorkflowParseError("planner output unparseable after " + std::to_string(planner_reprompts) +
                                         " re-prompts: " + e.what());
            current = prompt + "\nYour previous answer could not be used (" + e.what() +
                      "). Answer again with one \"Step N: ...\" line per step.\n";
        }
    }
}

} // namespace xtal
