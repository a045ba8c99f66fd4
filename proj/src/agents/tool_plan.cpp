// SPDX-License-Identifier: Apache-2.0
#include "xtal/agents/tool_plan.hpp"

#include <cctype>

namespace xtal {

nlohmann::json ToolPlan::to_json() const
{
    nlohmann::json calls_json = nlohmann::json::array();
    for (const auto& c : calls)
        calls_json.push_back({{"tool", c.tool}, {"args", c.args}, {"bind", c.binding()}});
    return {{"function name", function_name}, {"plan", calls_json}, {"comment", comment}};
}

std::string summarize_bindings(const std::map<std::string, Value>& bindings, std::size_t max_bytes)
{
    std::string out;
    for (const auto& [name, v] : bindings)
        out += name + " = " + v.describe() + "\n";
    if (out.size() <= max_bytes)
        return out;
    static const std::string marker = "\n[truncated]";
    std::size_t cut = max_bytes - marker.size();
    while (cut > 0 && (static_cast<unsigned char>(out[cut]) & 0xC0) == 0x80)
        --cut;
    return out.substr(0, cut) + marker;
}

StepResult StepResult::from_bindings(std::map<std::string, Value> bindings)
{
    StepResult r;
    r.summary = summarize_bindings(bindings);
    r.bindings = std::move(bindings);
    return r;
}

nlohmann::json StepResult::to_json() const
{
    nlohmann::json b = nlohmann::json::object();
    for (const auto& [k, v] : bindings)
        b[k] = v.to_json();
    return {{"bindings", b}, {"summary", summary}};
}

StepResult StepResult::from_json(const nlohmann::json& j)
{
    StepResult r;
    for (const auto& [k, v] : j.at("bindings").items())
        r.bindings.emplace(k, Value::from_json(v));
    r.summary = j.at("summary").get<std::string>();
    return r;
}

nlohmann::json ErrorSignal::to_json() const
{
    return {{"message", message}, {"failed_call_index", failed_call_index}, {"attempt", attempt}};
}

ErrorSignal ErrorSignal::from_json(const nlohmann::json& j)
{
    return {j.at("message").get<std::string>(), j.at("failed_call_index").get<int>(), j.at("attempt").get<int>()};
}

ToolPlan parse_tool_plan(const std::string& text)
{
    auto open = text.find('{');
    auto close = text.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw PlanError("reply contains no JSON object");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text.substr(open, close - open + 1));
    } catch (const nlohmann::json::exception& e) {
        throw PlanError(std::string("reply is not valid JSON: ") + e.what());
    }
    const char* name_key = j.contains("function name") ? "function name" : "function_name";
    if (!j.contains(name_key) || !j[name_key].is_string())
        throw PlanError("missing string field \"function name\"");
    if (!j.contains("plan") || !j["plan"].is_array())
        throw PlanError("missing array field \"plan\"");

    ToolPlan plan;
    plan.function_name = j[name_key].get<std::string>();
    if (j.contains("comment") && j["comment"].is_string())
        plan.comment = j["comment"].get<std::string>();
    for (const auto& c : j["plan"]) {
        const int i = static_cast<int>(plan.calls.size());
        if (!c.is_object() || !c.contains("tool") || !c["tool"].is_string())
            throw PlanError("plan entry " + std::to_string(i) + " needs a string \"tool\"", i);
        ToolCall call;
        call.tool = c["tool"].get<std::string>();
        if (c.contains("args")) {
            if (!c["args"].is_object())
                throw PlanError("plan entry " + std::to_string(i) + ": \"args\" must be an object", i);
            call.args = c["args"];
        }
        const char* bind_key = c.contains("bind") ? "bind" : "bind_output";
        if (c.contains(bind_key)) {
            if (!c[bind_key].is_string())
                throw PlanError("plan entry " + std::to_string(i) + ": \"bind\" must be a string", i);
            call.bind = c[bind_key].get<std::string>();
        }
        plan.calls.push_back(std::move(call));
    }
    return plan;
}

namespace {

struct Ref {
    std::string text;
    std::string root;
    std::vector<std::string> fields;
};

std::optional<Ref> as_ref(const nlohmann::json& j)
{
    if (!j.is_string())
        return std::nullopt;
    const auto& s = j.get_ref<const std::string&>();
    if (s.size() < 2 || s[0] != '$')
        return std::nullopt;
    Ref r{s, {}, {}};
    std::size_t start = 1;
    while (true) {
        auto dot = s.find('.', start);
        auto part = s.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (r.root.empty() && r.fields.empty() && start == 1)
            r.root = part;
        else
            r.fields.push_back(part);
        if (dot == std::string::npos)
            break;
        start = dot + 1;
    }
    return r;
}

Value follow(Value v, const Ref& ref, std::size_t from)
{
    for (std::size_t i = from; i < ref.fields.size(); ++i) {
        const auto& f = ref.fields[i];
        if (v.kind() == Value::Kind::Object) {
            if (!v.contains(f))
                throw Error("reference '" + ref.text + "': no field '" + f + "'");
            v = Value(v.at(f));
        } else if (v.kind() == Value::Kind::List && !f.empty() &&
                   f.find_first_not_of("0123456789") == std::string::npos) {
            auto k = std::stoul(f);
            if (k >= v.as_list().size())
                throw Error("reference '" + ref.text + "': index " + f + " out of range");
            v = Value(v.as_list()[k]);
        } else {
            throw Error("reference '" + ref.text + "': cannot take '" + f + "' of a " + to_string(v.kind()));
        }
    }
    return v;
}

Value lookup(const Ref& ref, const StepContext& ctx, const std::map<std::string, Value>& locals)
{
    if (ref.root == "prev") {
        if (!ctx.previous_result)
            throw Error("reference '" + ref.text + "': there is no previous step result");
        if (ref.fields.empty())
            throw Error("reference '" + ref.text + "' must name a binding, e.g. $prev.candidates");
        auto it = ctx.previous_result->bindings.find(ref.fields[0]);
        if (it == ctx.previous_result->bindings.end())
            throw Error("reference '" + ref.text + "': the previous step has no binding '" + ref.fields[0] + "'");
        return follow(it->second, ref, 1);
    }
    if (ref.root == "param") {
        if (ref.fields.size() != 1)
            throw Error("reference '" + ref.text + "' must be $param.<name>");
        auto it = ctx.parameters.find(ref.fields[0]);
        if (it == ctx.parameters.end())
            throw Error("reference '" + ref.text + "': no task parameter '" + ref.fields[0] + "'");
        return Value(it->second);
    }
    auto it = locals.find(ref.root);
    if (it == locals.end())
        throw Error("reference '" + ref.text + "': '" + ref.root + "' is not bound by an earlier call");
    return follow(it->second, ref, 0);
}

Value resolve(const nlohmann::json& j, const StepContext& ctx, const std::map<std::string, Value>& locals)
{
    if (auto ref = as_ref(j))
        return lookup(*ref, ctx, locals);
    if (j.is_array()) {
        Value::List out;
        for (const auto& x : j)
            out.push_back(resolve(x, ctx, locals));
        return Value(std::move(out));
    }
    if (j.is_object() && !(j.size() == 1 && j.contains("$structure"))) {
        Value::Object out;
        for (const auto& [k, v] : j.items())
            out.emplace(k, resolve(v, ctx, locals));
        return Value(std::move(out));
    }
    try {
        return Value::from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed literal: ") + e.what());
    }
}

bool is_identifier(const std::string& s)
{
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
        return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
            return false;
    return true;
}

std::string call_label(int i, const ToolCall& c)
{
    return "call " + std::to_string(i) + " (" + c.tool + ")";
}

} // namespace

void validate_plan(const ToolPlan& plan, const StepContext& ctx, const Toolbox& toolbox)
{
    const std::string expected = "step" + std::to_string(ctx.step.index);
    if (plan.function_name != expected)
        throw PlanError("function name must be \"" + expected + "\", got \"" + plan.function_name + "\"");
    if (plan.calls.empty())
        throw PlanError("plan has no calls");

    // Local bindings are only known by name here; their values exist at run time.
    std::map<std::string, Value> placeholders;
    for (std::size_t n = 0; n < plan.calls.size(); ++n) {
        const int i = static_cast<int>(n);
        const auto& call = plan.calls[n];
        if (!toolbox.contains(call.tool))
            throw PlanError(call_label(i, call) + ": unknown tool '" + call.tool + "'", i);
        const auto& sig = toolbox.signature(call.tool);
        for (const auto& [k, v] : call.args.items())
            if (!sig.find(k))
                throw PlanError(call_label(i, call) + ": unknown argument '" + k + "'", i);
        for (const auto& p : sig.params) {
            if (!call.args.contains(p.name)) {
                if (!p.default_value)
                    throw PlanError(call_label(i, call) + ": missing required argument '" + p.name + "'", i);
                continue;
            }
            const auto& arg = call.args[p.name];
            auto ref = as_ref(arg);
            bool local_ref = false;
            std::function<void(const nlohmann::json&)> check_refs = [&](const nlohmann::json& j) {
                if (auto r = as_ref(j)) {
                    if (r->root == "prev" && ctx.dry_run) {
                        local_ref = true;
                        if (!ctx.previous_result || r->fields.empty() ||
                            !ctx.previous_result->bindings.count(r->fields[0]))
                            throw PlanError(call_label(i, call) + ": reference '" + r->text +
                                                "' does not name a binding of the previous step",
                                            i);
                    } else if (r->root == "prev" || r->root == "param") {
                        try {
                            lookup(*r, ctx, {});
                        } catch (const Error& e) {
                            throw PlanError(call_label(i, call) + ": " + e.what(), i);
                        }
                    } else {
                        local_ref = true;
                        if (!placeholders.count(r->root))
                            throw PlanError(call_label(i, call) + ": reference '" + r->text + "': '" + r->root +
                                                "' is not bound by an earlier call",
                                            i);
                    }
                } else if (j.is_array() || (j.is_object() && !(j.size() == 1 && j.contains("$structure")))) {
                    for (const auto& x : j)
                        check_refs(x);
                }
            };
            check_refs(arg);
            if (local_ref)
                continue;  // type known only at run time
            Value v;
            try {
                v = resolve(arg, ctx, {});
            } catch (const Error& e) {
                throw PlanError(call_label(i, call) + ": argument '" + p.name + "': " + e.what(), i);
            }
            std::string why;
            if (!value_matches(v, p.type, &why))
                throw PlanError(call_label(i, call) + ": argument '" + p.name + "' " + why +
                                    (ref ? " (from " + ref->text + ")" : ""),
                                i);
        }
        const auto name = call.binding();
        if (!is_identifier(name) || name == "prev" || name == "param")
            throw PlanError(call_label(i, call) + ": invalid binding name '" + name + "'", i);
        if (placeholders.count(name))
            throw PlanError(call_label(i, call) + ": binding '" + name + "' is already used", i);
        placeholders.emplace(name, Value());
    }
}

StepResult execute_plan(const ToolPlan& plan, const StepContext& ctx, const Toolbox& toolbox,
                        const ToolEnvironment& env)
{
    std::map<std::string, Value> locals;
    for (std::size_t n = 0; n < plan.calls.size(); ++n) {
        const int i = static_cast<int>(n);
        const auto& call = plan.calls[n];
        try {
            ToolArgs args;
            for (const auto& [k, v] : call.args.items())
                args.emplace(k, resolve(v, ctx, locals));
            locals[call.binding()] = toolbox.invoke(call.tool, std::move(args), env);
        } catch (const BackendError&) {
            throw;
        } catch (const std::exception& e) {
            throw ToolExecutionError(call_label(i, call) + " failed: " + e.what(), i);
        }
    }
    return StepResult::from_bindings(std::move(locals));
}

namespace {

void append_context(std::string& p, const StepContext& ctx, const Toolbox& toolbox)
{
    p += "\nLast step result:\n";
    if (ctx.previous_result)
        p += ctx.previous_result->summary.empty() ? "(empty)\n" : ctx.previous_result->summary;
    else
        p += "(none, this is the first step)\n";
    p += "\nCurrent workflow step (step " + std::to_string(ctx.step.index) + "):\n" + ctx.step.description + "\n";
    p += "\nExpert intuition:\n" + (ctx.step_intuition.empty() ? std::string("(none)") : ctx.step_intuition) + "\n";
    p += "\nTask parameters:\n";
    if (ctx.parameters.empty())
        p += "(none)\n";
    for (const auto& [k, v] : ctx.parameters)
        p += k + " = " + v + "\n";
    p += "\nAvailable tools:\n" + toolbox.catalog();
}

} // namespace

std::string render_tool_prompt(const StepContext& ctx, const Toolbox& toolbox)
{
    const std::string fn = "step" + std::to_string(ctx.step.index);
    std::string p;
    p += "You are a Tool Code Generator. Based on the following information (last step result, current workflow "
         "step, and expert intuition), propose a tool plan that carries out the current step using only the "
         "available tools.\n";
    p += "The plan must define exactly one unique function named '" + fn + "'.\n";
    p += "Each plan entry calls one tool with JSON arguments and binds its result to a new name. An argument may be "
         "a JSON literal or a reference: \"$name\" or \"$name.field\" for an earlier binding in this plan, "
         "\"$prev.name\" for a binding in the last step result, \"$param.name\" for a task parameter.\n";
    p += "The comment must explain what the plan does. Do not output anything else.\n\n";
    p += "Output a JSON object in the following format:\n\n";
    p += "{\n  \"function name\": \"" + fn +
         "\",\n  \"plan\": [{\"tool\": \"<tool>\", \"args\": {...}, \"bind\": \"<name>\"}],\n"
         "  \"comment\": \"<purpose>\"\n}\n";
    append_context(p, ctx, toolbox);
    return p;
}

std::string render_revision_prompt(const StepContext& ctx, const Toolbox& toolbox, const std::string& previous_reply,
                                   const ErrorSignal& error)
{
    std::string p = render_tool_prompt(ctx, toolbox);
    p += "\nYour previous plan (attempt " + std::to_string(error.attempt) + ") failed.\n";
    p += "\nPrevious plan:\n" + previous_reply + "\n";
    p += "\nError:\n" + error.message + "\n";
    p += "\nRevise the plan to fix this error and output the corrected JSON object only.\n";
    return p;
}

ToolPlan generate_tool_plan(LanguageBackend& backend, const StepContext& ctx, const Toolbox& toolbox,
                            const DecodeParams& params)
{
    if (toolbox.empty())
        throw Error("toolbox is empty");
    auto plan = parse_tool_plan(backend.complete(render_tool_prompt(ctx, toolbox), params));
    validate_plan(plan, ctx, toolbox);
    return plan;
}

ReflectionOutcome execute_with_reflection(LanguageBackend& backend, const StepContext& ctx, const Toolbox& toolbox,
                                          const ToolEnvironment& env, int max_retries, const AttemptObserver& observer,
                                          const DecodeParams& params)
{
    if (toolbox.empty())
        throw Error("toolbox is empty");
    if (max_retries < 0)
        throw Error("max_retries must be non-negative");
    ReflectionOutcome out;
    std::string prompt = render_tool_prompt(ctx, toolbox);
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        PlanAttempt a;
        a.attempt = attempt;
        a.prompt = prompt;
        a.reply = backend.complete(prompt, params);
        try {
            auto plan = parse_tool_plan(a.reply);
            validate_plan(plan, ctx, toolbox);
            ++out.executions;
            out.result = execute_plan(plan, ctx, toolbox, env);
        } catch (const PlanError& e) {
            a.error = ErrorSignal{e.what(), e.call_index(), attempt};
        } catch (const ToolExecutionError& e) {
            a.error = ErrorSignal{e.what(), e.call_index(), attempt};
        }
        out.attempts.push_back(a);
        if (observer)
            observer(a);
        if (out.result)
            return out;
        prompt = render_revision_prompt(ctx, toolbox, a.reply, *a.error);
    }
    return out;
}

} // namespace xtal
