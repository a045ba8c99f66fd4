// SPDX-License-Identifier: Apache-2.0
#include "xtal/cli/run_config.hpp"

#include <fstream>
#include <set>

#include "xtal/energy/hull.hpp"
#include "xtal/energy/pair_potential.hpp"
#include "xtal/energy/subprocess.hpp"
#include "xtal/io/database.hpp"
#include "xtal/retrieval/retrieval.hpp"

namespace xtal {

namespace {

/// Typed access to one JSON object that rejects keys nobody asked for.
class Fields {
public:
    Fields(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object())
            throw Error(where_ + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        if (!j_.contains(key))
            return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw Error(where_ + "." + key + " has the wrong type");
        }
    }

    const nlohmann::json* object(const char* key)
    {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k))
                throw Error(where_ + ": unknown key '" + k + "'");
    }

private:
    const nlohmann::json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

std::string resolve(const std::string& p, const std::filesystem::path& base)
{
    if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute())
        return p;
    return (base / p).lexically_normal().string();
}

} // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir)
{
    RunConfig c;
    Fields top(j, "config");
    if (auto* b = top.object("backend")) {
        Fields f(*b, "backend");
        f.get("kind", c.backend.kind);
        f.get("fixture", c.backend.fixture);
        f.get("base_url", c.backend.http.base_url);
        f.get("path", c.backend.http.path);
        f.get("model", c.backend.http.model);
        f.get("token_env", c.backend.http.token_env);
        long long timeout = c.backend.http.timeout.count();
        f.get("timeout_ms", timeout);
        c.backend.http.timeout = std::chrono::milliseconds(timeout);
        f.finish();
        c.backend.fixture = resolve(c.backend.fixture, base_dir);
    }
    top.get("database", c.database);
    top.get("hull", c.hull);
    top.get("reference", c.reference);
    c.database = resolve(c.database, base_dir);
    c.hull = resolve(c.hull, base_dir);
    c.reference = resolve(c.reference, base_dir);
    if (auto* calc = top.object("calculator")) {
        Fields f(*calc, "calculator");
        f.get("kind", c.calculator.kind);
        f.get("command", c.calculator.command);
        f.get("timeout_ms", c.calculator.timeout_ms);
        f.finish();
    }
    if (auto* tol = top.object("tolerances")) {
        Fields f(*tol, "tolerances");
        f.get("ltol", c.match.ltol);
        f.get("stol", c.match.stol);
        f.get("angle_tol", c.match.angle_tol);
        f.get("primitive_cell", c.match.primitive_cell);
        f.finish();
    }
    if (auto* relax = top.object("relax")) {
        Fields f(*relax, "relax");
        f.get("max_steps", c.relax.max_steps);
        f.get("fmax", c.relax.fmax);
        f.get("relax_cell", c.relax.relax_cell);
        f.get("max_steps_cap", c.max_relax_steps);
        f.finish();
    }
    if (auto* task = top.object("task")) {
        Fields f(*task, "task");
        f.get("text", c.task);
        f.get("intuition", c.intuition);
        f.get("parameters", c.parameters);
        f.finish();
    }
    top.get("output", c.output);
    c.output = resolve(c.output, base_dir);
    top.get("seed", c.seed);
    top.get("max_retries", c.max_retries);
    if (auto* d = top.object("decode")) {
        Fields f(*d, "decode");
        f.get("temperature", c.decode.temperature);
        f.get("max_tokens", c.decode.max_tokens);
        f.finish();
    }
    top.get("threads", c.threads);
    top.finish();

    c.match.validate();
    if (c.max_retries < 0)
        throw Error("max_retries must be >= 0");
    if (c.threads < 1)
        throw Error("threads must be >= 1");
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("config " + path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

nlohmann::json RunConfig::to_json() const
{
    return {{"backend",
             {{"kind", backend.kind},
              {"fixture", backend.fixture},
              {"base_url", backend.http.base_url},
              {"path", backend.http.path},
              {"model", backend.http.model},
              {"token_env", backend.http.token_env},
              {"timeout_ms", backend.http.timeout.count()}}},
            {"database", database},
            {"hull", hull},
            {"reference", reference},
            {"calculator",
             {{"kind", calculator.kind}, {"command", calculator.command}, {"timeout_ms", calculator.timeout_ms}}},
            {"tolerances",
             {{"ltol", match.ltol},
              {"stol", match.stol},
              {"angle_tol", match.angle_tol},
              {"primitive_cell", match.primitive_cell}}},
            {"relax",
             {{"max_steps", relax.max_steps},
              {"fmax", relax.fmax},
              {"relax_cell", relax.relax_cell},
              {"max_steps_cap", max_relax_steps}}},
            {"task", {{"text", task}, {"intuition", intuition}, {"parameters", parameters}}},
            {"output", output},
            {"seed", seed},
            {"max_retries", max_retries},
            {"decode", {{"temperature", decode.temperature}, {"max_tokens", decode.max_tokens}}},
            {"threads", threads}};
}

BackendPtr make_backend(const RunConfig& c)
{
    if (c.backend.kind == "scripted") {
        if (c.backend.fixture.empty())
            throw Error("the scripted backend needs a fixture file");
        if (!std::filesystem::exists(c.backend.fixture))
            throw IoError("backend fixture not found: " + c.backend.fixture);
        return std::make_shared<ScriptedBackend>(ScriptedBackend::load(c.backend.fixture));
    }
    if (c.backend.kind == "http") {
        if (c.backend.http.base_url.empty())
            throw Error("the http backend needs base_url");
        return std::make_shared<HttpBackend>(c.backend.http);
    }
    throw Error("unknown backend kind '" + c.backend.kind + "' (expected scripted or http)");
}

CalculatorPtr make_calculator(const RunConfig& c)
{
    if (c.calculator.kind == "pair")
        return std::make_shared<PairPotentialCalculator>();
    if (c.calculator.kind == "subprocess") {
        if (c.calculator.command.empty())
            throw Error("the subprocess calculator needs a command");
        return std::make_shared<SubprocessCalculator>(c.calculator.command,
                                                      std::chrono::milliseconds(c.calculator.timeout_ms));
    }
    throw Error("unknown calculator kind '" + c.calculator.kind + "' (expected pair or subprocess)");
}

std::shared_ptr<ToolEnvironment> make_environment(const RunConfig& c)
{
    auto env = std::make_shared<ToolEnvironment>();
    if (!c.database.empty())
        env->index = std::make_shared<StructureIndex>(load_database(c.database));
    if (!c.hull.empty())
        env->hull = load_hull_entries(c.hull);
    env->calculator = make_calculator(c);
    env->relax = c.relax;
    env->match = c.match;
    env->max_relax_steps = c.max_relax_steps;
    return env;
}

} // namespace xtal
