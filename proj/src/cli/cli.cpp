// SPDX-License-Identifier: Apache-2.0
#include "xtal/cli/cli.hpp"

#include <algorithm>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <pthread.h>

#include "xtal/agents/session.hpp"
#include "xtal/cli/run_config.hpp"
#include "xtal/io/cif.hpp"
#include "xtal/io/database.hpp"
#include "xtal/metrics/metrics.hpp"
#include "xtal/service/service.hpp"

namespace xtal {

namespace fs = std::filesystem;

namespace {

struct Io {
    std::istream& in;
    std::ostream& out;
    std::ostream& err;
};

/// Flags shared by the commands that build a RunConfig. Unset flags leave
/// the config file (or the built-in default) alone.
struct ConfigFlags {
    std::string config;
    std::optional<std::string> database, hull, reference, output, fixture, backend_url, model, calculator_cmd;
    std::optional<std::string> task, intuition;
    std::vector<std::string> params;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_retries, threads;

    void attach(CLI::App* app, bool session_flags)
    {
        app->add_option("--config", config, "JSON run configuration");
        app->add_option("--db", database, "structure database (JSON lines)");
        app->add_option("--hull", hull, "convex-hull reference entries (JSON lines)");
        app->add_option("--backend-fixture", fixture, "scripted backend reply file");
        app->add_option("--backend-url", backend_url, "chat-completion endpoint base URL");
        app->add_option("--model", model, "model name sent to the HTTP backend");
        app->add_option("--calculator-cmd", calculator_cmd,
                        "external calculator command (whitespace separated); default is the built-in pair potential");
        app->add_option("-o,--output", output, "output directory");
        app->add_option("--seed", seed, "seed for stochastic tools");
        app->add_option("--threads", threads, "worker threads");
        if (session_flags) {
            app->add_option("--task", task, "task text (overrides the default)");
            app->add_option("--intuition", intuition, "expert intuition for the planner");
            app->add_option("--param", params, "extra task parameter key=value (repeatable)");
            app->add_option("--max-retries", max_retries, "self-reflection retries per step");
        }
    }

    RunConfig resolve() const
    {
        RunConfig c = config.empty() ? RunConfig{} : RunConfig::load(config);
        auto set = [](auto& dst, const auto& src) {
            if (src)
                dst = *src;
        };
        set(c.database, database);
        set(c.hull, hull);
        set(c.reference, reference);
        set(c.output, output);
        set(c.task, task);
        set(c.intuition, intuition);
        set(c.seed, seed);
        set(c.max_retries, max_retries);
        set(c.threads, threads);
        if (fixture) {
            c.backend.kind = "scripted";
            c.backend.fixture = *fixture;
        }
        if (backend_url) {
            c.backend.kind = "http";
            c.backend.http.base_url = *backend_url;
        }
        set(c.backend.http.model, model);
        if (calculator_cmd) {
            std::istringstream words(*calculator_cmd);
            c.calculator.kind = "subprocess";
            c.calculator.command.clear();
            for (std::string w; words >> w;)
                c.calculator.command.push_back(w);
        }
        for (const auto& p : params) {
            auto eq = p.find('=');
            if (eq == std::string::npos || eq == 0)
                throw Error("--param expects key=value, got '" + p + "'");
            c.parameters[p.substr(0, eq)] = p.substr(eq + 1);
        }
        if (c.max_retries < 0)
            throw Error("--max-retries must be >= 0");
        if (c.threads < 1)
            throw Error("--threads must be >= 1");
        return c;
    }
};

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out)
        throw IoError("cannot write " + path.string());
}

// ---------------------------------------------------------------- db

int db_import(const std::string& dir, const std::string& output, bool skip_bad, Io io)
{
    if (!fs::is_directory(dir))
        throw IoError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".cif")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::vector<StructureRecord> records;
    int failed = 0;
    for (const auto& f : files) {
        try {
            records.push_back({f.stem().string(), read_cif_file(f.string()), {{"source", f.filename().string()}}});
        } catch (const Error& e) {
            ++failed;
            io.err << (skip_bad ? "warning: skipped " : "error: ") << f.filename().string() << ": " << e.what() << "\n";
        }
    }
    if (failed && !skip_bad) {
        io.err << failed << " of " << files.size() << " files failed; nothing written (use --skip-bad to import the rest)\n";
        return exit_domain_failure;
    }
    save_database(output, records);
    io.out << "imported " << records.size() << " records into " << output;
    if (failed)
        io.out << " (" << failed << " skipped)";
    io.out << "\n";
    return exit_ok;
}

int db_stats(const std::string& path, bool json, Io io)
{
    auto records = load_database(path);
    std::map<Element, int> coverage;
    std::map<std::string, int> formulas;
    for (const auto& r : records) {
        auto comp = r.structure.composition();
        for (const auto& e : comp.elements())
            ++coverage[e];
        ++formulas[reduced_formula(comp)];
    }
    if (json) {
        nlohmann::json j{{"records", records.size()}};
        auto& el = j["elements"] = nlohmann::json::object();
        for (const auto& [e, n] : coverage)
            el[std::string(e.symbol())] = n;
        j["formulas"] = formulas;
        io.out << j.dump(2) << "\n";
        return exit_ok;
    }
    io.out << "records: " << records.size() << "\n";
    io.out << "elements (" << coverage.size() << "):";
    for (const auto& [e, n] : coverage)
        io.out << " " << e.symbol() << "=" << n;
    io.out << "\nformulas:\n";
    std::vector<std::pair<std::string, int>> rows(formulas.begin(), formulas.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [f, n] : rows)
        io.out << "  " << std::left << std::setw(16) << f << " " << n << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------- run

TaskSpec build_task(TaskKind kind, const RunConfig& c, const std::map<std::string, std::string>& kind_params)
{
    TaskSpec t;
    t.kind = kind;
    t.intuition = c.intuition;
    t.parameters = c.parameters;
    for (const auto& [k, v] : kind_params)
        t.parameters[k] = v;
    t.parameters["seed"] = std::to_string(c.seed);
    auto param = [&](const char* k) {
        auto it = t.parameters.find(k);
        return it == t.parameters.end() ? std::string() : it->second;
    };
    if (!c.task.empty()) {
        t.task = c.task;
    } else if (kind == TaskKind::CSP) {
        if (param("composition").empty())
            throw Error("run csp needs --composition");
        t.task = "Predict the stable crystal structure of " + param("composition") + ".";
    } else if (kind == TaskKind::CSG) {
        t.task = "Generate " + (param("n").empty() ? std::string("new") : param("n") + " new") +
                 " stable crystal structures";
        if (!param("composition").empty())
            t.task += " related to " + param("composition");
        t.task += ".";
    } else {
        if (param("constraint").empty())
            throw Error("run prop needs --constraint");
        t.task = "Find stable crystal structures with " + param("constraint") + ".";
    }
    t.validate();
    return t;
}

/// One line per structure-like item: formula, energy and validity.
std::string describe_item(const Value& v)
{
    std::ostringstream s;
    if (v.kind() == Value::Kind::Structure) {
        s << reduced_formula(v.as_structure().composition()) << " (" << v.as_structure().size() << " sites)";
        return s.str();
    }
    const auto& o = v.as_object();
    auto has = [&](const char* k) { return o.count(k) && !o.at(k).is_null(); };
    auto text = [&](const char* k) {
        const auto& v = o.at(k);
        return v.kind() == Value::Kind::String ? v.as_string() : v.describe();
    };
    if (has("formula"))
        s << text("formula");
    else if (has("structure") && o.at("structure").kind() == Value::Kind::Structure)
        s << reduced_formula(o.at("structure").as_structure().composition());
    if (has("id"))
        s << " [" << text("id") << "]";
    if (has("energy_per_atom"))
        s << "  E=" << std::fixed << std::setprecision(4) << o.at("energy_per_atom").as_number() << " eV/atom";
    if (has("e_hull"))
        s << "  e_hull=" << std::fixed << std::setprecision(4) << o.at("e_hull").as_number();
    if (has("bandgap"))
        s << "  bandgap=" << std::fixed << std::setprecision(2) << o.at("bandgap").as_number() << " eV";
    if (has("structurally_valid"))
        s << "  structural=" << (o.at("structurally_valid").as_bool() ? "yes" : "no");
    if (has("compositionally_valid"))
        s << "  compositional=" << (o.at("compositionally_valid").as_bool() ? "yes" : "no");
    if (has("converged"))
        s << "  converged=" << (o.at("converged").as_bool() ? "yes" : "no");
    return s.str();
}

bool structure_like(const Value& v)
{
    if (v.kind() == Value::Kind::Structure)
        return true;
    if (v.kind() != Value::Kind::Object)
        return false;
    const auto& o = v.as_object();
    return o.count("formula") || o.count("structure");
}

void print_result(const StepResult& r, std::ostream& out)
{
    for (const auto& [name, v] : r.bindings) {
        if (structure_like(v)) {
            out << "  " << name << ": " << describe_item(v) << "\n";
        } else if (v.kind() == Value::Kind::List && !v.as_list().empty() &&
                   std::all_of(v.as_list().begin(), v.as_list().end(), structure_like)) {
            const auto& items = v.as_list();
            out << "  " << name << ": " << items.size() << " items\n";
            for (std::size_t i = 0; i < std::min<std::size_t>(items.size(), 10); ++i)
                out << "    " << i << ". " << describe_item(items[i]) << "\n";
            if (items.size() > 10)
                out << "    ... " << items.size() - 10 << " more\n";
        } else {
            out << "  " << name << " = " << v.describe() << "\n";
        }
    }
}

void print_workflow(const Workflow& wf, std::ostream& out)
{
    out << "Proposed workflow:\n";
    for (const auto& s : wf.steps)
        out << "  Step " << s.index << ": " << s.description << "\n";
}

/// Reads one answer; nullopt at end of input.
std::optional<std::string> ask(Io io, const std::string& prompt)
{
    io.out << prompt << std::flush;
    std::string line;
    if (!std::getline(io.in, line))
        return std::nullopt;
    auto b = line.find_first_not_of(" \t\r");
    auto e = line.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : line.substr(b, e - b + 1);
}

/// Line-oriented human review. Returns false when input ran out.
bool drive_interactively(Session& session, Io io)
{
    for (;;) {
        auto snap = session.snapshot();
        switch (snap.state) {
        case SessionState::PlanProposed: {
            print_workflow(*snap.workflow, io.out);
            auto a = ask(io, "[a]pprove / [r]evise? ");
            if (!a)
                return false;
            if (*a == "a" || *a == "approve") {
                session.review_plan({});
            } else if (*a == "r" || *a == "revise") {
                auto fb = ask(io, "feedback> ");
                if (!fb)
                    return false;
                session.review_plan({PlanVerdict::Kind::Revise, *fb});
            } else {
                io.out << "please answer a or r\n";
            }
            break;
        }
        case SessionState::PlanApproved:
            io.out << "Running step " << snap.current_step << ": "
                   << snap.workflow->steps[snap.current_step - 1].description << "\n";
            session.run_step();
            break;
        case SessionState::StepReview: {
            int t = snap.current_step;
            io.out << "Step " << t << " result:\n";
            print_result(snap.results.at(t), io.out);
            auto a = ask(io, "[a]pprove / [f]eedback / a[b]ort? ");
            if (!a)
                return false;
            if (*a == "a" || *a == "approve") {
                session.review_step({});
            } else if (*a == "f" || *a == "feedback") {
                auto fb = ask(io, "feedback> ");
                if (!fb)
                    return false;
                session.review_step({StepVerdict::Kind::Feedback, *fb});
                io.out << "Re-running step " << t << " with the feedback\n";
                session.run_step();
            } else if (*a == "b" || *a == "abort") {
                auto why = ask(io, "reason> ");
                session.review_step({StepVerdict::Kind::Abort, why.value_or("")});
            } else {
                io.out << "please answer a, f or b\n";
            }
            break;
        }
        default:
            return true;
        }
    }
}

int run_task(TaskKind kind, const RunConfig& config, const std::map<std::string, std::string>& kind_params,
             bool autopilot_mode, Io io)
{
    RunConfig c = config;
    auto task = build_task(kind, c, kind_params);
    c.task = task.task;
    c.parameters = task.parameters;

    fs::path out = c.output;
    if (fs::exists(out / "events.jsonl"))
        throw Error(out.string() + " already holds a session log; choose another --output");
    fs::create_directories(out);
    write_text(out / "config.json", c.to_json().dump(2) + "\n");

    SessionConfig sc;
    sc.backend = make_backend(c);
    sc.toolbox = std::make_shared<Toolbox>(default_toolbox());
    sc.environment = make_environment(c);
    sc.max_retries = c.max_retries;
    sc.decode = c.decode;
    sc.workspace = out;
    Session session("run-" + to_string(kind), sc);

    io.out << "Task: " << task.task << "\n";
    try {
        session.submit_task(task);
    } catch (const BackendError&) {
        throw;
    } catch (const Error& e) {
        io.err << "planning failed: " << e.what() << "\n";
        return exit_domain_failure;
    }

    if (autopilot_mode) {
        print_workflow(*session.snapshot().workflow, io.out);
        autopilot(session, AutopilotPolicy::ApproveAll);
    } else if (!drive_interactively(session, io)) {
        io.err << "input ended before the session finished; the log is in " << out.string() << "\n";
        return exit_domain_failure;
    }

    auto snap = session.snapshot();
    if (snap.state == SessionState::Completed) {
        int last = snap.workflow->size();
        io.out << "Completed. Final result:\n";
        print_result(snap.results.at(last), io.out);
        io.out << "Workspace: " << out.string() << "\n";
        for (const auto& name : snap.artifacts[last])
            io.out << "  " << (out / name).string() << "\n";
        io.out << "  " << (out / "report.json").string() << "\n";
        return exit_ok;
    }
    io.err << "session " << to_string(snap.state) << ": " << snap.failure_reason << "\n";
    return exit_domain_failure;
}

// ---------------------------------------------------------------- eval

void emit_report(const nlohmann::json& j, const std::string& table, const std::optional<std::string>& json_path,
                 bool json_stdout, Io io)
{
    if (json_path)
        write_text(*json_path, j.dump(2) + "\n");
    if (json_stdout)
        io.out << j.dump(2) << "\n";
    else
        io.out << table;
}

int eval_gen(const RunConfig& c, const std::string& candidates, bool no_relax,
             const std::optional<std::string>& json_path, bool json_stdout, Io io)
{
    if (c.hull.empty())
        throw Error("eval gen needs --hull");
    auto cands = load_database(candidates);
    std::vector<CrystalStructure> structures;
    for (auto& r : cands)
        structures.push_back(std::move(r.structure));
    auto ref_path = c.reference.empty() ? c.database : c.reference;
    auto reference = ref_path.empty() ? std::vector<StructureRecord>{} : load_database(ref_path);
    GenerationOptions o;
    o.relax = c.relax;
    o.relax_candidates = !no_relax;
    o.match = c.match;
    o.threads = c.threads;
    auto calc = make_calculator(c);
    auto report = evaluate_generation(structures, reference, load_hull_entries(c.hull), *calc, o);
    nlohmann::json j{{"report", report.to_json()}, {"candidates", report.candidates_json()}};
    emit_report(j, report.to_table(), json_path, json_stdout, io);
    return exit_ok;
}

int eval_csp(const RunConfig& c, const std::string& predictions, const std::string& truth,
             const std::optional<std::string>& json_path, bool json_stdout, Io io)
{
    auto preds = load_database(predictions);
    auto truths = load_database(truth);
    std::map<std::string, CrystalStructure> by_id;
    for (auto& p : preds)
        by_id.emplace(p.id, std::move(p.structure));
    std::vector<std::optional<CrystalStructure>> paired;
    std::vector<CrystalStructure> gt;
    for (auto& t : truths) {
        auto it = by_id.find(t.id);
        paired.push_back(it == by_id.end() ? std::nullopt : std::optional<CrystalStructure>(it->second));
        gt.push_back(std::move(t.structure));
    }
    auto report = evaluate_csp(paired, gt, c.match);
    emit_report(report.to_json(), report.to_table(), json_path, json_stdout, io);
    return exit_ok;
}

int eval_workflows(const RunConfig& c, const std::string& tasks_path, int trials, bool no_intuition,
                   const std::optional<std::string>& json_path, bool json_stdout, Io io)
{
    std::ifstream in(tasks_path);
    if (!in)
        throw IoError("cannot read " + tasks_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(tasks_path + ": " + e.what());
    }
    if (j.is_object() && j.contains("tasks"))
        j = j["tasks"];
    if (!j.is_array())
        throw Error(tasks_path + ": expected a list of tasks");
    std::vector<TaskSpec> tasks;
    for (const auto& t : j)
        tasks.push_back(TaskSpec::from_json(t));
    auto backend = make_backend(c);
    auto report = audit_workflows(*backend, tasks, !no_intuition, trials, default_toolbox(), c.decode);
    emit_report(report.to_json(), report.to_table(), json_path, json_stdout, io);
    return exit_ok;
}

// ---------------------------------------------------------------- serve

int serve(const RunConfig& c, const std::string& host, int port, const std::string& root,
          const std::string& token_env, Io io)
{
    auto env = make_environment(c);
    make_backend(c);  // fail fast on a bad backend config
    auto factory = [c, env] {
        SessionConfig sc;
        sc.backend = make_backend(c);
        sc.toolbox = std::make_shared<Toolbox>(default_toolbox());
        sc.environment = env;
        sc.max_retries = c.max_retries;
        sc.decode = c.decode;
        return sc;
    };
    auto store = std::make_shared<SessionStore>(factory, fs::path(root.empty() ? c.output : root));
    ServiceOptions o;
    o.host = host;
    o.port = port;
    if (!token_env.empty()) {
        const char* t = std::getenv(token_env.c_str());
        if (!t || !*t)
            throw IoError("environment variable " + token_env + " is not set");
        o.token = t;
    }
    ApiServer server(store, o);

    // SIGINT/SIGTERM stop the server from a dedicated thread.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    int bound = 0;
    try {
        bound = server.start();
    } catch (...) {
        pthread_kill(waiter.native_handle(), SIGTERM);
        waiter.join();
        throw;
    }
    io.out << "serving " << store->list().size() << " session(s) on http://" << host << ":" << bound << "\n"
           << std::flush;
    waiter.join();
    io.out << "stopped\n";
    return exit_ok;
}

int report_failure(const std::exception& e, int code, Io io)
{
    io.err << "xtal: " << e.what() << "\n";
    return code;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err)
{
    Io io{in, out, err};
    CLI::App app{"Crystal structure discovery workbench"};
    app.name("xtal");
    app.require_subcommand(1);

    // db
    auto* db = app.add_subcommand("db", "structure database tools");
    db->require_subcommand(1);
    std::string cif_dir, db_out, stats_path;
    bool skip_bad = false, stats_json = false;
    auto* import = db->add_subcommand("import-cifs", "convert a directory of CIF files to a JSON-lines database");
    import->add_option("dir", cif_dir, "directory of .cif files")->required();
    import->add_option("-o,--output", db_out, "database file to write")->required();
    import->add_flag("--skip-bad", skip_bad, "skip unparsable files instead of failing");
    auto* stats = db->add_subcommand("stats", "record count, element coverage and formula histogram");
    stats->add_option("db", stats_path, "database file")->required();
    stats->add_flag("--json", stats_json, "print JSON");

    // run
    auto* run = app.add_subcommand("run", "run a mediated discovery session");
    run->require_subcommand(1);
    ConfigFlags run_flags;
    bool autopilot_mode = false;
    std::string composition, constraint;
    int n = 0;
    auto* run_csp = run->add_subcommand("csp", "crystal structure prediction for one composition");
    auto* run_csg = run->add_subcommand("csg", "generate new stable crystals");
    auto* run_prop = run->add_subcommand("prop", "property-guided generation");
    for (auto* sub : {run_csp, run_csg, run_prop}) {
        run_flags.attach(sub, true);
        sub->add_flag("--autopilot", autopilot_mode, "approve every plan and step automatically");
    }
    run_csp->add_option("--composition", composition, "target composition, e.g. Ba2Fe2F9")->required();
    run_csg->add_option("--n", n, "number of structures to generate")->check(CLI::PositiveNumber);
    run_csg->add_option("--composition", composition, "seed composition for prototype retrieval");
    run_prop->add_option("--constraint", constraint, "property constraint, e.g. \"bandgap>3\"")->required();
    run_prop->add_option("--composition", composition, "seed composition for prototype retrieval");

    // eval
    auto* eval = app.add_subcommand("eval", "metric pipelines");
    eval->require_subcommand(1);
    ConfigFlags eval_flags;
    std::optional<std::string> json_path;
    bool json_stdout = false, no_relax = false, no_intuition = false;
    std::string candidates, predictions, truth, tasks_path;
    int trials = 1;
    auto* eval_gen_cmd = eval->add_subcommand("gen", "validity, stability, uniqueness, novelty and S.U.N. rates");
    auto* eval_csp_cmd = eval->add_subcommand("csp", "match rate and RMSE against ground truth");
    auto* eval_wf_cmd = eval->add_subcommand("workflows", "workflow validity audit");
    for (auto* sub : {eval_gen_cmd, eval_csp_cmd, eval_wf_cmd}) {
        eval_flags.attach(sub, false);
        sub->add_option("--report", json_path, "write the JSON report to this file");
        sub->add_flag("--json", json_stdout, "print JSON instead of a table");
    }
    eval_gen_cmd->add_option("--candidates", candidates, "candidate structures (JSON lines)")->required();
    eval_gen_cmd->add_option("--reference", eval_flags.reference, "novelty reference database (default --db)");
    eval_gen_cmd->add_flag("--no-relax", no_relax, "score candidates as given");
    eval_csp_cmd->add_option("--predictions", predictions, "predicted structures, ids matching the truth")->required();
    eval_csp_cmd->add_option("--truth", truth, "ground-truth structures")->required();
    eval_wf_cmd->add_option("--tasks", tasks_path, "JSON list of tasks")->required();
    eval_wf_cmd->add_option("--trials", trials, "samples per task")->check(CLI::PositiveNumber);
    eval_wf_cmd->add_flag("--no-intuition", no_intuition, "clear all intuition before planning");

    // serve
    auto* srv = app.add_subcommand("serve", "HTTP API for sessions");
    ConfigFlags serve_flags;
    serve_flags.attach(srv, false);
    std::string host = "127.0.0.1", root, token_env;
    int port = 8080;
    srv->add_option("--host", host, "bind address")->capture_default_str();
    srv->add_option("--port", port, "port (0 picks a free one)")->capture_default_str();
    srv->add_option("--root", root, "session directory (default: the config output)");
    srv->add_option("--token-env", token_env, "environment variable holding a bearer token to require");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        // Help requested on a subcommand surfaces as CallForHelp above; the
        // rest are usage errors.
        err << "xtal: " << e.what() << "\nRun with --help for usage.\n";
        return exit_domain_failure;
    }

    try {
        if (*import)
            return db_import(cif_dir, db_out, skip_bad, io);
        if (*stats)
            return db_stats(stats_path, stats_json, io);
        if (*run) {
            auto c = run_flags.resolve();
            if (*run_csp)
                return run_task(TaskKind::CSP, c, {{"composition", composition}}, autopilot_mode, io);
            std::map<std::string, std::string> params;
            if (!composition.empty())
                params["composition"] = composition;
            if (*run_csg) {
                if (n > 0)
                    params["n"] = std::to_string(n);
                return run_task(TaskKind::CSG, c, params, autopilot_mode, io);
            }
            params["constraint"] = constraint;
            return run_task(TaskKind::PropertyGuided, c, params, autopilot_mode, io);
        }
        if (*eval) {
            auto c = eval_flags.resolve();
            if (*eval_gen_cmd)
                return eval_gen(c, candidates, no_relax, json_path, json_stdout, io);
            if (*eval_csp_cmd)
                return eval_csp(c, predictions, truth, json_path, json_stdout, io);
            return eval_workflows(c, tasks_path, trials, no_intuition, json_path, json_stdout, io);
        }
        if (*srv)
            return serve(serve_flags.resolve(), host, port, root, token_env, io);
    } catch (const BackendError& e) {
        return report_failure(e, exit_environment_failure, io);
    } catch (const IoError& e) {
        return report_failure(e, exit_environment_failure, io);
    } catch (const Error& e) {
        return report_failure(e, exit_domain_failure, io);
    } catch (const fs::filesystem_error& e) {
        return report_failure(e, exit_environment_failure, io);
    }
    return exit_domain_failure;
}

} // namespace xtal
