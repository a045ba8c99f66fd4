// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: one PASS/FAIL line per criterion, each with its own
// runtime budget. Exits non-zero when any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agent_helpers.hpp"
#include "metrics_helpers.hpp"
#include "test_helpers.hpp"
#include "xtal/agents/session.hpp"
#include "xtal/agents/tool_plan.hpp"
#include "xtal/agents/workflow.hpp"
#include "xtal/energy/hull.hpp"
#include "xtal/energy/pair_potential.hpp"
#include "xtal/energy/relax.hpp"
#include "xtal/io/cif.hpp"
#include "xtal/matcher/matcher.hpp"
#include "xtal/metrics/metrics.hpp"
#include "xtal/symmetry/symmetry.hpp"
#include "xtal/validity/validity.hpp"

using namespace xtal;
using namespace xtal::testing;

namespace {

/// Collects failed expectations for one criterion.
struct Checker {
    std::vector<std::string> failures;

    void expect(bool ok, const std::string& what)
    {
        if (!ok)
            failures.push_back(what);
    }
};

struct Criterion {
    std::string name;
    double budget_s;
    std::function<void(Checker&)> body;
};

std::string fmt(double x)
{
    std::ostringstream o;
    o.precision(12);
    o << x;
    return o.str();
}

// ---- validity

void validity_thresholds(Checker& c)
{
    auto pair = [](double dx) {
        return CrystalStructure(Lattice::cubic(8.0), {el("Na"), el("Cl")}, {Vec3(0, 0, 0), Vec3(dx, 0, 0)});
    };
    auto at = structural_validity(pair(0.0625));
    c.expect(at.min_distance == 0.5, "min distance of the 0.5 A pair is " + fmt(at.min_distance));
    c.expect(at.ok, "0.5 A must be valid (>=)");
    auto below = structural_validity(pair(0.49 / 8.0));
    c.expect(std::abs(below.min_distance - 0.49) < 1e-12, "0.49 A pair measured " + fmt(below.min_distance));
    c.expect(!below.ok, "0.49 A must be invalid");

    // one atom, shortest translation 0.5 A, volume exactly 0.1 and then 0.099
    Mat3 rows;
    rows << 0.5, 0, 0, 0, 0.5, 0, 0.25, 0.25, 0.4;
    auto one = [&] { return CrystalStructure(Lattice(rows), {el("Si")}, {Vec3(0, 0, 0)}); };
    auto v01 = structural_validity(one());
    c.expect(v01.volume == 0.1, "volume 0.1 measured " + fmt(v01.volume));
    c.expect(v01.ok, "volume 0.1 must be valid (>=)");
    rows(2, 2) = 0.396;
    auto v099 = structural_validity(one());
    c.expect(std::abs(v099.volume - 0.099) < 1e-12, "volume 0.099 measured " + fmt(v099.volume));
    c.expect(v099.min_distance >= 0.5, "the 0.099 cell must only fail on volume");
    c.expect(!v099.ok, "volume 0.099 must be invalid");
}

// ---- stability

void stability_grid(Checker& c)
{
    const Composition one = Composition::from_formula("Na");
    const Composition two = Composition::from_formula("NaCl");
    for (double e : {-0.01, 0.0, 0.05, 0.11})
        for (const Composition* comp : {&one, &two}) {
            auto f = classify_stability(e, *comp);
            bool want_stable = e < 0.0 && comp->num_elements() >= 2;
            std::string at = "(" + fmt(e) + ", " + std::to_string(comp->num_elements()) + ")";
            c.expect(f.stable == want_stable, "stable flag at " + at);
            c.expect(f.metastable_0_1 == (e < 0.1), "metastable 0.1 flag at " + at);
            c.expect(f.metastable_0_03 == (e < 0.03), "metastable 0.03 flag at " + at);
        }
}

// ---- hull

// Lowest energy reachable at c by mixing at most two entries (a binary LP
// optimum sits on a vertex, i.e. on a pair of entries).
double pairwise_mixture(const std::vector<HullEntry>& es, const Composition& c, Element b)
{
    double x = c.fraction(b);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < es.size(); ++i) {
        double xi = es[i].composition.fraction(b);
        if (std::abs(xi - x) < 1e-12)
            best = std::min(best, es[i].energy_per_atom);
        for (std::size_t j = 0; j < es.size(); ++j) {
            double xj = es[j].composition.fraction(b);
            if (xi < x && x < xj) {
                double w = (xj - x) / (xj - xi);
                best = std::min(best, w * es[i].energy_per_atom + (1 - w) * es[j].energy_per_atom);
            }
        }
    }
    return best;
}

void hull_oracle(Checker& c)
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> energy(-1.5, 0.4), ref(-0.3, 0.3);
    std::uniform_int_distribution<int> count(1, 8), n_entries(1, 10);
    const std::vector<std::pair<const char*, const char*>> systems{
        {"Li", "O"}, {"Na", "Cl"}, {"Fe", "F"}, {"Mg", "Si"}, {"Ba", "S"}};
    for (int trial = 0; trial < 50; ++trial) {
        Element a = el(systems[trial % 5].first), b = el(systems[trial % 5].second);
        std::vector<HullEntry> es{{Composition(std::map<Element, int>{{a, 1}}), ref(rng), "A"},
                                  {Composition(std::map<Element, int>{{b, 1}}), ref(rng), "B"}};
        for (int k = n_entries(rng); k > 0; --k)
            es.push_back({Composition(std::map<Element, int>{{a, count(rng)}, {b, count(rng)}}), energy(rng), ""});
        auto h = build_hull(es);
        std::vector<HullEntry> probes = es;
        for (int k = 0; k < 10; ++k)
            probes.push_back({Composition(std::map<Element, int>{{a, count(rng)}, {b, count(rng)}}), energy(rng), ""});
        for (const auto& p : probes) {
            // probes off the entry list may sit below the hull and come out negative
            double want = p.energy_per_atom - pairwise_mixture(es, p.composition, b);
            double got = energy_above_hull(p, h);
            c.expect(std::abs(got - want) < 1e-9, "trial " + std::to_string(trial) + " " + reduced_formula(p.composition) + ": hull " + fmt(got) +
                             " vs oracle " + fmt(want));
        }
    }
}

// ---- matcher

CrystalStructure displace_site(const CrystalStructure& s, std::size_t i, const Vec3& shift)
{
    auto cart = s.cart_coords();
    cart[i] += shift;
    return s.with_frac_coords(cart_to_frac(cart, s.lattice()));
}

void matcher_suite(Checker& c)
{
    std::mt19937_64 rng(77);
    std::vector<CrystalStructure> fixtures{nacl_primitive(), nacl_conventional(), cscl(), simple_cubic(),
                                           rocksalt_conventional("Mg", "O", 4.21)};
    for (int k = 0; k < 9; ++k)
        fixtures.push_back(random_structure(rng, 2 + k % 5, {el("Sr"), el("Ti"), el("O"), el("O")}));
    const std::size_t first_rigid = fixtures.size();
    for (int k = 0; k < 6; ++k)
        fixtures.push_back(rigid_fixture(rng, 3 + k % 4));

    const MatchTolerances tol;
    for (std::size_t f = 0; f < fixtures.size(); ++f) {
        const auto& s = fixtures[f];
        const std::vector<std::pair<std::string, CrystalStructure>> variants{
            {"identity", s},
            {"rotation", rotate(s, random_rotation(rng))},
            {"translation", translate(s, Vec3(0.41, -1.7, 2.3))},
            {"supercell", make_supercell(s, {2, 1, 2})},
            {"unimodular", change_basis(s, random_unimodular(rng, 6))},
        };
        for (const auto& [what, v] : variants) {
            auto r = match(s, v, tol);
            c.expect(r.matched && r.rmse && *r.rmse < 1e-6,
                     "fixture " + std::to_string(f) + " " + what + (r.rmse ? " rmse " + fmt(*r.rmse) : " unmatched"));
        }
        if (f < first_rigid)
            continue;
        // past stol after the mean shift is removed: the moved site keeps (1 - 1/n) of it
        double scale = std::cbrt(s.volume() / s.size());
        double d = 1.1 * tol.stol * scale / (1.0 - 1.0 / s.size());
        Vec3 dir = s.lattice().to_cart(Vec3(0, 0, 1)).normalized();
        c.expect(!match(s, displace_site(s, 1, d * dir), tol).matched,
                 "fixture " + std::to_string(f) + " displaced past stol still matches");
    }
}

// ---- relaxation

double moved_energy(const Calculator& calc, const CrystalStructure& s, std::size_t i, int axis, double h)
{
    auto cart = s.cart_coords();
    cart[i][axis] += h;
    return calc.evaluate(s.with_frac_coords(cart_to_frac(cart, s.lattice()))).energy;
}

CrystalStructure dimer(double r, double box = 20.0)
{
    return CrystalStructure(Lattice::cubic(box), {el("Ar"), el("Ar")}, {Vec3(0.3, 0.3, 0.3), Vec3(0.3 + r / box, 0.3, 0.3)});
}

void relaxation_physics(Checker& c)
{
    PairPotentialCalculator calc;
    std::mt19937_64 rng(91);
    const double h = 1e-4;
    for (int trial = 0; trial < 20; ++trial) {
        auto s = random_structure(rng, 4, {el("Na"), el("Cl"), el("Ar"), el("Si")}, 1.8);
        auto ev = calc.evaluate(s);
        for (std::size_t i = 0; i < s.size(); ++i)
            for (int axis = 0; axis < 3; ++axis) {
                double fd = -(moved_energy(calc, s, i, axis, h) - moved_energy(calc, s, i, axis, -h)) / (2 * h);
                c.expect(std::abs(fd - ev.forces[i][axis]) < 1e-4,
                         "force trial " + std::to_string(trial) + " site " + std::to_string(i) + ": analytic " +
                             fmt(ev.forces[i][axis]) + " vs finite difference " + fmt(fd));
            }
    }

    const double r0 = std::pow(2.0, 1.0 / 6.0) * calc.sigma(el("Ar"), el("Ar"));
    for (double start : {r0 - 0.2, r0 + 0.25}) {
        RelaxOptions opt;
        opt.fmax = 1e-4;
        opt.max_steps = 1000;
        auto r = relax(calc, dimer(start), opt);
        double d = min_image_distance(r.structure.frac_coords()[0], r.structure.frac_coords()[1], r.structure.lattice());
        c.expect(r.converged && std::abs(d - r0) < 1e-3, "dimer from " + fmt(start) + " ended at " + fmt(d));
    }

    // an unreachable force target runs into the default cap
    RelaxOptions defaults;
    c.expect(defaults.max_steps == 100, "default step cap is " + std::to_string(defaults.max_steps));
    RelaxOptions tight;
    tight.fmax = 1e-12;
    for (int trial = 0; trial < 3; ++trial) {
        auto r = relax(calc, random_structure(rng, 4, {el("Na"), el("Cl")}, 1.5), tight);
        c.expect(r.steps <= 100 && r.trajectory.size() <= 101, "relaxation ran " + std::to_string(r.steps) + " steps");
        c.expect(r.converged || r.steps == 100, "stopped early without converging");
    }
    // the relax tool refuses more than the cap
    auto tb = default_toolbox();
    ToolEnvironment env;
    env.calculator = std::make_shared<PairPotentialCalculator>();
    Value::List one{Value(nacl_primitive())};
    bool refused = false;
    try {
        tb.invoke("relax", {{"structures", Value(one)}, {"max_steps", Value(101)}}, env);
    } catch (const Error&) {
        refused = true;
    }
    c.expect(refused, "relax tool accepted max_steps=101");
}

// ---- symmetry

// Every integer matrix with entries in [-2,2] that is orthogonal in cartesian
// form, times every translation taking site 0 onto a like site.
int exhaustive_op_count(const CrystalStructure& s, double tol)
{
    const Mat3 lt = s.lattice().matrix().transpose();
    const Mat3 lt_inv = lt.inverse();
    auto f = s.frac_coords();
    int count = 0;
    IMat3 r;
    for (int code = 0; code < 1953125; ++code) {
        int x = code;
        for (int k = 0; k < 9; ++k) {
            r(k / 3, k % 3) = x % 5 - 2;
            x /= 5;
        }
        Mat3 cart = lt * r.cast<double>() * lt_inv;
        if ((cart.transpose() * cart - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-3)
            continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (s.species()[j] != s.species()[0])
                continue;
            Vec3 t = f[j] - r.cast<double>() * f[0];
            bool ok = true;
            for (std::size_t i = 0; i < s.size() && ok; ++i) {
                Vec3 g = r.cast<double>() * f[i] + t;
                bool hit = false;
                for (std::size_t k = 0; k < s.size() && !hit; ++k)
                    hit = s.species()[k] == s.species()[i] && periodic_min_distance(g, f[k], s.lattice()) <= tol;
                ok = hit;
            }
            count += ok;
        }
    }
    return count;
}

void symmetry_counts(Checker& c)
{
    const std::vector<std::tuple<std::string, CrystalStructure, int>> cases{
        {"simple cubic", simple_cubic(), 48},
        {"triclinic", CrystalStructure(Lattice::from_parameters(3.1, 3.7, 4.3, 71, 83, 97), {el("Fe")}, {Vec3(0.1, 0.2, 0.3)}),
         2},
        {"rock-salt conventional", nacl_conventional(), 192},
    };
    for (const auto& [name, s, want] : cases) {
        int oracle = exhaustive_op_count(s, 0.01);
        int got = static_cast<int>(find_symmetry_ops(s).size());
        c.expect(oracle == want, name + ": exhaustive oracle counted " + std::to_string(oracle));
        c.expect(got == want, name + ": find_symmetry_ops counted " + std::to_string(got));
    }
}

// ---- agents

std::string read_bytes(const std::filesystem::path& p) { return read_file(p.string()); }

void e2e_csp(Checker& c)
{
    TempDir a("acceptance_e2e_a"), b("acceptance_e2e_b");
    auto run = [](const std::filesystem::path& dir) {
        auto config = session_config(csp_backend());
        config.workspace = dir;
        Session s("csp", config);
        s.submit_task(csp_task());
        autopilot(s, AutopilotPolicy::ApproveAll);
        return s.snapshot();
    };
    auto snap = run(a.path);
    c.expect(snap.state == SessionState::Completed, "session ended in " + to_string(snap.state));
    if (snap.state != SessionState::Completed)
        return;
    c.expect(snap.workflow && snap.workflow->size() == 5, "workflow does not have five steps");
    c.expect(snap.workflow && snap.workflow->size() > 0 &&
                 snap.workflow->steps[0].description.rfind("Query the structural database", 0) == 0,
             "first step is not the database query");

    const auto& final_value = snap.results.at(5).bindings.at("final");
    const auto& best = final_value.at("structure").as_structure();
    c.expect(reduced_formula(best.composition()) == "Ba2Fe2F9", "final composition " + reduced_formula(best.composition()));
    bool from_relax = false;
    for (const auto& [step, result] : snap.results)
        for (const auto& [name, v] : result.bindings)
            if (name == "relaxed" && v.kind() == Value::Kind::List)
                for (const auto& r : v.as_list())
                    from_relax = from_relax || (r.contains("structure") && r.contains("steps") &&
                                                r.at("structure") == Value(best));
    c.expect(from_relax, "final structure is not one of the relaxed structures");
    auto cif = parse_cif(read_bytes(a.path / "step5_final.cif"));
    c.expect(reduced_formula(cif.composition()) == "Ba2Fe2F9", "final CIF artifact has the wrong composition");

    auto events = load_event_log(a.path / "events.jsonl");
    auto replayed = replay("csp", events);
    c.expect(replayed.to_json().dump() == snap.to_json().dump(), "replayed snapshot differs");
    auto restored = Session::restore("csp", session_config(csp_backend()), events);
    c.expect(restored->snapshot().to_json().dump() == snap.to_json().dump(), "restored snapshot differs");

    run(b.path);
    c.expect(read_bytes(a.path / "events.jsonl") == read_bytes(b.path / "events.jsonl"), "two runs wrote different logs");
    c.expect(read_bytes(a.path / "report.json") == read_bytes(b.path / "report.json"), "two runs wrote different reports");
}

void reflection_bound(Checker& c)
{
    auto tb = default_toolbox();
    StepContext ctx;
    ctx.step = {1, "analyse the seed structure", StepStatus::Approved};
    ctx.step_intuition = "use the tools";
    ctx.parameters = {{"composition", "NaCl"}};
    ToolEnvironment bare;  // no calculator, so evaluate_energy fails when it runs
    const std::string failing =
        one_call_plan(1, "evaluate_energy", R"({"structures": [)" + Value(nacl_primitive()).to_json().dump() + "]}");
    const std::string passing =
        one_call_plan(1, "analyze_symmetry", R"({"structure": )" + Value(nacl_primitive()).to_json().dump() + "}");

    for (int k = 0; k <= 4; ++k) {
        std::vector<ScriptedResponse> replies(static_cast<std::size_t>(k), ScriptedResponse{"", failing});
        replies.push_back({"", passing});
        ScriptedBackend backend(replies);
        auto out = execute_with_reflection(backend, ctx, tb, bare);
        const std::string at = "k=" + std::to_string(k) + ": ";
        if (k <= max_reflection_retries) {
            c.expect(out.ok(), at + "did not succeed");
            c.expect(!out.attempts.empty() && out.attempts.back().attempt == k, at + "succeeded at the wrong attempt");
        } else {
            c.expect(!out.ok(), at + "succeeded past the retry bound");
            c.expect(backend.remaining() == 1, at + "consumed the reply after the bound");
        }
        auto prompts = backend.prompts();
        for (std::size_t i = 1; i < prompts.size(); ++i) {
            const auto& err = out.attempts[i - 1].error;
            c.expect(err.has_value() && prompts[i].find(err->message) != std::string::npos,
                     at + "revision prompt " + std::to_string(i) + " lacks the verbatim error");
        }
    }

    // the same bound at session level: four failures leave the step Failed
    std::vector<ScriptedResponse> replies{{"", "Step 1: Analyse the seed structure."}};
    for (int i = 0; i < 4; ++i)
        replies.push_back({"", failing});
    auto config = session_config(std::make_shared<ScriptedBackend>(replies), std::make_shared<ToolEnvironment>());
    Session s("bound", config);
    TaskSpec t = csp_task();
    t.parameters = {{"composition", "NaCl"}};
    s.submit_task(t);
    s.review_plan({});
    s.run_step();
    c.expect(s.state() == SessionState::Failed, "session after four failures is " + to_string(s.state()));
}

void workflow_audit(Checker& c)
{
    const Toolbox toolbox = default_toolbox();
    TaskSpec csg;
    csg.task = "Generate new stable fluoride crystals by substituting elements into known prototypes.";
    csg.intuition = "Substitute chemically similar elements and discard anything that fails validity screening.";
    csg.kind = TaskKind::CSG;
    csg.parameters = {{"seed_composition", "Na3AlF6"}};
    const std::vector<TaskSpec> tasks{csp_task(), csg};

    auto with = ScriptedBackend::load(fixture_path("agents/audit_with_intuition.json"));
    auto yes = audit_workflows(with, tasks, true, 2, toolbox);
    auto without = ScriptedBackend::load(fixture_path("agents/audit_no_intuition.json"));
    auto no = audit_workflows(without, tasks, false, 2, toolbox);

    std::map<TaskKind, double> want_len_yes{{TaskKind::CSG, 3.0}, {TaskKind::CSP, 5.0}};
    std::map<TaskKind, double> want_len_no{{TaskKind::CSG, 3.0}, {TaskKind::CSP, 4.0}};
    for (const auto& row : yes.rows) {
        c.expect(row.validity_rate == 1.0, "with intuition " + to_string(row.kind) + " validity " + fmt(row.validity_rate));
        c.expect(row.mean_length && *row.mean_length == want_len_yes[row.kind],
                 "with intuition " + to_string(row.kind) + " mean length");
    }
    for (const auto& row : no.rows) {
        c.expect(row.validity_rate == 0.0, "without intuition " + to_string(row.kind) + " validity " + fmt(row.validity_rate));
        c.expect(row.mean_length && *row.mean_length == want_len_no[row.kind],
                 "without intuition " + to_string(row.kind) + " mean length");
    }
    c.expect(yes.rows.size() == 2 && no.rows.size() == 2, "audit rows missing");

    std::string six;
    for (int i = 1; i <= 6; ++i)
        six += "Step " + std::to_string(i) + ": part " + std::to_string(i) + "\n";
    ScriptedBackend long_plan({{"", six}});
    bool rejected = false;
    try {
        plan_workflow(long_plan, csp_task());
    } catch (const StepCountError&) {
        rejected = true;
    }
    c.expect(rejected, "a six-step plan was accepted");
    c.expect(render_planner_prompt("t", "i").find("no more than 5 steps") != std::string::npos,
             "planner prompt lacks the step limit");
}

// ---- metrics and io

void metrics_golden(Checker& c)
{
    auto f = generation_fixture();
    auto r = evaluate_generation(f.candidates, f.reference, f.hull, f.calculator, {});
    std::string got = r.to_json().dump(2) + "\n";
    std::string want = read_file(fixture_path("metrics/generation_golden.json"));
    c.expect(got == want, "report differs from the golden file:\n" + got);
    for (const char* rate : {"compositional_validity_rate", "structural_validity_rate", "stability_rate",
                             "metastability_rate_0_1", "metastability_rate_0_03", "novelty_rate", "uniqueness_rate",
                             "sun_rate"})
        c.expect(r.to_json().contains(rate), std::string("rate missing: ") + rate);
}

double periodic_delta(double a, double b)
{
    double d = a - b;
    return std::abs(d - std::round(d));
}

bool same_within(const CrystalStructure& a, const CrystalStructure& b, double tol)
{
    if (a.size() != b.size())
        return false;
    auto la = a.lattice().lengths(), lb = b.lattice().lengths();
    auto aa = a.lattice().angles(), ab = b.lattice().angles();
    for (int k = 0; k < 3; ++k)
        if (std::abs(la[k] - lb[k]) > tol || std::abs(aa[k] - ab[k]) > tol)
            return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.species()[i] != b.species()[i])
            return false;
        for (int k = 0; k < 3; ++k)
            if (periodic_delta(a.frac_coords()[i][k], b.frac_coords()[i][k]) > tol)
                return false;
    }
    return true;
}

void cif_round_trip(Checker& c)
{
    std::vector<std::pair<std::string, CrystalStructure>> fixtures;
    for (const auto& entry : std::filesystem::directory_iterator(XTAL_TEST_DATA))
        if (entry.path().extension() == ".cif")
            fixtures.emplace_back(entry.path().filename().string(), read_cif_file(entry.path().string()));
    c.expect(fixtures.size() >= 3, "expected the CIF fixtures in the test data directory");
    std::mt19937_64 rng(5);
    for (int k = 0; k < 20; ++k)
        fixtures.emplace_back("random " + std::to_string(k), random_structure(rng, 1 + k % 6, {el("Mg"), el("O"), el("Si")}));
    for (const auto& [name, s] : fixtures) {
        auto once = parse_cif(write_cif(s));
        auto twice = parse_cif(write_cif(once));
        c.expect(same_within(s, once, 1e-6), name + ": parse(write) moved by more than 1e-6");
        c.expect(same_within(once, twice, 1e-6), name + ": not a fixed point");
        c.expect(write_cif(once) == write_cif(twice), name + ": written text is not stable");
    }

    Lattice lat = Lattice::from_parameters(4.1, 5.2, 6.3, 80.0, 95.0, 105.0);
    CrystalStructure golden(lat, {el("Sr"), el("Ti"), el("O"), el("O")},
                            {Vec3(0.0, 0.0, 0.0), Vec3(0.5, 0.5, 0.5), Vec3(0.5, 0.5, 0.0), Vec3(0.123457, 0.9999999, 0.75)});
    const std::string bytes = read_file(data_path("golden_triclinic.cif"));
    c.expect(write_cif(golden) == bytes, "golden CIF bytes changed");
    c.expect(write_cif(parse_cif(bytes)) == bytes, "golden CIF does not reproduce itself");
}

} // namespace

int main()
{
    const std::vector<Criterion> criteria{
        {"validity thresholds", 1, validity_thresholds},
        {"stability semantics", 1, stability_grid},
        {"hull oracle", 5, hull_oracle},
        {"matcher invariance suite", 30, matcher_suite},
        {"relaxation physics", 30, relaxation_physics},
        {"symmetry counts", 60, symmetry_counts},
        {"end-to-end CSP session", 60, e2e_csp},
        {"reflection bound", 10, reflection_bound},
        {"workflow audit", 10, workflow_audit},
        {"metrics golden file", 60, metrics_golden},
        {"CIF round-trip", 5, cif_round_trip},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        Checker c;
        auto t0 = std::chrono::steady_clock::now();
        try {
            cr.body(c);
        } catch (const std::exception& e) {
            c.failures.push_back(std::string("exception: ") + e.what());
        }
        double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (s > cr.budget_s)
            c.failures.push_back("took " + fmt(s) + " s, budget " + fmt(cr.budget_s) + " s");
        std::printf("%s  %-26s %8.3f s (budget %g s)\n", c.failures.empty() ? "PASS" : "FAIL", cr.name.c_str(), s,
                    cr.budget_s);
        for (std::size_t i = 0; i < c.failures.size() && i < 10; ++i)
            std::printf("      %s\n", c.failures[i].c_str());
        if (c.failures.size() > 10)
            std::printf("      ... %zu more\n", c.failures.size() - 10);
        failed += !c.failures.empty();
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
