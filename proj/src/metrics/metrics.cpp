// SPDX-License-Identifier: Apache-2.0
#include "xtal/metrics/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <thread>

#include "xtal/agents/tool_plan.hpp"
#include "xtal/validity/validity.hpp"

namespace xtal {

namespace {

double ratio(std::size_t num, std::size_t den)
{
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string system_key(const std::vector<Element>& elements)
{
    std::vector<std::string> syms;
    for (Element e : elements)
        syms.emplace_back(e.symbol());
    std::sort(syms.begin(), syms.end());
    std::string key;
    for (const auto& s : syms)
        key += s + "-";
    return key;
}

std::string row(const std::string& name, const std::string& value)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-28s %12s\n", name.c_str(), value.c_str());
    return buf;
}

std::string fixed(double x, int digits = 4)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn)
{
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
                fn(i);
        });
    for (auto& t : pool)
        t.join();
}

} // namespace

nlohmann::json CandidateEvaluation::to_json() const
{
    auto opt = [](const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(); };
    return {{"index", index},
            {"formula", relaxed ? nlohmann::json(reduced_formula(relaxed->composition())) : nlohmann::json()},
            {"energy_per_atom", opt(energy_per_atom)},
            {"e_hull", opt(e_hull)},
            {"structurally_valid", structurally_valid},
            {"compositionally_valid", compositionally_valid},
            {"stable", flags.stable},
            {"metastable_0_1", flags.metastable_0_1},
            {"metastable_0_03", flags.metastable_0_03},
            {"novel", novel},
            {"unique", unique},
            {"sun", sun},
            {"error", error}};
}

nlohmann::json GenerationReport::to_json() const
{
    nlohmann::json j;
    j["n_candidates"] = n_candidates;
    j["n_stable"] = n_stable;
    j["n_unique_stable"] = n_unique_stable;
    j["n_sun"] = n_sun;
    j["structural_validity_rate"] = structural_validity_rate;
    j["compositional_validity_rate"] = compositional_validity_rate;
    j["metastability_rate_0_1"] = metastability_rate_0_1;
    j["metastability_rate_0_03"] = metastability_rate_0_03;
    j["stability_rate"] = stability_rate;
    j["uniqueness_rate"] = uniqueness_rate;
    j["novelty_rate"] = novelty_rate;
    j["sun_rate"] = sun_rate;
    return j;
}

nlohmann::json GenerationReport::candidates_json() const
{
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : candidates)
        out.push_back(c.to_json());
    return out;
}

std::string GenerationReport::to_table() const
{
    std::string out = row("metric", "value");
    out += row("candidates", std::to_string(n_candidates));
    out += row("stable", std::to_string(n_stable));
    out += row("structural validity", fixed(structural_validity_rate));
    out += row("compositional validity", fixed(compositional_validity_rate));
    out += row("metastable (< 0.1 eV/atom)", fixed(metastability_rate_0_1));
    out += row("metastable (< 0.03 eV/atom)", fixed(metastability_rate_0_03));
    out += row("stability", fixed(stability_rate));
    out += row("uniqueness (of stable)", fixed(uniqueness_rate));
    out += row("novelty", fixed(novelty_rate));
    out += row("S.U.N.", fixed(sun_rate));
    return out;
}

GenerationReport evaluate_generation(const std::vector<CrystalStructure>& candidates,
                                     const std::vector<StructureRecord>& reference,
                                     const std::vector<HullEntry>& hull, const Calculator& calculator,
                                     const GenerationOptions& options)
{
    if (candidates.empty())
        throw Error("evaluate_generation needs at least one candidate");
    options.match.validate();

    std::map<std::string, PhaseHull> hulls;
    for (const auto& c : candidates) {
        auto elements = c.composition().elements();
        auto key = system_key(elements);
        if (!hulls.count(key))
            hulls.emplace(key, build_hull(hull, elements));
    }

    GenerationReport report;
    report.n_candidates = candidates.size();
    report.candidates.resize(candidates.size());
    const int threads = calculator.thread_safe() ? options.threads : 1;
    parallel_for(candidates.size(), threads, [&](std::size_t i) {
        auto& ev = report.candidates[i];
        ev.index = i;
        const auto& input = candidates[i];
        try {
            CrystalStructure s = input;
            double energy = 0.0;
            if (options.relax_candidates) {
                auto r = relax(calculator, input, options.relax);
                if (r.error)
                    throw EvaluationError(*r.error);
                s = r.structure;
                energy = r.evaluation.energy;
            } else {
                energy = calculator.evaluate(input).energy;
            }
            ev.relaxed = s;
            ev.energy_per_atom = energy / static_cast<double>(s.size());
            auto v = check_validity(s);
            ev.structurally_valid = v.structural_ok;
            ev.compositionally_valid = v.compositional_ok;
            const auto comp = s.composition();
            ev.e_hull = energy_above_hull({comp, *ev.energy_per_atom, "candidate"},
                                          hulls.at(system_key(comp.elements())));
            ev.flags = classify_stability(*ev.e_hull, comp);
        } catch (const Error& e) {
            ev = CandidateEvaluation{};
            ev.index = i;
            ev.error = e.what();
        }
    });

    // Novelty against the reference set, on relaxed structures.
    std::vector<CrystalStructure> evaluated;
    std::vector<std::size_t> evaluated_index;
    for (const auto& ev : report.candidates)
        if (ev.relaxed) {
            evaluated.push_back(*ev.relaxed);
            evaluated_index.push_back(ev.index);
        }
    auto novel = novelty(evaluated, reference, options.match);
    for (std::size_t k = 0; k < evaluated.size(); ++k)
        report.candidates[evaluated_index[k]].novel = novel[k];

    // Uniqueness among stable candidates; S.U.N. among stable and novel ones.
    auto mark_groups = [&](auto keep, auto set_flag) {
        std::vector<CrystalStructure> subset;
        std::vector<std::size_t> idx;
        for (const auto& ev : report.candidates)
            if (keep(ev)) {
                subset.push_back(*ev.relaxed);
                idx.push_back(ev.index);
            }
        auto groups = dedup(subset, options.match);
        for (const auto& g : groups)
            set_flag(report.candidates[idx[static_cast<std::size_t>(g.front())]]);
        return std::pair{idx.size(), groups.size()};
    };
    auto [n_stable, n_unique] =
        mark_groups([](const CandidateEvaluation& ev) { return ev.flags.stable; },
                    [](CandidateEvaluation& ev) { ev.unique = true; });
    auto [n_stable_novel, n_sun] =
        mark_groups([](const CandidateEvaluation& ev) { return ev.flags.stable && ev.novel; },
                    [](CandidateEvaluation& ev) { ev.sun = true; });
    (void)n_stable_novel;

    std::size_t sv = 0, cv = 0, m1 = 0, m03 = 0, nv = 0;
    for (const auto& ev : report.candidates) {
        sv += ev.structurally_valid;
        cv += ev.compositionally_valid;
        m1 += ev.flags.metastable_0_1;
        m03 += ev.flags.metastable_0_03;
        nv += ev.novel;
    }
    const std::size_t n = report.n_candidates;
    report.n_stable = n_stable;
    report.n_unique_stable = n_unique;
    report.n_sun = n_sun;
    report.structural_validity_rate = ratio(sv, n);
    report.compositional_validity_rate = ratio(cv, n);
    report.metastability_rate_0_1 = ratio(m1, n);
    report.metastability_rate_0_03 = ratio(m03, n);
    report.stability_rate = ratio(n_stable, n);
    report.uniqueness_rate = ratio(n_unique, n_stable);
    report.novelty_rate = ratio(nv, n);
    report.sun_rate = ratio(n_sun, n);
    return report;
}

nlohmann::json CspReport::to_json() const
{
    return {{"n_pairs", n_pairs},
            {"n_matched", n_matched},
            {"match_rate", match_rate},
            {"mean_rmse", mean_rmse ? nlohmann::json(*mean_rmse) : nlohmann::json()}};
}

std::string CspReport::to_table() const
{
    std::string out = row("metric", "value");
    out += row("pairs", std::to_string(n_pairs));
    out += row("matched", std::to_string(n_matched));
    out += row("match rate", fixed(match_rate));
    out += row("mean RMSE", mean_rmse ? fixed(*mean_rmse, 6) : "n/a");
    return out;
}

CspReport evaluate_csp(const std::vector<std::optional<CrystalStructure>>& predictions,
                       const std::vector<CrystalStructure>& ground_truths, const MatchTolerances& tol)
{
    if (predictions.size() != ground_truths.size())
        throw Error("evaluate_csp: " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(ground_truths.size()) + " ground truths");
    auto m = match_rate(predictions, ground_truths, tol);
    return {m.total, m.matched, m.rate, m.mean_rmse};
}

nlohmann::json AuditSample::to_json() const
{
    return {{"kind", to_string(kind)},
            {"trial", trial},
            {"valid", valid},
            {"length", length ? nlohmann::json(*length) : nlohmann::json()},
            {"reason", reason}};
}

nlohmann::json AuditReport::to_json() const
{
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows)
        rows_json.push_back({{"kind", to_string(r.kind)},
                             {"samples", r.samples},
                             {"valid", r.valid},
                             {"validity_rate", r.validity_rate},
                             {"mean_length", r.mean_length ? nlohmann::json(*r.mean_length) : nlohmann::json()}});
    nlohmann::json samples_json = nlohmann::json::array();
    for (const auto& s : samples)
        samples_json.push_back(s.to_json());
    return {{"with_intuition", with_intuition}, {"rows", rows_json}, {"samples", samples_json}};
}

std::string AuditReport::to_table() const
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-6s %8s %8s %10s %12s\n", "task", "samples", "valid", "validity", "mean steps");
    std::string out = buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-6s %8d %8d %9.1f%% %12s\n", to_string(r.kind).c_str(), r.samples, r.valid,
                      100.0 * r.validity_rate, r.mean_length ? fixed(*r.mean_length, 2).c_str() : "n/a");
        out += buf;
    }
    return out;
}

AuditReport audit_workflows(LanguageBackend& backend, const std::vector<TaskSpec>& tasks, bool with_intuition,
                            int trials, const Toolbox& toolbox, const DecodeParams& params)
{
    if (trials < 1)
        throw Error("audit needs at least one trial per task");
    if (tasks.empty())
        throw Error("audit needs at least one task");
    AuditReport report;
    report.with_intuition = with_intuition;

    for (const auto& original : tasks) {
        TaskSpec task = original;
        if (!with_intuition) {
            task.intuition.clear();
            task.step_intuitions.clear();
        }
        for (int trial = 0; trial < trials; ++trial) {
            AuditSample sample;
            sample.kind = task.kind;
            sample.trial = trial;
            try {
                auto wf = plan_workflow(backend, task, {}, params);
                sample.length = wf.size();
                std::optional<StepResult> previous;
                sample.valid = true;
                for (const auto& step : wf.steps) {
                    StepContext ctx;
                    ctx.step = step;
                    ctx.previous_result = previous;
                    auto it = task.step_intuitions.find(step.index);
                    ctx.step_intuition = it != task.step_intuitions.end() ? it->second : task.intuition;
                    ctx.parameters = task.parameters;
                    ctx.dry_run = true;
                    try {
                        auto plan = generate_tool_plan(backend, ctx, toolbox, params);
                        std::map<std::string, Value> placeholders;
                        for (const auto& c : plan.calls)
                            placeholders.emplace(c.binding(), Value());
                        previous = StepResult::from_bindings(std::move(placeholders));
                    } catch (const PlanError& e) {
                        sample.valid = false;
                        sample.reason = "step " + std::to_string(step.index) + ": " + e.what();
                        break;
                    }
                }
            } catch (const Error& e) {
                sample.valid = false;
                sample.reason = e.what();
            }
            report.samples.push_back(sample);
        }
    }

    for (auto kind : {TaskKind::CSG, TaskKind::CSP, TaskKind::PropertyGuided}) {
        AuditRow r;
        r.kind = kind;
        int parsed = 0;
        double total_length = 0.0;
        for (const auto& s : report.samples) {
            if (s.kind != kind)
                continue;
            ++r.samples;
            r.valid += s.valid;
            if (s.length) {
                ++parsed;
                total_length += *s.length;
            }
        }
        if (r.samples == 0)
            continue;
        r.validity_rate = static_cast<double>(r.valid) / r.samples;
        if (parsed > 0)
            r.mean_length = total_length / parsed;
        report.rows.push_back(r);
    }
    return report;
}

} // namespace xtal
