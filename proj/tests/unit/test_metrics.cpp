// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "agent_helpers.hpp"
#include "metrics_helpers.hpp"
#include "xtal/metrics/metrics.hpp"

using namespace xtal;
using namespace xtal::testing;

namespace {

GenerationReport evaluate_fixture(const GenerationFixture& f, int threads = 1)
{
    GenerationOptions o;
    o.threads = threads;
    return evaluate_generation(f.candidates, f.reference, f.hull, f.calculator, o);
}

TaskSpec csg_task()
{
    TaskSpec t;
    t.task = "Generate new stable fluoride crystals by substituting elements into known prototypes.";
    t.intuition = "Substitute chemically similar elements and discard anything that fails validity screening.";
    t.kind = TaskKind::CSG;
    t.parameters = {{"seed_composition", "Na3AlF6"}};
    return t;
}

} // namespace

TEST_CASE("generation metrics match the hand-computed golden report")
{
    auto f = generation_fixture();
    auto r = evaluate_fixture(f);
    CHECK(r.to_json().dump(2) + "\n" == read_file(fixture_path("metrics/generation_golden.json")));

    REQUIRE(r.candidates.size() == 10);
    const auto& c = r.candidates;
    CHECK_FALSE(c[0].novel);
    CHECK(c[0].e_hull.value() == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(c[1].unique);
    CHECK_FALSE(c[2].unique);  // same group as #1
    CHECK(c[2].flags.stable);
    CHECK(c[6].e_hull.value() == doctest::Approx(1.0 / 6.0).epsilon(1e-9));
    CHECK_FALSE(c[6].compositionally_valid);
    CHECK(c[7].compositionally_valid);  // elemental, zero oxidation state
    CHECK_FALSE(c[7].flags.stable);  // a single element never counts as stable
    CHECK_FALSE(c[8].structurally_valid);
    CHECK(c[8].compositionally_valid);
    CHECK_FALSE(c[9].error.empty());
    CHECK_FALSE(c[9].energy_per_atom.has_value());
    CHECK_FALSE(c[9].structurally_valid);
    CHECK_FALSE(c[9].novel);
    for (std::size_t i : {1u, 3u, 5u})
        CHECK(c[i].sun);
}

TEST_CASE("generation metrics do not depend on candidate order or thread count")
{
    auto f = generation_fixture();
    const auto golden = evaluate_fixture(f).to_json();
    CHECK(evaluate_fixture(f, 4).to_json() == golden);

    std::mt19937 rng(17);
    for (int trial = 0; trial < 8; ++trial) {
        std::shuffle(f.candidates.begin(), f.candidates.end(), rng);
        CHECK(evaluate_fixture(f).to_json() == golden);
    }
}

TEST_CASE("generation rates obey their orderings on random subsets")
{
    const auto full = generation_fixture();
    std::mt19937 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        GenerationFixture f = full;
        f.candidates.clear();
        std::bernoulli_distribution keep(0.5);
        for (const auto& s : full.candidates)
            if (keep(rng))
                f.candidates.push_back(s);
        if (f.candidates.empty())
            continue;
        auto r = evaluate_fixture(f);
        CHECK(r.n_sun <= r.n_unique_stable);
        CHECK(r.n_unique_stable <= r.n_stable);
        CHECK(r.stability_rate <= r.metastability_rate_0_03 + 1e-12);
        CHECK(r.metastability_rate_0_03 <= r.metastability_rate_0_1 + 1e-12);
        CHECK(r.sun_rate <= r.stability_rate + 1e-12);
        CHECK(r.sun_rate <= r.novelty_rate + 1e-12);
        for (double v : {r.structural_validity_rate, r.compositional_validity_rate, r.uniqueness_rate,
                         r.novelty_rate})
            CHECK((v >= 0.0 && v <= 1.0));
    }
}

TEST_CASE("generation edge cases")
{
    auto f = generation_fixture();

    SUBCASE("a single elemental candidate has no S.U.N. credit")
    {
        auto r = evaluate_generation({f.candidates[7]}, f.reference, f.hull, f.calculator);
        CHECK(r.n_stable == 0);
        CHECK(r.uniqueness_rate == 0.0);
        CHECK(r.sun_rate == 0.0);
        CHECK(r.novelty_rate == 1.0);
    }

    SUBCASE("candidates copied from the reference are not novel")
    {
        std::vector<StructureRecord> reference = f.reference;
        for (std::size_t i = 0; i < 9; ++i)
            reference.push_back({"copy-" + std::to_string(i), f.candidates[i], {}});
        auto r = evaluate_generation(f.candidates, reference, f.hull, f.calculator);
        CHECK(r.novelty_rate == 0.0);
        CHECK(r.n_sun == 0);
        CHECK(r.n_stable == 4);
    }

    SUBCASE("missing elemental reference")
    {
        std::vector<HullEntry> hull;
        for (const auto& e : f.hull)
            if (e.id != "ref-O")
                hull.push_back(e);
        CHECK_THROWS_AS(evaluate_generation(f.candidates, f.reference, hull, f.calculator), HullError);
    }

    SUBCASE("empty candidate list")
    {
        CHECK_THROWS_AS(evaluate_generation({}, f.reference, f.hull, f.calculator), Error);
    }

    SUBCASE("table and per-candidate output")
    {
        auto r = evaluate_fixture(f);
        auto table = r.to_table();
        CHECK(table.find("S.U.N.") != std::string::npos);
        CHECK(table.find("0.300") != std::string::npos);
        auto rows = r.candidates_json();
        REQUIRE(rows.size() == 10);
        CHECK(rows[9].contains("error"));
    }
}

TEST_CASE("csp evaluation counts matches and skips missing predictions")
{
    auto nacl = rocksalt_primitive("Na", "Cl", 5.64);
    auto strained = rocksalt_primitive("Na", "Cl", 5.70);
    auto mgo = rocksalt_primitive("Mg", "O", 4.21);
    auto r = evaluate_csp({nacl, std::nullopt, cscl_type("Mg", "O", 2.6)}, {strained, mgo, mgo});
    CHECK(r.n_pairs == 3);
    CHECK(r.n_matched == 1);
    CHECK(r.match_rate == doctest::Approx(1.0 / 3.0));
    REQUIRE(r.mean_rmse.has_value());
    CHECK(*r.mean_rmse < 0.1);
    CHECK(r.to_json()["n_matched"] == 1);

    auto none = evaluate_csp({std::nullopt}, {mgo});
    CHECK(none.match_rate == 0.0);
    CHECK_FALSE(none.mean_rmse.has_value());
    CHECK_THROWS(evaluate_csp({nacl}, {nacl, mgo}));
}

TEST_CASE("workflow audit with and without intuition")
{
    const Toolbox toolbox = default_toolbox();
    const std::vector<TaskSpec> tasks = {csp_task(), csg_task()};

    SUBCASE("with intuition every sampled workflow executes")
    {
        auto backend = ScriptedBackend::load(fixture_path("agents/audit_with_intuition.json"));
        auto r = audit_workflows(backend, tasks, true, 2, toolbox);
        CHECK(backend.remaining() == 0);
        REQUIRE(r.rows.size() == 2);
        CHECK(r.rows[0].kind == TaskKind::CSG);
        CHECK(r.rows[0].validity_rate == 1.0);
        CHECK(r.rows[0].mean_length.value() == 3.0);
        CHECK(r.rows[1].kind == TaskKind::CSP);
        CHECK(r.rows[1].validity_rate == 1.0);
        CHECK(r.rows[1].mean_length.value() == 5.0);
        CHECK(r.samples.size() == 4);
    }

    SUBCASE("without intuition the setup-first workflows are rejected")
    {
        auto backend = ScriptedBackend::load(fixture_path("agents/audit_no_intuition.json"));
        auto r = audit_workflows(backend, tasks, false, 2, toolbox);
        CHECK(backend.remaining() == 0);
        for (const auto& row : r.rows)
            CHECK(row.validity_rate == 0.0);
        CHECK(r.rows[0].mean_length.value() == 3.0);
        CHECK(r.rows[1].mean_length.value() == 4.0);
        for (const auto& s : r.samples)
            CHECK(s.reason.find("unknown tool") != std::string::npos);
        CHECK(r.to_json()["with_intuition"] == false);
        CHECK(r.to_table().find("csp") != std::string::npos);
    }

    SUBCASE("an over-long workflow is invalid and has no length")
    {
        std::string six;
        for (int i = 1; i <= 6; ++i)
            six += "Step " + std::to_string(i) + ": Do part " + std::to_string(i) + ".\n";
        ScriptedBackend backend({{"", six}});
        auto r = audit_workflows(backend, {csp_task()}, true, 1, toolbox);
        REQUIRE(r.samples.size() == 1);
        CHECK_FALSE(r.samples[0].valid);
        CHECK_FALSE(r.samples[0].length.has_value());
        CHECK_FALSE(r.rows[0].mean_length.has_value());
    }

    SUBCASE("an exhausted backend marks the sample invalid")
    {
        ScriptedBackend backend(std::vector<ScriptedResponse>{});
        auto r = audit_workflows(backend, {csp_task()}, true, 1, toolbox);
        CHECK_FALSE(r.samples[0].valid);
        CHECK_FALSE(r.samples[0].reason.empty());
    }
}
