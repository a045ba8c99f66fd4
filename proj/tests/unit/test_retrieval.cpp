// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "test_helpers.hpp"
#include "xtal/retrieval/retrieval.hpp"
#include "xtal/symmetry/symmetry.hpp"

using namespace xtal;
using namespace xtal::testing;

namespace {

std::vector<StructureRecord> prototypes()
{
    return load_database(std::string(XTAL_TEST_FIXTURES) + "/prototypes.jsonl");
}

StructureRecord record(const std::string& id, const CrystalStructure& s)
{
    return {id, s, {}};
}

// Relabel a structure's species by a symbol map, keeping geometry.
CrystalStructure relabel(const CrystalStructure& s, const std::map<std::string, std::string>& m)
{
    std::vector<Element> sp;
    for (Element e : s.species())
        sp.push_back(el(m.at(std::string(e.symbol())).c_str()));
    return s.with_species(sp);
}

// Minimum over every bijection between equal-count element groups, by brute
// force over all permutations of the target elements.
double brute_force_mapping_cost(const Composition& from, const Composition& to)
{
    auto fe = from.elements();
    auto te = to.elements();
    std::sort(te.begin(), te.end());
    SubstitutionScoring scoring;
    double best = 1e300;
    do {
        bool ok = true;
        double c = 0.0;
        for (std::size_t k = 0; k < fe.size(); ++k) {
            ok = ok && from.reduced().count(fe[k]) == to.reduced().count(te[k]);
            c += scoring.cost(fe[k], te[k]);
        }
        if (ok)
            best = std::min(best, c);
    } while (std::next_permutation(te.begin(), te.end()));
    return best;
}

} // namespace

TEST_CASE("index buckets")
{
    CHECK(build_index({}).empty());

    auto idx = build_index({record("a", nacl_primitive()), record("b", cscl()), record("c", simple_cubic())});
    CHECK(idx.by_anonymous_formula("AB").size() == 2);
    CHECK(idx.by_anonymous_formula("A").size() == 1);
    CHECK(idx.by_reduced_formula("NaCl").size() == 1);
    CHECK(idx.by_element(el("Cl")).size() == 2);
    CHECK(idx.by_element(el("Fe")).empty());
    CHECK(idx.by_reduced_formula("XeF6").empty());
}

TEST_CASE("index lookups equal a linear scan on 100 records")
{
    std::mt19937_64 rng(80);
    const std::vector<Element> palette{el("Na"), el("Cl"), el("K"), el("O"), el("Mg"), el("F")};
    std::uniform_int_distribution<int> pick(0, 5), count(1, 4);
    std::vector<StructureRecord> recs;
    for (int i = 0; i < 100; ++i) {
        std::vector<Element> pal{palette[pick(rng)], palette[pick(rng)]};
        recs.push_back(record("r" + std::to_string(i), random_structure(rng, count(rng), pal, 1.2)));
    }
    auto idx = build_index(recs);
    CHECK(build_index(recs).size() == idx.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        auto comp = recs[i].structure.composition();
        std::vector<std::size_t> scan_red, scan_anon;
        for (std::size_t j = 0; j < recs.size(); ++j) {
            auto cj = recs[j].structure.composition();
            if (reduced_formula(cj) == reduced_formula(comp))
                scan_red.push_back(j);
            if (anonymous_formula(cj) == anonymous_formula(comp))
                scan_anon.push_back(j);
        }
        CHECK(idx.by_reduced_formula(reduced_formula(comp)) == scan_red);
        CHECK(idx.by_anonymous_formula(anonymous_formula(comp)) == scan_anon);
        for (Element e : comp.elements()) {
            const auto& b = idx.by_element(e);
            CHECK(std::count(b.begin(), b.end(), i) == 1);
        }
    }
    for (Element e : palette) {
        std::vector<std::size_t> scan;
        for (std::size_t j = 0; j < recs.size(); ++j)
            if (recs[j].structure.composition().count(e) > 0)
                scan.push_back(j);
        CHECK(idx.by_element(e) == scan);
    }
}

TEST_CASE("substitution cost and mapping")
{
    SubstitutionScoring s;
    // |1.88 - 1.83| + |27 - 26| / 20
    CHECK(s.cost(el("Co"), el("Fe")) == doctest::Approx(0.05 + 0.05));
    CHECK(s.cost(el("F"), el("F")) == 0.0);
    CHECK(s.cost(el("Ar"), el("Ne")) == doctest::Approx(1.0 + 8.0 / 20.0));

    auto m = best_element_mapping(Composition::from_formula("Sr2Co2F9"), Composition::from_formula("Ba2Fe2F9"));
    CHECK(m.mapping.at(el("Sr")) == el("Ba"));
    CHECK(m.mapping.at(el("Co")) == el("Fe"));
    CHECK(m.mapping.at(el("F")) == el("F"));
    CHECK(m.cost == doctest::Approx(brute_force_mapping_cost(Composition::from_formula("Sr2Co2F9"),
                                                             Composition::from_formula("Ba2Fe2F9"))));

    auto kbr = best_element_mapping(Composition::from_formula("KBr"), Composition::from_formula("NaCl"));
    CHECK(kbr.mapping.at(el("K")) == el("Na"));
    CHECK(kbr.mapping.at(el("Br")) == el("Cl"));
    double swapped = s.cost(el("K"), el("Cl")) + s.cost(el("Br"), el("Na"));
    CHECK(kbr.cost < swapped);

    CHECK_THROWS_AS(best_element_mapping(Composition::from_formula("NaCl"), Composition::from_formula("Na3AlF6")),
                    SubstitutionError);
    CHECK_THROWS_AS(best_element_mapping(Composition::from_formula("HLiBeBCNO"), Composition::from_formula("HLiBeBCNO")),
                    GuardError);

    // enumeration oracle over random equal-stoichiometry pairs
    std::mt19937_64 rng(81);
    const char* pool[] = {"Li", "Na", "K", "Mg", "Ca", "Fe", "Co", "O", "S", "F", "Cl"};
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<int> counts{1, 1, 2, 3}, counts_b = counts;
        std::shuffle(counts.begin(), counts.end(), rng);
        std::shuffle(counts_b.begin(), counts_b.end(), rng);
        std::vector<int> idx(11);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        std::map<Element, int> a, b;
        for (int k = 0; k < 4; ++k) {
            a[el(pool[idx[k]])] = counts[k];
            b[el(pool[idx[k + 4]])] = counts_b[k];
        }
        Composition ca(a), cb(b);
        CHECK(best_element_mapping(ca, cb).cost == doctest::Approx(brute_force_mapping_cost(ca, cb)));
    }
}

TEST_CASE("query_similar tiers")
{
    auto db = prototypes();
    auto idx = build_index(db);
    auto ba = Composition::from_formula("Ba2Fe2F9");
    auto hits = query_similar(ba, idx, 10);
    REQUIRE(hits.size() == 2);  // Sr2Co2F9 by stoichiometry, Na3AlF6 by shared F
    CHECK(idx.records()[hits[0].index].id == "proto-sr2co2f9");
    CHECK(hits[0].tier == SimilarityTier::SameStoichiometry);
    CHECK(idx.records()[hits[1].index].id == "proto-na3alf6");
    CHECK(hits[1].tier == SimilarityTier::SharedElements);
    CHECK(hits[1].score == doctest::Approx(1.0 - 1.0 / 5.0));

    // exact tier first
    auto with_target = db;
    with_target.push_back(record("exact", relabel(db[0].structure, {{"Sr", "Ba"}, {"Co", "Fe"}, {"F", "F"}})));
    auto idx2 = build_index(with_target);
    CHECK(idx2.records()[query_similar(ba, idx2, 1)[0].index].id == "exact");
    CHECK(query_similar(ba, idx2, 1).size() == 1);

    // rock salts: NaCl exact, then KBr and CsCl by substitution cost
    auto nacl_hits = query_similar(Composition::from_formula("NaCl"), idx, 10);
    REQUIRE(nacl_hits.size() == 4);
    CHECK(idx.records()[nacl_hits[0].index].id == "proto-nacl");
    CHECK(nacl_hits[1].tier == SimilarityTier::SameStoichiometry);
    CHECK(nacl_hits[1].score <= nacl_hits[2].score);

    CHECK_THROWS(query_similar(ba, idx, 0));
    CHECK(query_similar(Composition::from_formula("Xe"), idx, 3).empty());
}

TEST_CASE("query_similar does not depend on record order")
{
    auto db = prototypes();
    db.push_back(record("dup-a", cscl()));
    db.push_back(record("dup-b", cscl()));
    auto ids = [](const std::vector<StructureRecord>& recs) {
        auto idx = build_index(recs);
        std::vector<std::string> out;
        for (const auto& h : query_similar(Composition::from_formula("KCl"), idx, 10))
            out.push_back(idx.records()[h.index].id);
        return out;
    };
    auto ref = ids(db);
    CHECK(ref.size() == 5);  // every AB record; the fluorides share nothing with KCl
    std::mt19937_64 rng(82);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(db.begin(), db.end(), rng);
        CHECK(ids(db) == ref);
    }
}

TEST_CASE("substitute")
{
    auto db = prototypes();
    const auto& proto = db[0];
    auto out = substitute(proto, Composition::from_formula("Ba2Fe2F9"));
    CHECK(reduced_formula(out.composition()) == "Ba2Fe2F9");
    REQUIRE(out.size() == proto.structure.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.frac_coords()[i] == proto.structure.frac_coords()[i]);
    // isotropic: same angles, lengths scaled by one factor
    auto la = out.lattice().lengths(), lb = proto.structure.lattice().lengths();
    const auto& table = ElementTable::builtin();
    auto r3 = [&](const char* s) { return std::pow(table[el(s)].covalent_radius, 3); };
    double expect = std::cbrt((2 * r3("Ba") + 2 * r3("Fe") + 9 * r3("F")) / (2 * r3("Sr") + 2 * r3("Co") + 9 * r3("F")));
    for (int k = 0; k < 3; ++k)
        CHECK(la[k] / lb[k] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(prototype_signature(out) == prototype_signature(proto.structure));

    auto same = substitute(proto, proto.structure.composition());
    CHECK(same.lattice().matrix() == proto.structure.lattice().matrix());
    CHECK(std::equal(same.species().begin(), same.species().end(), proto.structure.species().begin()));

    auto nacl = substitute(db[2], Composition::from_formula("NaCl"));
    CHECK(nacl.composition() == Composition::from_formula("Na4Cl4"));
    CHECK_THROWS_AS(substitute(db[1], Composition::from_formula("Ba2Fe2F9")), SubstitutionError);
}

TEST_CASE("generate_candidates")
{
    auto db = prototypes();
    auto idx = build_index(db);
    auto ba = Composition::from_formula("Ba2Fe2F9");
    auto one = generate_candidates(ba, idx, 5);
    CHECK(one.size() == 1);

    // rock-salt duplicates collapse to one candidate, CsCl stays separate
    std::vector<StructureRecord> dups{db[1], db[2], record("nacl-prim", nacl_primitive()), db[4]};
    auto cands = generate_candidates(Composition::from_formula("KCl"), build_index(dups), 5);
    CHECK(cands.size() == 2);
    CHECK(generate_candidates(Composition::from_formula("KCl"), build_index(dups), 1).size() == 1);
    CHECK(generate_candidates(Composition::from_formula("Xe"), idx, 3).empty());
    CHECK_THROWS(generate_candidates(ba, idx, 0));

    // property: every candidate has the requested reduced formula
    std::mt19937_64 rng(83);
    const char* cations[] = {"Li", "Na", "K", "Rb", "Cs", "Ag"};
    const char* anions[] = {"F", "Cl", "Br", "I"};
    std::uniform_int_distribution<int> c(0, 5), a(0, 3);
    for (int trial = 0; trial < 8; ++trial) {
        std::string f = std::string(cations[c(rng)]) + anions[a(rng)];
        for (const auto& s : generate_candidates(Composition::from_formula(f), idx, 4))
            CHECK(reduced_formula(s.composition()) == reduced_formula(Composition::from_formula(f)));
    }
}
