// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <limits>
#include <set>

#include "test_helpers.hpp"
#include "xtal/core/errors.hpp"

using namespace xtal;
using namespace xtal::testing;

namespace {

// Plain-loop row-vector product, independent of Lattice::to_cart.
Vec3 matmul_oracle(const Vec3& f, const Mat3& rows)
{
    Vec3 out(0, 0, 0);
    for (int col = 0; col < 3; ++col)
        for (int k = 0; k < 3; ++k)
            out[col] += f[k] * rows(k, col);
    return out;
}

// Brute-force periodic minimum over a 5^3 image grid.
double min_distance_grid_oracle(const Vec3& a, const Vec3& b, const Mat3& rows)
{
    double best = std::numeric_limits<double>::infinity();
    for (int i = -2; i <= 2; ++i)
        for (int j = -2; j <= 2; ++j)
            for (int k = -2; k <= 2; ++k)
                best = std::min(best, matmul_oracle(b + Vec3(i, j, k) - a, rows).norm());
    return best;
}

} // namespace

TEST_CASE("element table covers Z=1..103 with expected entries")
{
    const auto& t = ElementTable::builtin();
    CHECK(t[Element(1)].symbol == "H");
    CHECK(t[Element(103)].symbol == "Lr");
    CHECK(t[el("Fe")].oxidation_states == std::vector<int>{2, 3});
    CHECK(t[el("O")].electronegativity.value() == doctest::Approx(3.44));
    CHECK_FALSE(t[el("He")].electronegativity.has_value());
    CHECK_THROWS_AS(Element(0), UnknownElementError);
    CHECK_THROWS_AS(Element::from_symbol("Xx"), UnknownElementError);
    CHECK(Element::from_label("Fe3+")->symbol() == "Fe");
    CHECK(Element::from_label("Na1")->symbol() == "Na");
    CHECK(Element::from_label("CL2")->symbol() == "Cl");
    CHECK_FALSE(Element::from_label("Qq").has_value());
}

TEST_CASE("element overrides replace selected columns only")
{
    auto t = ElementTable::builtin().with_overrides(R"({"electronegativity": {"Fe": 2.5}, "oxidation_states": {"Fe": [3, 2, 6]}})");
    CHECK(t[el("Fe")].electronegativity.value() == 2.5);
    CHECK(t[el("Fe")].oxidation_states == std::vector<int>{2, 3, 6});
    CHECK(t[el("Co")].oxidation_states == ElementTable::builtin()[el("Co")].oxidation_states);
    CHECK_THROWS_AS(ElementTable::builtin().with_overrides(R"({"electronegativity": {"Zz": 1}})"), UnknownElementError);
    CHECK_THROWS(ElementTable::builtin().with_overrides(R"({"bogus": {}})"));
}

TEST_CASE("frac_to_cart examples")
{
    auto cubic = Lattice::cubic(4.0);
    CHECK((cubic.to_cart(Vec3(0.5, 0, 0)) - Vec3(2, 0, 0)).norm() == 0.0);
    CHECK(cubic.to_cart(Vec3::Zero()).norm() == 0.0);

    Mat3 rows;
    rows << 2, 0, 0, 0, 2, 0, 1, 1, 2;
    Lattice tri(rows);
    Vec3 f(0.25, 0.25, 0.25);
    // 0.25*(2,0,0) + 0.25*(0,2,0) + 0.25*(1,1,2)
    Vec3 by_hand(0.75, 0.75, 0.5);
    CHECK((matmul_oracle(f, rows) - by_hand).norm() < 1e-15);
    CHECK((tri.to_cart(f) - by_hand).norm() < 1e-12);
}

TEST_CASE("frac/cart round trip and degenerate lattice")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        Lattice lat = random_lattice(rng);
        Vec3 f(u(rng), u(rng), u(rng));
        CHECK((lat.to_frac(lat.to_cart(f)) - f).norm() < 1e-9);
        Vec3 r(u(rng), u(rng), u(rng));
        CHECK((lat.to_cart(lat.to_frac(r)) - r).norm() < 1e-9);
    }
    Mat3 singular;
    singular << 1, 0, 0, 0, 1, 0, 1, 1, 0;
    CHECK_THROWS_AS(Lattice{singular}, DegenerateLatticeError);
}

TEST_CASE("min_image_distance examples")
{
    CHECK(min_image_distance(Vec3(0, 0, 0), Vec3(0.9, 0, 0), Lattice::cubic(4)) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(min_image_distance(Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.5), Lattice::cubic(2)) ==
          doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("min_image_distance equals a 5^3 grid brute force on reduced triclinic cells")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        Lattice lat = niggli_reduce(random_lattice(rng, 2.0, 9.0));
        Vec3 a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
        double expect = min_distance_grid_oracle(a, b, lat.matrix());
        CHECK(min_image_distance(a, b, lat) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(periodic_min_distance(a, b, lat) == doctest::Approx(expect).epsilon(1e-12));
        // symmetry and integer-translation invariance
        CHECK(min_image_distance(b, a, lat) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(min_image_distance(a + Vec3(1, -2, 3), b, lat) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("periodic_min_distance is exact on skewed cells")
{
    Mat3 rows;
    rows << 1, 0, 0, 7, 1, 0, 3, 5, 1;  // heavily skewed simple cubic lattice, a=1
    Lattice lat(rows);
    CHECK(shortest_lattice_vector(lat) == doctest::Approx(1.0));
    CHECK(periodic_min_distance(Vec3(0, 0, 0), Vec3(0.5, 0, 0), lat) == doctest::Approx(0.5));
}

TEST_CASE("make_supercell")
{
    auto s = nacl_primitive();
    auto same = make_supercell(s, {1, 1, 1});
    CHECK(same.size() == 2);
    CHECK((same.lattice().matrix() - s.lattice().matrix()).norm() == 0.0);

    auto big = make_supercell(s, {2, 1, 1});
    CHECK(big.size() == 4);
    CHECK(big.volume() == doctest::Approx(2 * s.volume()));
    CHECK(reduced_formula(big.composition()) == "NaCl");

    auto cube = make_supercell(s, {2, 2, 2});
    CHECK(cube.size() == 16);
    CHECK(cube.volume() / cube.size() == doctest::Approx(s.volume() / s.size()).epsilon(1e-12));

    IMat3 m;
    m << 1, 1, 0, -1, 1, 0, 0, 0, 1;
    auto general = make_supercell_matrix(s, m);
    CHECK(general.size() == 4);
    CHECK(general.volume() == doctest::Approx(2 * s.volume()));
    CHECK_THROWS(make_supercell(s, {0, 1, 1}));
}

TEST_CASE("niggli_reduce examples")
{
    auto cubic = niggli_reduce(Lattice::cubic(3.0));
    auto l = cubic.lengths();
    auto a = cubic.angles();
    for (int k = 0; k < 3; ++k) {
        CHECK(l[k] == doctest::Approx(3.0));
        CHECK(a[k] == doctest::Approx(90.0));
    }

    Mat3 rows;
    rows << 4, 0, 0, 4, 4, 0, 0, 0, 4;
    auto red = niggli_reduce_with_transform(Lattice(rows));
    CHECK(red.lattice.volume() == doctest::Approx(64.0));
    CHECK(red.transform.cast<double>().determinant() == doctest::Approx(1.0));
    CHECK(is_niggli_reduced(red.lattice));
    for (double len : red.lattice.lengths())
        CHECK(len == doctest::Approx(4.0));
}

TEST_CASE("niggli_reduce is invariant across unimodular re-representations")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        Lattice base = random_lattice(rng, 2.5, 8.0);
        auto ref = niggli_reduce(base);
        REQUIRE(is_niggli_reduced(ref));
        auto ref_l = ref.lengths();
        auto ref_a = ref.angles();
        for (int rep = 0; rep < 10; ++rep) {
            IMat3 u = random_unimodular(rng, 6);
            auto red = niggli_reduce_with_transform(base.transformed(u));
            CHECK(is_niggli_reduced(red.lattice));
            CHECK(red.lattice.volume() == doctest::Approx(base.volume()).epsilon(1e-9));
            auto l = red.lattice.lengths();
            auto a = red.lattice.angles();
            for (int k = 0; k < 3; ++k) {
                CHECK(std::abs(l[k] - ref_l[k]) < 1e-5);
                CHECK(std::abs(a[k] - ref_a[k]) < 1e-5);
            }
            // the transform relates the two bases by an integer matrix
            Mat3 rel = red.lattice.matrix() * base.matrix().inverse();
            CHECK((rel - rel.array().round().matrix()).norm() < 1e-6);
        }
    }
}

TEST_CASE("niggli_reduce on structures keeps geometry")
{
    std::mt19937_64 rng(5);
    auto s = random_structure(rng, 4, {el("Na"), el("Cl")});
    auto skewed = change_basis(s, random_unimodular(rng, 6));
    auto red = niggli_reduce(skewed);
    CHECK(is_niggli_reduced(red.lattice()));
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            CHECK(periodic_min_distance(red.frac_coords()[i], red.frac_coords()[j], red.lattice()) ==
                  doctest::Approx(periodic_min_distance(s.frac_coords()[i], s.frac_coords()[j], s.lattice())));
}

TEST_CASE("structure invariants")
{
    auto s = CrystalStructure(Lattice::cubic(3), {el("Na")}, {Vec3(1.2, -0.25, 3.0)});
    CHECK(s.frac_coords()[0][0] == doctest::Approx(0.2));
    CHECK(s.frac_coords()[0][1] == doctest::Approx(0.75));
    CHECK(s.frac_coords()[0][2] == 0.0);
    CHECK_THROWS(CrystalStructure(Lattice::cubic(3), {}, {}));
    CHECK_THROWS(CrystalStructure(Lattice::cubic(3), {el("Na")}, {}));
    for (const auto& f : CrystalStructure(Lattice::cubic(3), {el("Na")}, {Vec3(-1e-18, 0, 0)}).frac_coords())
        CHECK((f[0] >= 0.0 && f[0] < 1.0));
}

TEST_CASE("reduced and anonymous formulas")
{
    auto bfo = Composition::from_formula("Ba2Fe2F9");
    CHECK(reduced_formula(bfo) == "Ba2Fe2F9");
    CHECK(anonymous_formula(bfo) == "A9B2C2");
    CHECK(reduced_formula(Composition::from_formula("Na2Cl2")) == "NaCl");
    CHECK(reduced_formula(Composition::from_formula("O3Fe2")) == "Fe2O3");
    CHECK(reduced_formula(Composition::from_formula("Ca(OH)2")) == "CaH2O2");
    CHECK(anonymous_formula(Composition::from_formula("Na3AlF6")) == "A6B3C");
    CHECK_THROWS_AS(Composition::from_formula("Na0Cl"), FormulaError);
    CHECK_THROWS_AS(Composition::from_formula("XyCl"), UnknownElementError);
    CHECK_THROWS_AS(Composition::from_formula(""), FormulaError);
}

TEST_CASE("equal-count binaries share anonymous formula AB (enumeration)")
{
    std::set<std::string> seen;
    const char* cations[] = {"Mg", "Ca", "Na", "K", "Zn"};
    const char* anions[] = {"O", "S", "Cl", "Br"};
    for (auto c : cations)
        for (auto a : anions)
            for (int k = 1; k <= 4; ++k) {
                std::map<Element, int> counts{{el(c), k}, {el(a), k}};
                seen.insert(anonymous_formula(Composition(counts)));
            }
    CHECK(seen == std::set<std::string>{"AB"});
}

TEST_CASE("supercell preserves reduced formula and density")
{
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        auto s = random_structure(rng, 3, {el("Mg"), el("O"), el("O")});
        auto big = make_supercell(s, {2, 1, 2});
        CHECK(reduced_formula(big.composition()) == reduced_formula(s.composition()));
        CHECK(std::abs(big.size() / big.volume() - s.size() / s.volume()) < 1e-9);
    }
}
