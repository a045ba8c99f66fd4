// SPDX-License-Identifier: Apache-2.0
// Regenerates tests/fixtures/prototypes.jsonl (stdout) and the Ba-Fe-F hull
// entries (argv[1]). The committed fixtures came from this program; rerun only
// when the pair potential changes.
#include <cstdio>
#include <fstream>
#include <iostream>

#include "test_helpers.hpp"
#include "xtal/energy/pair_potential.hpp"
#include "xtal/energy/relax.hpp"
#include "xtal/io/database.hpp"

using namespace xtal;
using namespace xtal::testing;

namespace {

const PairPotentialCalculator calc;

// Random sequential placement keeping every pair beyond 1.05 sigma.
CrystalStructure place(std::mt19937_64& rng, const Lattice& lat, const std::vector<std::string>& symbols)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    while (true) {
        std::vector<Vec3> fc;
        std::vector<Element> sp;
        for (const auto& sym : symbols) {
            if (fc.size() < static_cast<std::size_t>(&sym - symbols.data()))
                break;  // a previous site found no room: start over
            Element e = el(sym.c_str());
            for (int attempt = 0; attempt < 5000; ++attempt) {
                Vec3 f(u(rng), u(rng), u(rng));
                bool ok = true;
                for (std::size_t k = 0; k < fc.size() && ok; ++k)
                    ok = periodic_min_distance(f, fc[k], lat) >= 1.05 * calc.sigma(e, sp[k]);
                if (ok) {
                    fc.push_back(f);
                    sp.push_back(e);
                    break;
                }
            }
        }
        if (fc.size() == symbols.size())
            return CrystalStructure(lat, sp, fc);
    }
}

CrystalStructure relaxed(const CrystalStructure& s)
{
    RelaxOptions opt;
    opt.max_steps = 5000;
    opt.fmax = 1e-3;
    auto r = relax(calc, s, opt);
    std::cerr << reduced_formula(s.composition()) << ": converged " << r.converged << " after " << r.steps
              << " steps\n";
    return r.structure;
}

double energy_per_atom(const CrystalStructure& s)
{
    return calc.evaluate(s).energy / static_cast<double>(s.size());
}

std::map<std::string, std::string> tags(const CrystalStructure& s)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", energy_per_atom(s));
    return {{"source", "synthetic"}, {"energy_per_atom", buf}};
}

CrystalStructure bcc(const char* symbol, double a)
{
    return CrystalStructure(Lattice::cubic(a), {el(symbol), el(symbol)}, {Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.5)});
}

} // namespace

int main(int argc, char** argv)
{
    if (argc < 2) {
        std::cerr << "usage: make_prototype_fixtures HULL_OUT > prototypes.jsonl\n";
        return 2;
    }
    std::mt19937_64 rng(2024);
    auto sr2co2f9 = relaxed(place(rng, Lattice::from_parameters(5.9, 6.1, 7.4, 90, 101, 90),
                                  {"Sr", "Sr", "Co", "Co", "F", "F", "F", "F", "F", "F", "F", "F", "F"}));
    auto na3alf6 = relaxed(place(rng, Lattice::from_parameters(5.4, 5.6, 7.8, 90, 90.5, 90),
                                 {"Na", "Na", "Na", "Al", "F", "F", "F", "F", "F", "F"}));
    auto kbr = rocksalt_conventional("K", "Br", 6.6);
    std::vector<StructureRecord> records{
        {"proto-sr2co2f9", sr2co2f9, tags(sr2co2f9)},
        {"proto-nacl", nacl_conventional(), tags(nacl_conventional())},
        {"proto-kbr", kbr, tags(kbr)},
        {"proto-na3alf6", na3alf6, tags(na3alf6)},
        {"proto-cscl", cscl(), tags(cscl())},
    };
    std::cout << serialize_database(records);

    std::ofstream hull(argv[1]);
    auto emit = [&](const std::string& id, const std::string& formula, const CrystalStructure& s) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "{\"composition\": \"%s\", \"energy_per_atom\": %.6f, \"id\": \"%s\"}\n",
                      formula.c_str(), energy_per_atom(relaxed(s)), id.c_str());
        hull << buf;
    };
    emit("ref-ba", "Ba", bcc("Ba", 5.0));
    emit("ref-fe", "Fe", bcc("Fe", 2.87));
    emit("ref-f", "F", bcc("F", 2.0));
    emit("ref-baf2", "BaF2", place(rng, Lattice::cubic(6.2), {"Ba", "Ba", "Ba", "Ba", "F", "F", "F", "F", "F", "F", "F", "F"}));
    emit("ref-fef3", "FeF3", place(rng, Lattice::cubic(3.9), {"Fe", "F", "F", "F"}));
    return 0;
}
