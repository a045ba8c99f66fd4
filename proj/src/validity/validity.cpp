// SPDX-License-Identifier: Apache-2.0
#include "xtal/validity/validity.hpp"

#include <algorithm>
#include <limits>

#include "xtal/core/errors.hpp"

namespace xtal {

StructuralValidity structural_validity(const CrystalStructure& s)
{
    StructuralValidity out;
    out.volume = s.volume();
    double best = shortest_lattice_vector(s.lattice());
    auto frac = s.frac_coords();
    for (std::size_t i = 0; i < frac.size(); ++i)
        for (std::size_t j = i + 1; j < frac.size(); ++j)
            best = std::min(best, periodic_min_distance(frac[i], frac[j], s.lattice()));
    out.min_distance = best;
    out.ok = out.min_distance >= min_valid_distance && out.volume >= min_valid_volume;
    return out;
}

std::vector<OxidationAssignment> charge_neutral_assignments(const Composition& c, const ElementTable& table)
{
    if (c.num_elements() > max_oxidation_search_elements)
        throw GuardError("oxidation-state search refused: " + std::to_string(c.num_elements()) +
                         " elements exceeds the limit of " + std::to_string(max_oxidation_search_elements));
    auto reduced = c.reduced();
    auto elements = reduced.elements();
    if (elements.size() == 1)
        return {OxidationAssignment{{elements[0], 0}}};

    std::vector<OxidationAssignment> out;
    std::vector<int> chosen(elements.size(), 0);
    // Depth-first over one state per element; integer sums, no tolerance.
    auto recurse = [&](auto&& self, std::size_t k, long sum) -> void {
        if (k == elements.size()) {
            if (sum == 0) {
                OxidationAssignment a;
                for (std::size_t i = 0; i < elements.size(); ++i)
                    a[elements[i]] = chosen[i];
                out.push_back(std::move(a));
            }
            return;
        }
        for (int state : table[elements[k]].oxidation_states) {
            chosen[k] = state;
            self(self, k + 1, sum + static_cast<long>(state) * reduced.count(elements[k]));
        }
    };
    recurse(recurse, 0, 0);
    return out;
}

bool electronegativity_balanced(const OxidationAssignment& a, const ElementTable& table)
{
    double max_cation = -std::numeric_limits<double>::infinity();
    double min_anion = std::numeric_limits<double>::infinity();
    for (const auto& [e, state] : a) {
        if (state == 0)
            continue;
        const auto& en = table[e].electronegativity;
        if (!en)
            return false;
        if (state > 0)
            max_cation = std::max(max_cation, *en);
        else
            min_anion = std::min(min_anion, *en);
    }
    return max_cation <= min_anion;
}

bool compositional_validity(const Composition& c, const ElementTable& table)
{
    for (const auto& a : charge_neutral_assignments(c, table))
        if (electronegativity_balanced(a, table))
            return true;
    return false;
}

ValidityReport check_validity(const CrystalStructure& s, const ElementTable& table)
{
    ValidityReport r;
    auto sv = structural_validity(s);
    r.structural_ok = sv.ok;
    r.min_distance = sv.min_distance;
    r.volume = sv.volume;
    r.neutral_assignments = charge_neutral_assignments(s.composition(), table);
    for (const auto& a : r.neutral_assignments)
        r.compositional_ok = r.compositional_ok || electronegativity_balanced(a, table);
    return r;
}

} // namespace xtal
