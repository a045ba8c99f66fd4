// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "xtal/core/composition.hpp"
#include "xtal/core/errors.hpp"

namespace xtal {

inline constexpr int max_hull_elements = 4;

class HullError : public Error {
public:
    using Error::Error;
};

struct HullEntry {
    Composition composition;
    double energy_per_atom = 0.0;  // eV/atom
    std::string id;
};

struct StabilityFlags {
    bool stable = false;
    bool metastable_0_1 = false;
    bool metastable_0_03 = false;
};

/// Lower convex hull of (composition fractions, energy per atom) for up to four
/// elements. Vertices are the lowest entry at each hull composition.
class PhaseHull {
public:
    const std::vector<Element>& elements() const noexcept { return elements_; }
    /// Hull vertices: fraction vectors (one per element) and energies.
    const std::vector<std::vector<double>>& vertex_fractions() const noexcept { return points_; }
    const std::vector<double>& vertex_energies() const noexcept { return energies_; }
    /// Each facet lists elements().size() vertex indices.
    const std::vector<std::vector<int>>& facets() const noexcept { return facets_; }

    /// Hull energy per atom at a composition over (a subset of) elements().
    double energy_at(const Composition& c) const;

    /// Vertex compositions as reduced formulas, sorted.
    std::vector<std::string> vertex_formulas() const;

private:
    friend PhaseHull build_hull(const std::vector<HullEntry>&);
    std::vector<Element> elements_;
    std::vector<std::vector<double>> points_;
    std::vector<double> energies_;
    std::vector<Composition> compositions_;
    std::vector<std::vector<int>> facets_;
};

/// Throws HullError naming a missing elemental reference, GuardError past four
/// elements, and HullError on non-finite energies.
PhaseHull build_hull(const std::vector<HullEntry>& entries);

/// Hull over the given chemical system, using only entries whose elements are
/// a subset of it.
PhaseHull build_hull(const std::vector<HullEntry>& entries, const std::vector<Element>& system);

/// Entry energy minus hull energy at its composition. Throws HullError when the
/// entry has elements outside the hull.
double energy_above_hull(const HullEntry& entry, const PhaseHull& hull);

StabilityFlags classify_stability(double e_above_hull, const Composition& c);

/// JSON-lines: {"composition": "Fe2O3", "energy_per_atom": -1.23, "id": "..."}
std::vector<HullEntry> load_hull_entries(const std::string& path);
std::vector<HullEntry> parse_hull_entries(const std::string& text);

} // namespace xtal
