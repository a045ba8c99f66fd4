// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <vector>

#include "xtal/core/structure.hpp"

namespace xtal {

inline constexpr double min_valid_distance = 0.5;  // Angstrom
inline constexpr double min_valid_volume = 0.1;    // Angstrom^3
inline constexpr int max_oxidation_search_elements = 6;

using OxidationAssignment = std::map<Element, int>;

struct StructuralValidity {
    bool ok = false;
    double min_distance = 0.0;
    double volume = 0.0;
};

struct ValidityReport {
    bool structural_ok = false;
    double min_distance = 0.0;
    double volume = 0.0;
    bool compositional_ok = false;
    std::vector<OxidationAssignment> neutral_assignments;

    bool valid() const { return structural_ok && compositional_ok; }
};

/// Smallest interatomic distance over all site pairs and periodic self-images,
/// and the cell volume, against the 0.5 A / 0.1 A^3 thresholds.
StructuralValidity structural_validity(const CrystalStructure& s);

/// Every assignment of one common oxidation state per element whose weighted
/// sum is exactly zero. Single-element compositions yield the all-zero state.
/// Throws GuardError for more than six distinct elements.
std::vector<OxidationAssignment> charge_neutral_assignments(const Composition& c,
                                                            const ElementTable& table = ElementTable::builtin());

/// True when the electronegativities are ordered (cations <= anions, Pauling,
/// ties allowed) for at least one charge-neutral assignment.
bool electronegativity_balanced(const OxidationAssignment& a, const ElementTable& table = ElementTable::builtin());

bool compositional_validity(const Composition& c, const ElementTable& table = ElementTable::builtin());

ValidityReport check_validity(const CrystalStructure& s, const ElementTable& table = ElementTable::builtin());

} // namespace xtal
