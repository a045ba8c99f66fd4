// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "xtal/core/composition.hpp"
#include "xtal/core/element.hpp"
#include "xtal/core/lattice.hpp"

namespace xtal {

/// Periodic crystal: one element per site, fractional coordinates wrapped into
/// [0,1), and a non-singular lattice.
class CrystalStructure {
public:
    /// Throws xtal::Error when sizes disagree or the structure is empty.
    CrystalStructure(Lattice lattice, std::vector<Element> species, std::vector<Vec3> frac_coords);

    const Lattice& lattice() const noexcept { return lattice_; }
    std::span<const Element> species() const noexcept { return species_; }
    std::span<const Vec3> frac_coords() const noexcept { return frac_; }
    std::size_t size() const noexcept { return species_.size(); }

    std::vector<Vec3> cart_coords() const;
    Composition composition() const;
    double volume() const { return lattice_.volume(); }

    /// Keeps fractional coordinates, replaces the lattice.
    CrystalStructure with_lattice(Lattice lattice) const;
    CrystalStructure with_species(std::vector<Element> species) const;
    CrystalStructure with_frac_coords(std::vector<Vec3> frac) const;

private:
    Lattice lattice_;
    std::vector<Element> species_;
    std::vector<Vec3> frac_;
};

/// Diagonal supercell. Sites are emitted site-major: all images of site 0 first.
CrystalStructure make_supercell(const CrystalStructure& s, const std::array<int, 3>& factors);

/// General supercell with integer matrix rows (|det| >= 1).
CrystalStructure make_supercell_matrix(const CrystalStructure& s, const IMat3& matrix);

/// Niggli-reduces the lattice and re-expresses the sites in the new basis.
CrystalStructure niggli_reduce(const CrystalStructure& s, double tol = 1e-5);

/// Same sites expressed in the basis rows M * L (|det M| = 1).
CrystalStructure change_basis(const CrystalStructure& s, const IMat3& m);

/// Rigid rotation of the cartesian frame; fractional coordinates are unchanged.
CrystalStructure rotate(const CrystalStructure& s, const Mat3& rotation);

/// Rigid translation by a cartesian vector.
CrystalStructure translate(const CrystalStructure& s, const Vec3& shift);

} // namespace xtal
