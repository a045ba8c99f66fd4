// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xtal/core/structure.hpp"

namespace xtal {

inline constexpr std::size_t max_symmetry_sites = 64;

/// f' = rotation * f + translation, in the fractional basis of the structure
/// it was found for.
struct SymmetryOp {
    IMat3 rotation = IMat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& frac) const { return rotation.cast<double>() * frac + translation; }
};

/// Composition a∘b (apply b first), translation wrapped into [0,1).
SymmetryOp compose(const SymmetryOp& a, const SymmetryOp& b);

/// True when rotations agree and translations agree modulo lattice vectors.
bool same_op(const SymmetryOp& a, const SymmetryOp& b, double tol = 1e-6);

/// Brute-force space-group operations. Rotations are searched on the Niggli
/// basis with entries in {-1,0,1} and returned in the input basis.
/// Throws GuardError above max_symmetry_sites.
std::vector<SymmetryOp> find_symmetry_ops(const CrystalStructure& s, double symprec = 0.01);

/// Integer rotations (on this basis, entries in {-1,0,1}) preserving the metric.
std::vector<IMat3> lattice_rotations(const Lattice& lattice, double tol = 0.01);

enum class CrystalSystem { Triclinic, Monoclinic, Orthorhombic, Tetragonal, Trigonal, Hexagonal, Cubic };

std::string to_string(CrystalSystem cs);

/// From the order of the lattice point group (holohedry): 2, 4, 8, 16, 12, 24, 48.
/// The input is Niggli-reduced internally.
CrystalSystem crystal_system(const Lattice& lattice, double tol = 0.01);

/// Element-agnostic fingerprint of an arrangement, computed on the Niggli cell
/// as given (no primitive reduction, so supercells differ).
struct PrototypeSignature {
    std::string anonymous_formula;
    int op_count = 0;
    /// Per orbit: (multiplicity in the cell, coordination number), sorted.
    std::vector<std::pair<int, int>> orbits;

    bool operator==(const PrototypeSignature&) const = default;
    std::string to_string() const;
};

PrototypeSignature prototype_signature(const CrystalStructure& s, double symprec = 0.01);

/// Neighbours of site i within (1 + shell) times its nearest-neighbour distance.
int coordination_number(const CrystalStructure& s, std::size_t i, double shell = 0.1);

} // namespace xtal
