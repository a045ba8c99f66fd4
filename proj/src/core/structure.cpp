// SPDX-License-Identifier: Apache-2.0
#include "xtal/core/structure.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "xtal/core/errors.hpp"

namespace xtal {

CrystalStructure::CrystalStructure(Lattice lattice, std::vector<Element> species, std::vector<Vec3> frac_coords)
    : lattice_(std::move(lattice)), species_(std::move(species)), frac_(std::move(frac_coords))
{
    if (species_.empty())
        throw Error("structure must contain at least one site");
    if (species_.size() != frac_.size())
        throw Error("structure has " + std::to_string(species_.size()) + " species but " +
                    std::to_string(frac_.size()) + " coordinates");
    for (auto& f : frac_) {
        if (!f.allFinite())
            throw Error("structure has a non-finite fractional coordinate");
        f = wrap_frac(f);
    }
}

std::vector<Vec3> CrystalStructure::cart_coords() const
{
    return frac_to_cart(frac_, lattice_);
}

Composition CrystalStructure::composition() const
{
    std::map<Element, int> counts;
    for (Element e : species_)
        ++counts[e];
    return Composition(std::move(counts));
}

CrystalStructure CrystalStructure::with_lattice(Lattice lattice) const
{
    return CrystalStructure(std::move(lattice), species_, frac_);
}

CrystalStructure CrystalStructure::with_species(std::vector<Element> species) const
{
    return CrystalStructure(lattice_, std::move(species), frac_);
}

CrystalStructure CrystalStructure::with_frac_coords(std::vector<Vec3> frac) const
{
    return CrystalStructure(lattice_, species_, std::move(frac));
}

CrystalStructure make_supercell(const CrystalStructure& s, const std::array<int, 3>& factors)
{
    for (int f : factors)
        if (f < 1)
            throw Error("supercell factors must be >= 1");
    IMat3 m = IMat3::Zero();
    m(0, 0) = factors[0];
    m(1, 1) = factors[1];
    m(2, 2) = factors[2];
    std::vector<Element> species;
    std::vector<Vec3> frac;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const Vec3& f = s.frac_coords()[i];
        for (int a = 0; a < factors[0]; ++a)
            for (int b = 0; b < factors[1]; ++b)
                for (int c = 0; c < factors[2]; ++c) {
                    species.push_back(s.species()[i]);
                    frac.push_back(Vec3((f[0] + a) / factors[0], (f[1] + b) / factors[1], (f[2] + c) / factors[2]));
                }
    }
    return CrystalStructure(s.lattice().transformed(m), std::move(species), std::move(frac));
}

CrystalStructure make_supercell_matrix(const CrystalStructure& s, const IMat3& matrix)
{
    Mat3 md = matrix.cast<double>();
    double det = md.determinant();
    int n_cells = static_cast<int>(std::lround(std::abs(det)));
    if (n_cells < 1)
        throw Error("supercell matrix must be non-singular");
    Lattice big = s.lattice().transformed(matrix);
    Mat3 inv = md.inverse();

    // Lattice points of the old cell inside the new one: enumerate the bounding
    // box of the new cell corners in old-cell coordinates.
    Eigen::Vector3i lo = Eigen::Vector3i::Zero(), hi = Eigen::Vector3i::Zero();
    for (int corner = 0; corner < 8; ++corner) {
        Eigen::RowVector3i sel((corner & 1) ? 1 : 0, (corner & 2) ? 1 : 0, (corner & 4) ? 1 : 0);
        Eigen::RowVector3i p = sel * matrix;
        lo = lo.cwiseMin(p.transpose());
        hi = hi.cwiseMax(p.transpose());
    }
    std::vector<Vec3> points;
    for (int a = lo[0]; a <= hi[0]; ++a)
        for (int b = lo[1]; b <= hi[1]; ++b)
            for (int c = lo[2]; c <= hi[2]; ++c) {
                Vec3 f = inv.transpose() * Vec3(a, b, c);
                bool inside = true;
                for (int k = 0; k < 3; ++k)
                    inside = inside && f[k] > -1e-9 && f[k] < 1.0 - 1e-9;
                if (inside)
                    points.push_back(f);
            }
    if (static_cast<int>(points.size()) != n_cells)
        throw Error("supercell enumeration found " + std::to_string(points.size()) + " lattice points, expected " +
                    std::to_string(n_cells));

    std::vector<Element> species;
    std::vector<Vec3> frac;
    for (std::size_t i = 0; i < s.size(); ++i) {
        Vec3 f_new = inv.transpose() * s.frac_coords()[i];
        for (const auto& p : points) {
            species.push_back(s.species()[i]);
            frac.push_back(f_new + p);
        }
    }
    return CrystalStructure(std::move(big), std::move(species), std::move(frac));
}

CrystalStructure change_basis(const CrystalStructure& s, const IMat3& m)
{
    Mat3 md = m.cast<double>();
    if (std::abs(std::abs(md.determinant()) - 1.0) > 1e-9)
        throw Error("change_basis requires a unimodular matrix");
    // cart = f^T L = f^T M^-1 (M L)  =>  f' = M^-T f
    Mat3 inv_t = md.inverse().transpose();
    std::vector<Vec3> frac;
    frac.reserve(s.size());
    for (const auto& f : s.frac_coords())
        frac.push_back(inv_t * f);
    return CrystalStructure(s.lattice().transformed(m),
                            std::vector<Element>(s.species().begin(), s.species().end()), std::move(frac));
}

CrystalStructure niggli_reduce(const CrystalStructure& s, double tol)
{
    auto red = niggli_reduce_with_transform(s.lattice(), tol);
    return change_basis(s, red.transform);
}

CrystalStructure rotate(const CrystalStructure& s, const Mat3& rotation)
{
    // Rows are row vectors: rotated row = row * R^T.
    return s.with_lattice(Lattice(s.lattice().matrix() * rotation.transpose()));
}

CrystalStructure translate(const CrystalStructure& s, const Vec3& shift)
{
    Vec3 df = s.lattice().to_frac(shift);
    std::vector<Vec3> frac;
    for (const auto& f : s.frac_coords())
        frac.push_back(f + df);
    return s.with_frac_coords(std::move(frac));
}

} // namespace xtal
