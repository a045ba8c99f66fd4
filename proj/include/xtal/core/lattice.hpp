// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace xtal {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using IMat3 = Eigen::Matrix3i;

/// Three basis vectors stored as the rows of a 3x3 matrix (Angstrom).
///
/// Cartesian positions are row-vector products: cart = frac * L. Internally we
/// keep column vectors, so to_cart computes L^T * frac.
class Lattice {
public:
    /// Throws DegenerateLatticeError when the rows are (numerically) coplanar.
    explicit Lattice(const Mat3& rows);

    /// Standard orientation: a along x, b in the xy plane. Angles in degrees.
    static Lattice from_parameters(double a, double b, double c,
                                   double alpha, double beta, double gamma);
    static Lattice cubic(double a);

    const Mat3& matrix() const noexcept { return rows_; }
    Vec3 vector(int i) const { return rows_.row(i).transpose(); }

    double determinant() const noexcept { return det_; }
    double volume() const noexcept;
    Mat3 metric() const { return rows_ * rows_.transpose(); }

    std::array<double, 3> lengths() const;
    /// alpha (b,c), beta (a,c), gamma (a,b) in degrees.
    std::array<double, 3> angles() const;

    Vec3 to_cart(const Vec3& frac) const { return rows_.transpose() * frac; }
    Vec3 to_frac(const Vec3& cart) const { return inv_t_ * cart; }

    /// Rows M * L for an integer basis change M.
    Lattice transformed(const IMat3& m) const;
    Lattice scaled(double factor) const;
    Lattice scaled_to_volume(double volume) const;
    /// Same lengths and angles, standard orientation.
    Lattice standardized() const;

    /// Perpendicular distance between the lattice planes spanned by the other two rows.
    std::array<double, 3> plane_spacings() const;

    /// Number of images needed along each axis to cover every vector shorter than r.
    std::array<int, 3> image_range(double r) const;

private:
    Mat3 rows_;
    Mat3 inv_t_;
    double det_ = 0.0;
};

std::vector<Vec3> frac_to_cart(std::span<const Vec3> frac, const Lattice& lattice);
std::vector<Vec3> cart_to_frac(std::span<const Vec3> cart, const Lattice& lattice);

/// Map each component into [0,1).
Vec3 wrap_frac(const Vec3& f);
/// Map each component into [-0.5,0.5).
Vec3 wrap_centered(const Vec3& f);

/// Minimum distance between a and b + t over the 27 translations t in {-1,0,1}^3,
/// applied after centring the fractional difference. Exact for reduced cells.
double min_image_distance(const Vec3& a, const Vec3& b, const Lattice& lattice);

/// Minimum-image difference vector (cartesian) from a to b.
Vec3 min_image_vector(const Vec3& a, const Vec3& b, const Lattice& lattice);

/// Exact periodic minimum distance between a and the images of b, including
/// b's zero image unless exclude_zero is set. Uses a bounded image search sized
/// from the plane spacings, so it is correct for any cell.
double periodic_min_distance(const Vec3& a, const Vec3& b, const Lattice& lattice,
                             bool exclude_zero = false);

/// Length of the shortest non-zero lattice vector.
double shortest_lattice_vector(const Lattice& lattice);

// Niggli reduction -----------------------------------------------------------

struct NiggliReduction {
    Lattice lattice;
    /// Integer, det = +1: reduced rows = transform * original rows.
    IMat3 transform;
};

/// Krivy-Gruber reduction on the metric tensor, tracking the basis change.
/// Throws ReductionError when 100 iterations do not reach a fixed point.
NiggliReduction niggli_reduce_with_transform(const Lattice& lattice, double tol = 1e-5);
Lattice niggli_reduce(const Lattice& lattice, double tol = 1e-5);

/// Checks the Niggli conditions on the metric tensor, tolerance scaled by V^(1/3).
bool is_niggli_reduced(const Lattice& lattice, double tol = 1e-5);

/// LLL-reduced basis (delta = 0.75) with its integer basis change.
NiggliReduction lll_reduce(const Lattice& lattice, double delta = 0.75);

} // namespace xtal
