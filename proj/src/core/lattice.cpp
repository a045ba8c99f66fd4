// SPDX-License-Identifier: Apache-2.0
#include "xtal/core/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "xtal/core/errors.hpp"

namespace xtal {

namespace {

constexpr double deg = std::numbers::pi / 180.0;

// cos/sin that return exact 0/1 at right angles so orthogonal cells stay exact.
double cos_deg(double angle)
{
    if (std::abs(angle - 90.0) < 1e-12)
        return 0.0;
    return std::cos(angle * deg);
}

double sin_deg(double angle)
{
    if (std::abs(angle - 90.0) < 1e-12)
        return 1.0;
    return std::sin(angle * deg);
}

} // namespace

Lattice::Lattice(const Mat3& rows) : rows_(rows)
{
    if (!rows.allFinite())
        throw DegenerateLatticeError("lattice has non-finite entries");
    det_ = rows.determinant();
    double scale = rows.row(0).norm() * rows.row(1).norm() * rows.row(2).norm();
    if (scale == 0.0 || std::abs(det_) <= 1e-10 * scale)
        throw DegenerateLatticeError("lattice vectors are linearly dependent");
    inv_t_ = rows.transpose().inverse();
}

Lattice Lattice::from_parameters(double a, double b, double c, double alpha, double beta, double gamma)
{
    if (!(a > 0 && b > 0 && c > 0))
        throw DegenerateLatticeError("cell lengths must be positive");
    double ca = cos_deg(alpha), cb = cos_deg(beta), cg = cos_deg(gamma), sg = sin_deg(gamma);
    double cy = (ca - cb * cg) / sg;
    double cz2 = 1.0 - cb * cb - cy * cy;
    if (!(cz2 > 0.0))
        throw DegenerateLatticeError("cell angles do not describe a 3D cell");
    Mat3 m;
    m << a, 0.0, 0.0,
         b * cg, b * sg, 0.0,
         c * cb, c * cy, c * std::sqrt(cz2);
    return Lattice(m);
}

Lattice Lattice::cubic(double a)
{
    return Lattice(Mat3::Identity() * a);
}

double Lattice::volume() const noexcept
{
    return std::abs(det_);
}

std::array<double, 3> Lattice::lengths() const
{
    return {rows_.row(0).norm(), rows_.row(1).norm(), rows_.row(2).norm()};
}

std::array<double, 3> Lattice::angles() const
{
    auto angle = [&](int i, int j) {
        double c = rows_.row(i).dot(rows_.row(j)) / (rows_.row(i).norm() * rows_.row(j).norm());
        return std::acos(std::clamp(c, -1.0, 1.0)) / deg;
    };
    return {angle(1, 2), angle(0, 2), angle(0, 1)};
}

Lattice Lattice::transformed(const IMat3& m) const
{
    return Lattice(m.cast<double>() * rows_);
}

Lattice Lattice::scaled(double factor) const
{
    return Lattice(rows_ * factor);
}

Lattice Lattice::scaled_to_volume(double volume) const
{
    return scaled(std::cbrt(volume / this->volume()));
}

Lattice Lattice::standardized() const
{
    auto l = lengths();
    auto a = angles();
    return from_parameters(l[0], l[1], l[2], a[0], a[1], a[2]);
}

std::array<double, 3> Lattice::plane_spacings() const
{
    std::array<double, 3> out{};
    for (int k = 0; k < 3; ++k) {
        Vec3 u = vector((k + 1) % 3), v = vector((k + 2) % 3);
        out[k] = volume() / u.cross(v).norm();
    }
    return out;
}

std::array<int, 3> Lattice::image_range(double r) const
{
    auto d = plane_spacings();
    return {static_cast<int>(std::ceil(r / d[0])), static_cast<int>(std::ceil(r / d[1])),
            static_cast<int>(std::ceil(r / d[2]))};
}

std::vector<Vec3> frac_to_cart(std::span<const Vec3> frac, const Lattice& lattice)
{
    std::vector<Vec3> out;
    out.reserve(frac.size());
    for (const auto& f : frac)
        out.push_back(lattice.to_cart(f));
    return out;
}

std::vector<Vec3> cart_to_frac(std::span<const Vec3> cart, const Lattice& lattice)
{
    std::vector<Vec3> out;
    out.reserve(cart.size());
    for (const auto& r : cart)
        out.push_back(lattice.to_frac(r));
    return out;
}

Vec3 wrap_frac(const Vec3& f)
{
    Vec3 out;
    for (int k = 0; k < 3; ++k) {
        double x = f[k] - std::floor(f[k]);
        out[k] = x >= 1.0 ? 0.0 : x;
    }
    return out;
}

Vec3 wrap_centered(const Vec3& f)
{
    Vec3 out;
    for (int k = 0; k < 3; ++k)
        out[k] = f[k] - std::floor(f[k] + 0.5);
    return out;
}

Vec3 min_image_vector(const Vec3& a, const Vec3& b, const Lattice& lattice)
{
    Vec3 d = wrap_centered(b - a);
    Vec3 best = lattice.to_cart(d);
    double best_n2 = best.squaredNorm();
    for (int i = -1; i <= 1; ++i)
        for (int j = -1; j <= 1; ++j)
            for (int k = -1; k <= 1; ++k) {
                Vec3 v = lattice.to_cart(d + Vec3(i, j, k));
                double n2 = v.squaredNorm();
                if (n2 < best_n2) {
                    best_n2 = n2;
                    best = v;
                }
            }
    return best;
}

double min_image_distance(const Vec3& a, const Vec3& b, const Lattice& lattice)
{
    return min_image_vector(a, b, lattice).norm();
}

double periodic_min_distance(const Vec3& a, const Vec3& b, const Lattice& lattice, bool exclude_zero)
{
    Vec3 d = wrap_centered(b - a);
    auto search = [&](const std::array<int, 3>& range, double best) {
        for (int i = -range[0]; i <= range[0]; ++i)
            for (int j = -range[1]; j <= range[1]; ++j)
                for (int k = -range[2]; k <= range[2]; ++k) {
                    Vec3 f = d + Vec3(i, j, k);
                    if (exclude_zero && f.squaredNorm() == 0.0)
                        continue;
                    best = std::min(best, lattice.to_cart(f).norm());
                }
        return best;
    };
    double best = search({1, 1, 1}, std::numeric_limits<double>::infinity());
    auto range = lattice.image_range(best);
    if (range[0] > 1 || range[1] > 1 || range[2] > 1)
        best = search(range, best);
    return best;
}

double shortest_lattice_vector(const Lattice& lattice)
{
    return periodic_min_distance(Vec3::Zero(), Vec3::Zero(), lattice, true);
}

// LLL ------------------------------------------------------------------------

NiggliReduction lll_reduce(const Lattice& lattice, double delta)
{
    std::array<Vec3, 3> b{lattice.vector(0), lattice.vector(1), lattice.vector(2)};
    IMat3 t = IMat3::Identity();

    std::array<Vec3, 3> bs;
    double mu[3][3] = {};
    auto gram_schmidt = [&] {
        for (int i = 0; i < 3; ++i) {
            bs[i] = b[i];
            for (int j = 0; j < i; ++j) {
                mu[i][j] = b[i].dot(bs[j]) / bs[j].squaredNorm();
                bs[i] -= mu[i][j] * bs[j];
            }
        }
    };

    gram_schmidt();
    int k = 1;
    int guard = 0;
    while (k < 3) {
        if (++guard > 1000)
            throw ReductionError("LLL reduction did not terminate");
        for (int j = k - 1; j >= 0; --j) {
            double q = std::round(mu[k][j]);
            if (q != 0.0) {
                b[k] -= q * b[j];
                t.row(k) -= static_cast<int>(q) * t.row(j);
                gram_schmidt();
            }
        }
        if (bs[k].squaredNorm() >= (delta - mu[k][k - 1] * mu[k][k - 1]) * bs[k - 1].squaredNorm()) {
            ++k;
        } else {
            std::swap(b[k], b[k - 1]);
            Eigen::RowVector3i tmp = t.row(k);
            t.row(k) = t.row(k - 1);
            t.row(k - 1) = tmp;
            gram_schmidt();
            k = std::max(k - 1, 1);
        }
    }
    return {lattice.transformed(t), t};
}

// Niggli ---------------------------------------------------------------------

NiggliReduction niggli_reduce_with_transform(const Lattice& lattice, double tol)
{
    auto lll = lll_reduce(lattice);
    Mat3 g = lll.lattice.metric();
    IMat3 p = IMat3::Identity();
    double e = tol * std::cbrt(lattice.volume());

    auto apply = [&](const IMat3& m) {
        Mat3 md = m.cast<double>();
        g = md.transpose() * g * md;
        p = (m.transpose() * p).eval();
    };
    auto sign = [&](double x) { return std::abs(x) < e ? 0 : (x > 0 ? 1 : -1); };

    bool done = false;
    for (int iter = 0; iter < 100; ++iter) {
        double A = g(0, 0), B = g(1, 1), C = g(2, 2);
        double E = 2 * g(1, 2), N = 2 * g(0, 2), Y = 2 * g(0, 1);

        if (B + e < A || (std::abs(A - B) < e && std::abs(E) > std::abs(N) + e)) {
            IMat3 m;
            m << 0, -1, 0, -1, 0, 0, 0, 0, -1;
            apply(m);
            A = g(0, 0), B = g(1, 1), C = g(2, 2);
            E = 2 * g(1, 2), N = 2 * g(0, 2), Y = 2 * g(0, 1);
        }
        if (C + e < B || (std::abs(B - C) < e && std::abs(N) > std::abs(Y) + e)) {
            IMat3 m;
            m << -1, 0, 0, 0, 0, -1, 0, -1, 0;
            apply(m);
            continue;
        }

        int l = sign(E), mm = sign(N), n = sign(Y);
        if (l * mm * n == 1) {
            IMat3 m = IMat3::Zero();
            m(0, 0) = l == -1 ? -1 : 1;
            m(1, 1) = mm == -1 ? -1 : 1;
            m(2, 2) = n == -1 ? -1 : 1;
            apply(m);
        } else if (l * mm * n == 0 || l * mm * n == -1) {
            int i = l == 1 ? -1 : 1;
            int j = mm == 1 ? -1 : 1;
            int k = n == 1 ? -1 : 1;
            if (i * j * k == -1) {
                if (n == 0)
                    k = -1;
                else if (mm == 0)
                    j = -1;
                else if (l == 0)
                    i = -1;
            }
            IMat3 m = IMat3::Zero();
            m(0, 0) = i;
            m(1, 1) = j;
            m(2, 2) = k;
            apply(m);
        }

        A = g(0, 0), B = g(1, 1), C = g(2, 2);
        E = 2 * g(1, 2), N = 2 * g(0, 2), Y = 2 * g(0, 1);

        if (std::abs(E) > B + e || (std::abs(E - B) < e && 2 * N < Y - e) || (std::abs(E + B) < e && Y < -e)) {
            IMat3 m = IMat3::Identity();
            m(1, 2) = E > 0 ? -1 : 1;
            apply(m);
            continue;
        }
        if (std::abs(N) > A + e || (std::abs(A - N) < e && 2 * E < Y - e) || (std::abs(A + N) < e && Y < -e)) {
            IMat3 m = IMat3::Identity();
            m(0, 2) = N > 0 ? -1 : 1;
            apply(m);
            continue;
        }
        if (std::abs(Y) > A + e || (std::abs(A - Y) < e && 2 * E < N - e) || (std::abs(A + Y) < e && N < -e)) {
            IMat3 m = IMat3::Identity();
            m(0, 1) = Y > 0 ? -1 : 1;
            apply(m);
            continue;
        }
        double s = E + N + Y + A + B;
        if (s < -e || (std::abs(s) < e && Y + (A + N) * 2 > e)) {
            IMat3 m = IMat3::Identity();
            m(0, 2) = 1;
            m(1, 2) = 1;
            apply(m);
            continue;
        }
        done = true;
        break;
    }
    if (!done)
        throw ReductionError("Niggli reduction did not converge in 100 iterations");

    IMat3 total = p * lll.transform;
    if (total.cast<double>().determinant() < 0)
        total = -total;
    return {lattice.transformed(total), total};
}

Lattice niggli_reduce(const Lattice& lattice, double tol)
{
    return niggli_reduce_with_transform(lattice, tol).lattice;
}

bool is_niggli_reduced(const Lattice& lattice, double tol)
{
    Mat3 g = lattice.metric();
    double e = tol * std::cbrt(lattice.volume());
    double A = g(0, 0), B = g(1, 1), C = g(2, 2);
    double xi = 2 * g(1, 2), eta = 2 * g(0, 2), zeta = 2 * g(0, 1);
    auto eq = [&](double x, double y) { return std::abs(x - y) < e; };

    if (A > B + e || B > C + e)
        return false;
    bool all_pos = xi > e && eta > e && zeta > e;
    bool all_nonpos = xi < e && eta < e && zeta < e;
    if (!all_pos && !all_nonpos)
        return false;
    if (std::abs(xi) > B + e || std::abs(eta) > A + e || std::abs(zeta) > A + e)
        return false;
    if (xi + eta + zeta + A + B < -e)
        return false;

    if (eq(A, B) && std::abs(xi) > std::abs(eta) + e)
        return false;
    if (eq(B, C) && std::abs(eta) > std::abs(zeta) + e)
        return false;
    if (all_pos) {
        if (eq(xi, B) && zeta > 2 * eta + e)
            return false;
        if (eq(eta, A) && zeta > 2 * xi + e)
            return false;
        if (eq(zeta, A) && eta > 2 * xi + e)
            return false;
    } else {
        if (eq(xi, -B) && std::abs(zeta) > e)
            return false;
        if (eq(eta, -A) && std::abs(zeta) > e)
            return false;
        if (eq(zeta, -A) && std::abs(eta) > e)
            return false;
        if (eq(xi + eta + zeta + A + B, 0.0) && 2 * A + 2 * eta + zeta > e)
            return false;
    }
    return true;
}

} // namespace xtal
