// SPDX-License-Identifier: Apache-2.0
#include "xtal/symmetry/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "xtal/core/errors.hpp"

namespace xtal {

namespace {

Vec3 clean_translation(const Vec3& t)
{
    Vec3 w = wrap_frac(t);
    for (int k = 0; k < 3; ++k)
        if (w[k] > 1.0 - 1e-8 || w[k] < 1e-8)
            w[k] = 0.0;
    return w;
}

IMat3 round_matrix(const Mat3& m)
{
    IMat3 out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            out(i, j) = static_cast<int>(std::lround(m(i, j)));
    return out;
}

std::size_t anchor_site(const CrystalStructure& s)
{
    auto comp = s.composition();
    Element best = comp.elements().front();
    for (Element e : comp.elements())
        if (comp.count(e) < comp.count(best))
            best = e;
    std::size_t i = 0;
    while (s.species()[i] != best)
        ++i;
    return i;
}

// Index of the like-species site at f, or -1.
int site_at(const CrystalStructure& s, Element e, const Vec3& f, double tol)
{
    for (std::size_t k = 0; k < s.size(); ++k)
        if (s.species()[k] == e && min_image_distance(f, s.frac_coords()[k], s.lattice()) <= tol)
            return static_cast<int>(k);
    return -1;
}

bool maps_onto_itself(const CrystalStructure& s, const SymmetryOp& op, double tol)
{
    for (std::size_t i = 0; i < s.size(); ++i)
        if (site_at(s, s.species()[i], op.apply(s.frac_coords()[i]), tol) < 0)
            return false;
    return true;
}

std::vector<SymmetryOp> ops_on_reduced(const CrystalStructure& red, double symprec)
{
    const std::size_t i0 = anchor_site(red);
    const Vec3 f0 = red.frac_coords()[i0];
    std::vector<SymmetryOp> out;
    for (const IMat3& r : lattice_rotations(red.lattice(), symprec)) {
        Vec3 rf0 = r.cast<double>() * f0;
        for (std::size_t j = 0; j < red.size(); ++j) {
            if (red.species()[j] != red.species()[i0])
                continue;
            SymmetryOp op{r, clean_translation(red.frac_coords()[j] - rf0)};
            if (maps_onto_itself(red, op, symprec))
                out.push_back(op);
        }
    }
    return out;
}

} // namespace

SymmetryOp compose(const SymmetryOp& a, const SymmetryOp& b)
{
    return {a.rotation * b.rotation, clean_translation(a.rotation.cast<double>() * b.translation + a.translation)};
}

bool same_op(const SymmetryOp& a, const SymmetryOp& b, double tol)
{
    return a.rotation == b.rotation && wrap_centered(a.translation - b.translation).cwiseAbs().maxCoeff() <= tol;
}

std::vector<IMat3> lattice_rotations(const Lattice& lattice, double tol)
{
    const Mat3 g = lattice.metric();
    auto len = lattice.lengths();
    std::vector<IMat3> out;
    IMat3 r;
    std::array<int, 9> digits{};
    for (int code = 0; code < 19683; ++code) {
        int c = code;
        for (int k = 0; k < 9; ++k) {
            digits[k] = c % 3 - 1;
            c /= 3;
        }
        for (int k = 0; k < 9; ++k)
            r(k / 3, k % 3) = digits[k];
        int det = r.determinant();
        if (det != 1 && det != -1)
            continue;
        Mat3 rd = r.cast<double>();
        Mat3 g2 = rd.transpose() * g * rd;
        bool ok = true;
        for (int i = 0; i < 3 && ok; ++i)
            for (int j = 0; j < 3 && ok; ++j)
                ok = std::abs(g2(i, j) - g(i, j)) <= tol * (len[i] + len[j]);
        if (ok)
            out.push_back(r);
    }
    return out;
}

std::vector<SymmetryOp> find_symmetry_ops(const CrystalStructure& s, double symprec)
{
    if (s.size() > max_symmetry_sites)
        throw GuardError("symmetry search is limited to " + std::to_string(max_symmetry_sites) + " sites, got " +
                         std::to_string(s.size()));
    CrystalStructure red = niggli_reduce(s);
    // reduced rows = T * rows, so f = T^T f_red
    const IMat3 t = round_matrix(red.lattice().matrix() * s.lattice().matrix().inverse());
    const IMat3 tt = t.transpose();
    const IMat3 tt_inv = round_matrix(tt.cast<double>().inverse());

    std::vector<SymmetryOp> out;
    for (const auto& op : ops_on_reduced(red, symprec))
        out.push_back({tt * op.rotation * tt_inv, clean_translation(tt.cast<double>() * op.translation)});
    return out;
}

std::string to_string(CrystalSystem cs)
{
    switch (cs) {
    case CrystalSystem::Triclinic: return "triclinic";
    case CrystalSystem::Monoclinic: return "monoclinic";
    case CrystalSystem::Orthorhombic: return "orthorhombic";
    case CrystalSystem::Tetragonal: return "tetragonal";
    case CrystalSystem::Trigonal: return "trigonal";
    case CrystalSystem::Hexagonal: return "hexagonal";
    case CrystalSystem::Cubic: return "cubic";
    }
    return "triclinic";
}

CrystalSystem crystal_system(const Lattice& lattice, double tol)
{
    switch (lattice_rotations(niggli_reduce(lattice), tol).size()) {
    case 48: return CrystalSystem::Cubic;
    case 24: return CrystalSystem::Hexagonal;
    case 16: return CrystalSystem::Tetragonal;
    case 12: return CrystalSystem::Trigonal;
    case 8: return CrystalSystem::Orthorhombic;
    case 4: return CrystalSystem::Monoclinic;
    default: return CrystalSystem::Triclinic;
    }
}

int coordination_number(const CrystalStructure& s, std::size_t i, double shell)
{
    const auto& lat = s.lattice();
    const auto frac = s.frac_coords();
    double d_min = 1e300;
    for (std::size_t j = 0; j < s.size(); ++j)
        d_min = std::min(d_min, periodic_min_distance(frac[i], frac[j], lat, j == i));
    const double cutoff = (1.0 + shell) * d_min;
    auto range = lat.image_range(cutoff);
    int count = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        Vec3 diff = wrap_centered(frac[j] - frac[i]);
        for (int a = -range[0]; a <= range[0]; ++a)
            for (int b = -range[1]; b <= range[1]; ++b)
                for (int c = -range[2]; c <= range[2]; ++c) {
                    double d = lat.to_cart(diff + Vec3(a, b, c)).norm();
                    if (d > 1e-8 && d <= cutoff + 1e-9)
                        ++count;
                }
    }
    return count;
}

std::string PrototypeSignature::to_string() const
{
    std::string out = anonymous_formula + "|" + std::to_string(op_count) + "|";
    for (std::size_t k = 0; k < orbits.size(); ++k) {
        if (k)
            out += ",";
        out += std::to_string(orbits[k].first) + "x" + std::to_string(orbits[k].second);
    }
    return out;
}

PrototypeSignature prototype_signature(const CrystalStructure& s, double symprec)
{
    CrystalStructure red = niggli_reduce(s);
    auto ops = find_symmetry_ops(red, symprec);
    PrototypeSignature sig;
    sig.anonymous_formula = anonymous_formula(s.composition());
    sig.op_count = static_cast<int>(ops.size());

    std::vector<int> orbit_of(red.size(), -1);
    for (std::size_t i = 0; i < red.size(); ++i) {
        if (orbit_of[i] >= 0)
            continue;
        int mult = 0;
        for (const auto& op : ops) {
            int k = site_at(red, red.species()[i], op.apply(red.frac_coords()[i]), symprec);
            if (k >= 0 && orbit_of[static_cast<std::size_t>(k)] < 0) {
                orbit_of[static_cast<std::size_t>(k)] = static_cast<int>(i);
                ++mult;
            }
        }
        sig.orbits.emplace_back(mult, coordination_number(red, i));
    }
    std::sort(sig.orbits.begin(), sig.orbits.end());
    return sig;
}

} // namespace xtal
