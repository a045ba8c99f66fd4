// SPDX-License-Identifier: Apache-2.0
#include "xtal/matcher/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "xtal/core/errors.hpp"
#include "xtal/matcher/hungarian.hpp"

namespace xtal {

void MatchTolerances::validate() const
{
    if (!(ltol > 0 && stol > 0 && angle_tol > 0 && primitive_tol > 0))
        throw Error("match tolerances must be strictly positive");
}

namespace {

Element least_frequent_species(const CrystalStructure& s)
{
    auto comp = s.composition();
    Element best = comp.elements().front();
    for (Element e : comp.elements())
        if (comp.count(e) < comp.count(best))
            best = e;
    return best;
}

double angle_deg(const Vec3& a, const Vec3& b)
{
    double c = a.dot(b) / (a.norm() * b.norm());
    return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / M_PI;
}

bool is_pure_translation(const CrystalStructure& s, const Vec3& t, double tol)
{
    auto frac = s.frac_coords();
    auto species = s.species();
    for (std::size_t i = 0; i < s.size(); ++i) {
        Vec3 moved = frac[i] + t;
        bool found = false;
        for (std::size_t k = 0; k < s.size() && !found; ++k)
            found = species[k] == species[i] && min_image_distance(moved, frac[k], s.lattice()) <= tol;
        if (!found)
            return false;
    }
    return true;
}

std::vector<IMat3> lattice_correspondences(const Lattice& target, const Lattice& source, const MatchTolerances& tol)
{
    auto len = target.lengths();
    auto ang = target.angles();
    double max_len = *std::max_element(len.begin(), len.end()) * (1.0 + tol.ltol);
    auto range = source.image_range(max_len);

    std::array<std::vector<std::pair<Eigen::Vector3i, Vec3>>, 3> cands;
    for (int i = -range[0]; i <= range[0]; ++i)
        for (int j = -range[1]; j <= range[1]; ++j)
            for (int k = -range[2]; k <= range[2]; ++k) {
                if (i == 0 && j == 0 && k == 0)
                    continue;
                Vec3 v = source.to_cart(Vec3(i, j, k));
                double l = v.norm();
                for (int axis = 0; axis < 3; ++axis)
                    if (l >= len[axis] / (1.0 + tol.ltol) && l <= len[axis] * (1.0 + tol.ltol))
                        cands[axis].push_back({Eigen::Vector3i(i, j, k), v});
            }

    std::vector<IMat3> out;
    for (const auto& [na, va] : cands[0])
        for (const auto& [nb, vb] : cands[1]) {
            if (std::abs(angle_deg(va, vb) - ang[2]) > tol.angle_tol)
                continue;
            for (const auto& [nc, vc] : cands[2]) {
                if (std::abs(angle_deg(vb, vc) - ang[0]) > tol.angle_tol ||
                    std::abs(angle_deg(va, vc) - ang[1]) > tol.angle_tol)
                    continue;
                IMat3 m;
                m.row(0) = na.transpose();
                m.row(1) = nb.transpose();
                m.row(2) = nc.transpose();
                int det = static_cast<int>(std::lround(m.cast<double>().determinant()));
                if (det == 1 || det == -1)
                    out.push_back(m);
            }
        }
    return out;
}

Lattice average_lattice(const Lattice& a, const Lattice& b)
{
    auto la = a.lengths(), lb = b.lengths();
    auto aa = a.angles(), ab = b.angles();
    return Lattice::from_parameters((la[0] + lb[0]) / 2, (la[1] + lb[1]) / 2, (la[2] + lb[2]) / 2,
                                    (aa[0] + ab[0]) / 2, (aa[1] + ab[1]) / 2, (aa[2] + ab[2]) / 2);
}

// Best RMS over translations anchored on s1's least-frequent species, for a
// fixed lattice correspondence. Empty when no translation brings every site
// within stol.
std::optional<double> compare_sites(const CrystalStructure& s1, const CrystalStructure& s2, const Lattice& avg,
                                    double stol)
{
    const std::size_t n = s1.size();
    const double norm = std::cbrt(avg.volume() / static_cast<double>(n));
    auto f1 = s1.frac_coords();
    auto f2 = s2.frac_coords();

    std::map<Element, std::pair<std::vector<int>, std::vector<int>>> blocks;
    for (std::size_t i = 0; i < n; ++i) {
        blocks[s1.species()[i]].first.push_back(static_cast<int>(i));
        blocks[s2.species()[i]].second.push_back(static_cast<int>(i));
    }
    for (const auto& [e, b] : blocks)
        if (b.first.size() != b.second.size())
            return std::nullopt;

    Element anchor = least_frequent_species(s1);
    int i0 = blocks[anchor].first.front();

    std::optional<double> best;
    std::vector<Vec3> disp(n);
    for (int j : blocks[anchor].second) {
        Vec3 t = f1[i0] - f2[j];
        for (const auto& [e, b] : blocks) {
            const int k = static_cast<int>(b.first.size());
            std::vector<double> cost(static_cast<std::size_t>(k) * k);
            std::vector<Vec3> dfrac(static_cast<std::size_t>(k) * k);
            for (int p = 0; p < k; ++p)
                for (int q = 0; q < k; ++q) {
                    Vec3 cart = min_image_vector(Vec3::Zero(), f1[b.first[p]] - f2[b.second[q]] - t, avg);
                    cost[static_cast<std::size_t>(p) * k + q] = cart.squaredNorm();
                    dfrac[static_cast<std::size_t>(p) * k + q] = avg.to_frac(cart);
                }
            auto a = solve_assignment(cost, k);
            for (int p = 0; p < k; ++p)
                disp[b.first[p]] = dfrac[static_cast<std::size_t>(p) * k + a.row_to_col[p]];
        }
        Vec3 mean = Vec3::Zero();
        for (const auto& d : disp)
            mean += d;
        mean /= static_cast<double>(n);
        double max_d = 0.0, sum_sq = 0.0;
        for (const auto& d : disp) {
            double dist = avg.to_cart(d - mean).norm() / norm;
            max_d = std::max(max_d, dist);
            sum_sq += dist * dist;
        }
        if (max_d <= stol) {
            double rms = std::sqrt(sum_sq / static_cast<double>(n));
            if (!best || rms < *best)
                best = rms;
        }
    }
    return best;
}

} // namespace

CrystalStructure find_primitive(const CrystalStructure& s, double tol)
{
    CrystalStructure red = niggli_reduce(s);
    const std::size_t n = red.size();
    Element anchor = least_frequent_species(red);
    auto frac = red.frac_coords();
    std::size_t i0 = 0;
    while (red.species()[i0] != anchor)
        ++i0;

    std::vector<Vec3> translations{Vec3::Zero()};
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i0 || red.species()[j] != anchor)
            continue;
        Vec3 t = wrap_centered(frac[j] - frac[i0]);
        if (is_pure_translation(red, t, tol))
            translations.push_back(t);
    }
    const std::size_t m = translations.size();
    if (m == 1 || n % m != 0)
        return red;

    std::vector<Vec3> cands;
    for (const auto& t : translations)
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b)
                for (int c = -1; c <= 1; ++c) {
                    Vec3 v = red.lattice().to_cart(t + Vec3(a, b, c));
                    if (v.norm() > 1e-8)
                        cands.push_back(v);
                }
    std::sort(cands.begin(), cands.end(), [](const Vec3& x, const Vec3& y) { return x.norm() < y.norm(); });

    const double target = red.volume() / static_cast<double>(m);
    for (std::size_t i = 0; i < cands.size(); ++i)
        for (std::size_t j = i + 1; j < cands.size(); ++j)
            for (std::size_t k = j + 1; k < cands.size(); ++k) {
                Mat3 rows;
                rows.row(0) = cands[i].transpose();
                rows.row(1) = cands[j].transpose();
                rows.row(2) = cands[k].transpose();
                double det = rows.determinant();
                if (std::abs(std::abs(det) - target) > 1e-4 * target)
                    continue;
                if (det < 0)
                    rows.row(2) *= -1.0;
                Lattice prim(rows);
                std::vector<Element> species;
                std::vector<Vec3> coords;
                auto cart = red.cart_coords();
                for (std::size_t s_i = 0; s_i < n; ++s_i) {
                    Vec3 f = wrap_frac(prim.to_frac(cart[s_i]));
                    bool dup = false;
                    for (std::size_t q = 0; q < coords.size() && !dup; ++q)
                        dup = species[q] == red.species()[s_i] && min_image_distance(f, coords[q], prim) <= tol;
                    if (!dup) {
                        species.push_back(red.species()[s_i]);
                        coords.push_back(f);
                    }
                }
                if (coords.size() * m != n)
                    return red;
                return niggli_reduce(CrystalStructure(prim, std::move(species), std::move(coords)));
            }
    return red;
}

MatchResult match(const CrystalStructure& a, const CrystalStructure& b, const MatchTolerances& tol)
{
    tol.validate();
    if (reduced_formula(a.composition()) != reduced_formula(b.composition()))
        return {};
    CrystalStructure p1 = tol.primitive_cell ? find_primitive(a, tol.primitive_tol) : a;
    CrystalStructure p2 = tol.primitive_cell ? find_primitive(b, tol.primitive_tol) : b;
    if (p1.size() != p2.size())
        return {};
    const double volume = (p1.volume() + p2.volume()) / 2.0;
    CrystalStructure s1 = niggli_reduce(p1.with_lattice(p1.lattice().scaled_to_volume(volume)));
    CrystalStructure s2 = niggli_reduce(p2.with_lattice(p2.lattice().scaled_to_volume(volume)));

    std::optional<double> best;
    for (const IMat3& m : lattice_correspondences(s1.lattice(), s2.lattice(), tol)) {
        CrystalStructure s2m = change_basis(s2, m);
        Lattice avg = average_lattice(s1.lattice(), s2m.lattice());
        auto rms = compare_sites(s1, s2m, avg, tol.stol);
        if (rms && (!best || *rms < *best))
            best = rms;
        if (best && *best < 1e-12)
            break;
    }
    if (!best)
        return {};
    return {true, best};
}

MatchRate match_rate(const std::vector<std::optional<CrystalStructure>>& predictions,
                     const std::vector<CrystalStructure>& ground_truths, const MatchTolerances& tol)
{
    if (predictions.empty())
        throw Error("match_rate needs at least one pair");
    if (predictions.size() != ground_truths.size())
        throw Error("match_rate got " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(ground_truths.size()) + " ground truths");
    MatchRate out;
    out.total = static_cast<int>(predictions.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (!predictions[i])
            continue;
        auto r = match(*predictions[i], ground_truths[i], tol);
        if (r.matched) {
            ++out.matched;
            sum += *r.rmse;
        }
    }
    out.rate = static_cast<double>(out.matched) / out.total;
    if (out.matched > 0)
        out.mean_rmse = sum / out.matched;
    return out;
}

MatchRate match_rate(const std::vector<CrystalStructure>& predictions,
                     const std::vector<CrystalStructure>& ground_truths, const MatchTolerances& tol)
{
    std::vector<std::optional<CrystalStructure>> wrapped(predictions.begin(), predictions.end());
    return match_rate(wrapped, ground_truths, tol);
}

std::vector<std::vector<int>> dedup(const std::vector<CrystalStructure>& candidates, const MatchTolerances& tol)
{
    const int n = static_cast<int>(candidates.size());
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    };

    std::map<std::string, std::vector<int>> buckets;
    for (int i = 0; i < n; ++i)
        buckets[reduced_formula(candidates[i].composition())].push_back(i);
    for (const auto& [formula, idx] : buckets)
        for (std::size_t p = 0; p < idx.size(); ++p)
            for (std::size_t q = p + 1; q < idx.size(); ++q) {
                int ra = find(idx[p]), rb = find(idx[q]);
                if (ra == rb)
                    continue;
                if (match(candidates[idx[p]], candidates[idx[q]], tol).matched)
                    parent[std::max(ra, rb)] = std::min(ra, rb);
            }

    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < n; ++i)
        groups[find(i)].push_back(i);
    std::vector<std::vector<int>> out;
    for (auto& [root, members] : groups)
        out.push_back(std::move(members));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<bool> novelty(const std::vector<CrystalStructure>& candidates,
                          const std::vector<StructureRecord>& reference, const MatchTolerances& tol)
{
    std::map<std::string, std::vector<const CrystalStructure*>> by_formula;
    for (const auto& r : reference)
        by_formula[reduced_formula(r.structure.composition())].push_back(&r.structure);
    std::vector<bool> out;
    for (const auto& c : candidates) {
        bool novel = true;
        auto it = by_formula.find(reduced_formula(c.composition()));
        if (it != by_formula.end())
            for (const CrystalStructure* ref : it->second)
                if (match(c, *ref, tol).matched) {
                    novel = false;
                    break;
                }
        out.push_back(novel);
    }
    return out;
}

} // namespace xtal
