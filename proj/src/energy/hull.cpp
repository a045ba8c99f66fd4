// SPDX-License-Identifier: Apache-2.0
#include "xtal/energy/hull.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

namespace xtal {

namespace {

constexpr double plane_tol = 1e-9;

std::vector<double> fractions(const Composition& c, const std::vector<Element>& elements)
{
    std::vector<double> f;
    double n = c.num_atoms();
    for (Element e : elements)
        f.push_back(c.count(e) / n);
    return f;
}

// Geometry works in the k-1 coordinates that drop the first element's fraction.
Eigen::VectorXd coords(const std::vector<double>& f)
{
    Eigen::VectorXd y(static_cast<Eigen::Index>(f.size()) - 1);
    for (std::size_t k = 1; k < f.size(); ++k)
        y[static_cast<Eigen::Index>(k) - 1] = f[k];
    return y;
}

struct Point {
    Composition comp;
    std::vector<double> frac;
    double energy;
};

// Barycentric weights of y in the simplex spanned by the rows of `verts`;
// empty when the simplex is degenerate.
std::optional<Eigen::VectorXd> barycentric(const std::vector<Eigen::VectorXd>& verts, const Eigen::VectorXd& y)
{
    const Eigen::Index d = y.size();
    Eigen::MatrixXd m(d, d);
    for (Eigen::Index k = 0; k < d; ++k)
        m.col(k) = verts[static_cast<std::size_t>(k) + 1] - verts[0];
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (lu.rank() < d)
        return std::nullopt;
    Eigen::VectorXd lam = lu.solve(y - verts[0]);
    Eigen::VectorXd out(d + 1);
    out[0] = 1.0 - lam.sum();
    out.tail(d) = lam;
    return out;
}

std::vector<std::vector<int>> binary_lower_hull(const std::vector<Point>& pts)
{
    std::vector<int> order(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (pts[a].frac[1] != pts[b].frac[1])
            return pts[a].frac[1] < pts[b].frac[1];
        return pts[a].energy < pts[b].energy;
    });
    // Andrew's monotone chain, lower half only.
    std::vector<int> h;
    for (int idx : order) {
        while (h.size() >= 2) {
            const Point& a = pts[h[h.size() - 2]];
            const Point& b = pts[h.back()];
            const Point& p = pts[idx];
            double cross = (b.frac[1] - a.frac[1]) * (p.energy - a.energy) -
                           (b.energy - a.energy) * (p.frac[1] - a.frac[1]);
            if (cross > 0.0)
                break;
            h.pop_back();
        }
        h.push_back(idx);
    }
    std::vector<std::vector<int>> facets;
    for (std::size_t i = 0; i + 1 < h.size(); ++i)
        facets.push_back({h[i], h[i + 1]});
    return facets;
}

// Every k-subset whose supporting plane lies on or below all points.
std::vector<std::vector<int>> simplex_lower_hull(const std::vector<Point>& pts, int k)
{
    const int m = static_cast<int>(pts.size());
    std::vector<Eigen::VectorXd> y;
    for (const auto& p : pts)
        y.push_back(coords(p.frac));

    std::vector<std::vector<int>> facets;
    std::vector<int> pick(static_cast<std::size_t>(k));
    auto consider = [&] {
        // plane E = c0 + c . y through the picked points
        Eigen::MatrixXd a(k, k);
        Eigen::VectorXd rhs(k);
        for (int r = 0; r < k; ++r) {
            a(r, 0) = 1.0;
            a.block(r, 1, 1, k - 1) = y[static_cast<std::size_t>(pick[r])].transpose();
            rhs[r] = pts[static_cast<std::size_t>(pick[r])].energy;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        if (lu.rank() < k)
            return;
        Eigen::VectorXd c = lu.solve(rhs);
        for (int q = 0; q < m; ++q) {
            double plane = c[0] + c.tail(k - 1).dot(y[static_cast<std::size_t>(q)]);
            if (pts[static_cast<std::size_t>(q)].energy < plane - plane_tol)
                return;
        }
        facets.push_back(pick);
    };
    auto recurse = [&](auto&& self, int depth, int start) -> void {
        if (depth == k) {
            consider();
            return;
        }
        for (int i = start; i <= m - (k - depth); ++i) {
            pick[static_cast<std::size_t>(depth)] = i;
            self(self, depth + 1, i + 1);
        }
    };
    recurse(recurse, 0, 0);
    return facets;
}

} // namespace

PhaseHull build_hull(const std::vector<HullEntry>& entries)
{
    std::set<Element> all;
    for (const auto& e : entries) {
        if (!std::isfinite(e.energy_per_atom))
            throw HullError("hull entry " + reduced_formula(e.composition) + " has a non-finite energy");
        for (Element el : e.composition.elements())
            all.insert(el);
    }
    if (all.empty())
        throw HullError("cannot build a hull without entries");
    if (static_cast<int>(all.size()) > max_hull_elements)
        throw GuardError("hull over " + std::to_string(all.size()) + " elements exceeds the limit of " +
                         std::to_string(max_hull_elements));

    PhaseHull hull;
    hull.elements_.assign(all.begin(), all.end());
    const int k = static_cast<int>(hull.elements_.size());

    // Lowest entry per reduced composition.
    std::map<std::string, Point> lowest;
    for (const auto& e : entries) {
        auto key = reduced_formula(e.composition);
        auto it = lowest.find(key);
        if (it == lowest.end() || e.energy_per_atom < it->second.energy)
            lowest.insert_or_assign(key, Point{e.composition.reduced(), fractions(e.composition, hull.elements_),
                                               e.energy_per_atom});
    }
    std::vector<double> ref(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        auto it = lowest.find(std::string(hull.elements_[static_cast<std::size_t>(i)].symbol()));
        if (it == lowest.end())
            throw HullError("missing elemental reference for " +
                            std::string(hull.elements_[static_cast<std::size_t>(i)].symbol()));
        ref[static_cast<std::size_t>(i)] = it->second.energy;
    }

    // Points above the plane through the elemental references can never be vertices.
    std::vector<Point> pts;
    for (auto& [key, p] : lowest) {
        double plane = 0.0;
        for (int i = 0; i < k; ++i)
            plane += p.frac[static_cast<std::size_t>(i)] * ref[static_cast<std::size_t>(i)];
        if (p.energy <= plane + plane_tol)
            pts.push_back(p);
    }

    std::vector<std::vector<int>> facets;
    if (k == 1)
        facets = {{0}};
    else if (k == 2)
        facets = binary_lower_hull(pts);
    else
        facets = simplex_lower_hull(pts, k);

    std::map<int, int> remap;
    for (auto& f : facets)
        for (int& idx : f) {
            auto [it, inserted] = remap.try_emplace(idx, static_cast<int>(remap.size()));
            if (inserted) {
                hull.points_.push_back(pts[static_cast<std::size_t>(idx)].frac);
                hull.energies_.push_back(pts[static_cast<std::size_t>(idx)].energy);
                hull.compositions_.push_back(pts[static_cast<std::size_t>(idx)].comp);
            }
            idx = it->second;
        }
    hull.facets_ = std::move(facets);
    return hull;
}

PhaseHull build_hull(const std::vector<HullEntry>& entries, const std::vector<Element>& system)
{
    std::set<Element> allowed(system.begin(), system.end());
    std::vector<HullEntry> subset;
    for (const auto& e : entries) {
        bool inside = true;
        for (Element el : e.composition.elements())
            inside = inside && allowed.count(el);
        if (inside)
            subset.push_back(e);
    }
    for (Element el : allowed) {
        bool found = false;
        for (const auto& e : subset)
            found = found || (e.composition.num_elements() == 1 && e.composition.count(el) > 0);
        if (!found)
            throw HullError("missing elemental reference for " + std::string(el.symbol()));
    }
    return build_hull(subset);
}

double PhaseHull::energy_at(const Composition& c) const
{
    for (Element e : c.elements())
        if (std::find(elements_.begin(), elements_.end(), e) == elements_.end())
            throw HullError("composition " + reduced_formula(c) + " contains " + std::string(e.symbol()) +
                            ", which is outside the hull");
    auto f = fractions(c, elements_);
    for (std::size_t v = 0; v < points_.size(); ++v) {
        bool same = true;
        for (std::size_t k = 0; k < f.size(); ++k)
            same = same && std::abs(points_[v][k] - f[k]) < 1e-12;
        if (same)
            return energies_[v];
    }
    if (elements_.size() == 1)
        return energies_[0];

    Eigen::VectorXd y = coords(f);
    double best_min = -std::numeric_limits<double>::infinity();
    double best_energy = 0.0;
    for (const auto& facet : facets_) {
        std::vector<Eigen::VectorXd> verts;
        for (int idx : facet)
            verts.push_back(coords(points_[static_cast<std::size_t>(idx)]));
        auto lam = barycentric(verts, y);
        if (!lam)
            continue;
        double e = 0.0;
        for (std::size_t k = 0; k < facet.size(); ++k)
            e += (*lam)[static_cast<Eigen::Index>(k)] * energies_[static_cast<std::size_t>(facet[k])];
        double lo = lam->minCoeff();
        if (lo > best_min) {
            best_min = lo;
            best_energy = e;
        }
        if (lo >= -plane_tol)
            return e;
    }
    if (best_min == -std::numeric_limits<double>::infinity())
        throw HullError("hull has no facet covering " + reduced_formula(c));
    return best_energy;
}

std::vector<std::string> PhaseHull::vertex_formulas() const
{
    std::vector<std::string> out;
    for (const auto& c : compositions_)
        out.push_back(reduced_formula(c));
    std::sort(out.begin(), out.end());
    return out;
}

double energy_above_hull(const HullEntry& entry, const PhaseHull& hull)
{
    return entry.energy_per_atom - hull.energy_at(entry.composition);
}

StabilityFlags classify_stability(double e_above_hull, const Composition& c)
{
    StabilityFlags f;
    f.stable = e_above_hull < 0.0 && c.num_elements() >= 2;
    f.metastable_0_1 = e_above_hull < 0.1;
    f.metastable_0_03 = e_above_hull < 0.03;
    return f;
}

std::vector<HullEntry> parse_hull_entries(const std::string& text)
{
    std::vector<HullEntry> out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            auto j = nlohmann::json::parse(line);
            if (!j.is_object() || !j.contains("composition") || !j.contains("energy_per_atom"))
                throw ParseError("hull entry needs composition and energy_per_atom", line_no);
            HullEntry e{Composition::from_formula(j["composition"].get<std::string>()),
                        j["energy_per_atom"].get<double>(), j.value("id", std::string())};
            if (!std::isfinite(e.energy_per_atom))
                throw ParseError("energy_per_atom must be finite", line_no);
            out.push_back(std::move(e));
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return out;
}

std::vector<HullEntry> load_hull_entries(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open hull file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_hull_entries(buf.str());
}

} // namespace xtal
