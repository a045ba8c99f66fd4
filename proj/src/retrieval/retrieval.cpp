// SPDX-License-Identifier: Apache-2.0
#include "xtal/retrieval/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace xtal {

namespace {

const std::vector<std::size_t> no_hits;

template <class Map, class Key>
const std::vector<std::size_t>& lookup(const Map& m, const Key& key)
{
    auto it = m.find(key);
    return it == m.end() ? no_hits : it->second;
}

std::map<int, std::vector<Element>> groups_by_count(const Composition& c)
{
    std::map<int, std::vector<Element>> out;
    const Composition reduced = c.reduced();
    for (const auto& [e, n] : reduced.counts())
        out[n].push_back(e);
    return out;
}

double covalent_volume(const CrystalStructure& s)
{
    const auto& table = ElementTable::builtin();
    double v = 0.0;
    for (Element e : s.species())
        v += std::pow(table[e].covalent_radius, 3);
    return v;
}

} // namespace

double SubstitutionScoring::cost(Element a, Element b, const ElementTable& table) const
{
    const auto& pa = table[a];
    const auto& pb = table[b];
    double en = pa.electronegativity && pb.electronegativity
                    ? std::abs(*pa.electronegativity - *pb.electronegativity)
                    : (a == b ? 0.0 : missing_en);
    return en_weight * en + z_weight * std::abs(a.z() - b.z());
}

StructureIndex::StructureIndex(std::vector<StructureRecord> records) : records_(std::move(records))
{
    for (std::size_t i = 0; i < records_.size(); ++i) {
        auto comp = records_[i].structure.composition();
        reduced_[reduced_formula(comp)].push_back(i);
        anonymous_[anonymous_formula(comp)].push_back(i);
        for (Element e : comp.elements())
            elements_[e].push_back(i);
    }
}

const std::vector<std::size_t>& StructureIndex::by_reduced_formula(const std::string& formula) const
{
    return lookup(reduced_, formula);
}

const std::vector<std::size_t>& StructureIndex::by_anonymous_formula(const std::string& formula) const
{
    return lookup(anonymous_, formula);
}

const std::vector<std::size_t>& StructureIndex::by_element(Element e) const
{
    return lookup(elements_, e);
}

StructureIndex build_index(std::vector<StructureRecord> records)
{
    return StructureIndex(std::move(records));
}

ElementMapping best_element_mapping(const Composition& from, const Composition& to, const SubstitutionScoring& scoring)
{
    if (from.num_elements() > max_substitution_elements || to.num_elements() > max_substitution_elements)
        throw GuardError("element substitution is limited to " + std::to_string(max_substitution_elements) +
                         " elements");
    auto gf = groups_by_count(from);
    auto gt = groups_by_count(to);
    auto same_shape = gf.size() == gt.size() &&
                      std::equal(gf.begin(), gf.end(), gt.begin(),
                                 [](const auto& x, const auto& y) { return x.first == y.first && x.second.size() == y.second.size(); });
    if (!same_shape)
        throw SubstitutionError("cannot substitute " + reduced_formula(from) + " into " + reduced_formula(to) +
                                ": stoichiometries differ (" + anonymous_formula(from) + " vs " +
                                anonymous_formula(to) + ")");

    ElementMapping out;
    // groups of equal reduced count are independent, so each is minimised on its own
    for (const auto& [count, src] : gf) {
        std::vector<Element> dst = gt[count];
        std::sort(dst.begin(), dst.end());
        double best = 1e300;
        std::vector<Element> best_perm;
        do {
            double c = 0.0;
            for (std::size_t k = 0; k < src.size(); ++k)
                c += scoring.cost(src[k], dst[k]);
            if (c < best - 1e-12) {
                best = c;
                best_perm = dst;
            }
        } while (std::next_permutation(dst.begin(), dst.end()));
        for (std::size_t k = 0; k < src.size(); ++k)
            out.mapping.emplace(src[k], best_perm[k]);
        out.cost += best;
    }
    return out;
}

std::vector<SimilarHit> query_similar(const Composition& query, const StructureIndex& index, std::size_t k,
                                      const SubstitutionScoring& scoring)
{
    if (k == 0)
        throw Error("query_similar needs k >= 1");
    const std::string reduced = reduced_formula(query);
    const std::string anonymous = anonymous_formula(query);
    const auto query_elements = query.elements();

    std::vector<SimilarHit> hits;
    for (std::size_t i = 0; i < index.size(); ++i) {
        auto comp = index.records()[i].structure.composition();
        if (reduced_formula(comp) == reduced) {
            hits.push_back({i, SimilarityTier::ExactFormula, 0.0});
            continue;
        }
        if (anonymous_formula(comp) == anonymous && comp.num_elements() <= max_substitution_elements &&
            query.num_elements() <= max_substitution_elements) {
            hits.push_back({i, SimilarityTier::SameStoichiometry, best_element_mapping(comp, query, scoring).cost});
            continue;
        }
        auto elems = comp.elements();
        std::vector<Element> shared;
        std::set_intersection(elems.begin(), elems.end(), query_elements.begin(), query_elements.end(),
                              std::back_inserter(shared));
        if (shared.empty())
            continue;
        double jaccard = static_cast<double>(shared.size()) /
                         static_cast<double>(elems.size() + query_elements.size() - shared.size());
        hits.push_back({i, SimilarityTier::SharedElements, 1.0 - jaccard});
    }
    const auto& recs = index.records();
    std::stable_sort(hits.begin(), hits.end(), [&](const SimilarHit& a, const SimilarHit& b) {
        if (a.tier != b.tier)
            return a.tier < b.tier;
        if (a.score != b.score)
            return a.score < b.score;
        return recs[a.index].id < recs[b.index].id;
    });
    if (hits.size() > k)
        hits.resize(k);
    return hits;
}

CrystalStructure substitute(const StructureRecord& prototype, const Composition& target,
                            const SubstitutionScoring& scoring)
{
    const auto& s = prototype.structure;
    auto m = best_element_mapping(s.composition(), target, scoring);
    std::vector<Element> species;
    species.reserve(s.size());
    for (Element e : s.species())
        species.push_back(m.mapping.at(e));
    CrystalStructure relabelled = s.with_species(species);
    double factor = std::cbrt(covalent_volume(relabelled) / covalent_volume(s));
    return relabelled.with_lattice(s.lattice().scaled(factor));
}

std::vector<CrystalStructure> generate_candidates(const Composition& target, const StructureIndex& index,
                                                  std::size_t m, const SubstitutionScoring& scoring,
                                                  const MatchTolerances& tol)
{
    if (m == 0)
        throw Error("generate_candidates needs m >= 1");
    std::vector<CrystalStructure> raw;
    for (const auto& hit : query_similar(target, index, std::max<std::size_t>(index.size(), 1), scoring)) {
        if (hit.tier == SimilarityTier::SharedElements)
            break;
        raw.push_back(substitute(index.records()[hit.index], target, scoring));
        if (raw.size() == m)
            break;
    }
    std::vector<CrystalStructure> out;
    for (const auto& group : dedup(raw, tol))
        out.push_back(raw[static_cast<std::size_t>(group.front())]);
    return out;
}

} // namespace xtal
