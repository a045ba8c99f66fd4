// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "xtal/core/errors.hpp"
#include "xtal/io/database.hpp"
#include "xtal/matcher/matcher.hpp"

namespace xtal {

inline constexpr std::size_t max_substitution_elements = 6;

class SubstitutionError : public Error {
public:
    using Error::Error;
};

/// Cost of relabelling element a as b: en_weight |dEN| + z_weight |dZ|.
/// Elements without a Pauling value contribute missing_en instead of |dEN|.
struct SubstitutionScoring {
    double en_weight = 1.0;
    double z_weight = 1.0 / 20.0;
    double missing_en = 1.0;

    double cost(Element a, Element b, const ElementTable& table = ElementTable::builtin()) const;
};

/// Records reachable by reduced formula, anonymous formula and element.
class StructureIndex {
public:
    StructureIndex() = default;
    explicit StructureIndex(std::vector<StructureRecord> records);

    const std::vector<StructureRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    /// Record indices in insertion order; empty when the key is unknown.
    const std::vector<std::size_t>& by_reduced_formula(const std::string& formula) const;
    const std::vector<std::size_t>& by_anonymous_formula(const std::string& formula) const;
    const std::vector<std::size_t>& by_element(Element e) const;

private:
    std::vector<StructureRecord> records_;
    std::map<std::string, std::vector<std::size_t>> reduced_;
    std::map<std::string, std::vector<std::size_t>> anonymous_;
    std::map<Element, std::vector<std::size_t>> elements_;
};

StructureIndex build_index(std::vector<StructureRecord> records);

enum class SimilarityTier { ExactFormula = 1, SameStoichiometry = 2, SharedElements = 3 };

struct SimilarHit {
    std::size_t index;  // into StructureIndex::records()
    SimilarityTier tier;
    /// Tier 1: 0. Tier 2: best substitution cost. Tier 3: 1 - Jaccard overlap of element sets.
    double score;
};

/// Ranked by (tier, score, record id). Records sharing no element and no
/// stoichiometry with the query are not returned. k >= 1.
std::vector<SimilarHit> query_similar(const Composition& query, const StructureIndex& index, std::size_t k,
                                      const SubstitutionScoring& scoring = {});

/// Lowest-cost relabelling from -> to that maps elements of equal reduced count.
struct ElementMapping {
    std::map<Element, Element> mapping;
    double cost = 0.0;
};

/// Throws SubstitutionError when the reduced stoichiometries differ and
/// GuardError above max_substitution_elements.
ElementMapping best_element_mapping(const Composition& from, const Composition& to,
                                    const SubstitutionScoring& scoring = {});

/// Relabels the prototype's sites through best_element_mapping and rescales the
/// lattice isotropically by cbrt(sum r_cov^3 after / sum r_cov^3 before).
/// Fractional coordinates are kept exactly.
CrystalStructure substitute(const StructureRecord& prototype, const Composition& target,
                            const SubstitutionScoring& scoring = {});

/// Up to m substituted prototypes (tiers 1 and 2 of query_similar, best first),
/// with matcher duplicates removed keeping the first of each group.
std::vector<CrystalStructure> generate_candidates(const Composition& target, const StructureIndex& index,
                                                  std::size_t m, const SubstitutionScoring& scoring = {},
                                                  const MatchTolerances& tol = {});

} // namespace xtal
