// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "xtal/core/structure.hpp"
#include "xtal/io/database.hpp"

namespace xtal {

struct MatchTolerances {
    double ltol = 0.2;        // fractional length tolerance
    double stol = 0.3;        // site tolerance, fraction of (V/n)^(1/3)
    double angle_tol = 5.0;   // degrees
    /// Reduce both structures to primitive cells first, so supercells match.
    /// When false, different site counts never match.
    bool primitive_cell = true;
    /// Cartesian tolerance (A) for recognising pure translations in primitive search.
    double primitive_tol = 0.25;

    void validate() const;
};

struct MatchResult {
    bool matched = false;
    /// Root-mean-square site displacement over (V/n)^(1/3); set iff matched.
    std::optional<double> rmse;
};

/// Smallest cell generating the same periodic arrangement; returns the input
/// (Niggli-reduced) when no pure translation exists.
CrystalStructure find_primitive(const CrystalStructure& s, double tol = 0.25);

MatchResult match(const CrystalStructure& a, const CrystalStructure& b, const MatchTolerances& tol = {});

struct MatchRate {
    double rate = 0.0;
    std::optional<double> mean_rmse;  // over matched pairs; empty when none matched
    int matched = 0;
    int total = 0;
};

/// Missing predictions count as unmatched. Throws on empty or unequal lists.
MatchRate match_rate(const std::vector<std::optional<CrystalStructure>>& predictions,
                     const std::vector<CrystalStructure>& ground_truths, const MatchTolerances& tol = {});
MatchRate match_rate(const std::vector<CrystalStructure>& predictions,
                     const std::vector<CrystalStructure>& ground_truths, const MatchTolerances& tol = {});

/// Partition by the transitive closure of pairwise matches. Groups hold input
/// indices in increasing order and are sorted by their first index.
std::vector<std::vector<int>> dedup(const std::vector<CrystalStructure>& candidates, const MatchTolerances& tol = {});

/// True for candidates that match no reference record of the same reduced formula.
std::vector<bool> novelty(const std::vector<CrystalStructure>& candidates,
                          const std::vector<StructureRecord>& reference, const MatchTolerances& tol = {});

} // namespace xtal
