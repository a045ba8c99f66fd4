// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xtal/energy/calculator.hpp"

namespace xtal {

struct PairPotentialParams {
    double epsilon = 0.2;       // eV
    double sigma_scale = 0.9;   // sigma_ij = scale * (r_cov,i + r_cov,j)
    double cutoff = 6.0;        // A
    double overlap = 0.1;       // A; closer pairs raise OverlapError
};

/// Lennard-Jones pair potential, energy-shifted to zero at the cutoff.
class PairPotentialCalculator final : public Calculator {
public:
    explicit PairPotentialCalculator(PairPotentialParams params = {},
                                     const ElementTable& table = ElementTable::builtin());

    Evaluation evaluate(const CrystalStructure& s) const override;
    std::string name() const override { return "pair-lj"; }

    double sigma(Element a, Element b) const;
    /// Pair energy at separation r (0 beyond the cutoff).
    double pair_energy(Element a, Element b, double r) const;
    const PairPotentialParams& params() const noexcept { return params_; }

private:
    PairPotentialParams params_;
    const ElementTable* table_;
};

} // namespace xtal
