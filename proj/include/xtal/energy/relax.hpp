// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xtal/energy/calculator.hpp"

namespace xtal {

struct FireParams {
    double dt = 0.1;
    double dt_max = 1.0;
    int n_min = 5;
    double f_inc = 1.1;
    double f_dec = 0.5;
    double a_start = 0.1;
    double f_a = 0.99;
    double max_step = 0.2;  // A, bound on the full displacement vector per step
};

struct RelaxOptions {
    int max_steps = 100;
    double fmax = 0.05;  // eV/A
    bool relax_cell = true;
    FireParams fire;
};

struct RelaxFrame {
    double energy = 0.0;
    double fmax = 0.0;  // largest generalized force (atoms and scaled cell rows)
    CrystalStructure structure;
};

struct RelaxResult {
    CrystalStructure structure;
    Evaluation evaluation;              // at the returned structure
    std::vector<RelaxFrame> trajectory;  // accepted states, starting with the input
    bool converged = false;
    int steps = 0;                       // optimizer iterations taken
    std::optional<std::string> error;    // set when an evaluation failed mid-run
};

/// FIRE descent on positions and, with relax_cell, a deformation gradient
/// scaled by the atom count. A trial step that raises the energy (or makes
/// atoms overlap) is rejected and the velocity reset, so accepted energies
/// never increase. Throws when the input itself cannot be evaluated.
RelaxResult relax(const Calculator& calc, const CrystalStructure& s, const RelaxOptions& options = {});

} // namespace xtal
