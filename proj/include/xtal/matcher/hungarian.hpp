// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

namespace xtal {

struct Assignment {
    std::vector<int> row_to_col;
    double cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (row-major, n x n),
/// O(n^3) shortest augmenting paths with potentials.
Assignment solve_assignment(const std::vector<double>& cost, int n);

} // namespace xtal
