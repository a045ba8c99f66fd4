// SPDX-License-Identifier: Apache-2.0
#include "xtal/matcher/hungarian.hpp"

#include <limits>

#include "xtal/core/errors.hpp"

namespace xtal {

Assignment solve_assignment(const std::vector<double>& cost, int n)
{
    if (n < 0 || cost.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
        throw Error("assignment cost matrix must be n x n");
    Assignment out;
    if (n == 0)
        return out;

    const double inf = std::numeric_limits<double>::infinity();
    auto a = [&](int i, int j) { return cost[static_cast<std::size_t>(i - 1) * n + (j - 1)]; };
    // 1-based: column 0 is a virtual start; p[j] is the row matched to column j.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j])
                    continue;
                double cur = a(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    out.row_to_col.assign(n, -1);
    for (int j = 1; j <= n; ++j)
        out.row_to_col[p[j] - 1] = j - 1;
    for (int i = 0; i < n; ++i)
        out.cost += cost[static_cast<std::size_t>(i) * n + out.row_to_col[i]];
    return out;
}

} // namespace xtal
