#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

namespace census {

/// Minimum-cost assignment of every row to a distinct column (rows <= cols),
/// shortest-augmenting-path Hungarian method with row/column potentials.
///
/// `Cost` must form an ordered abelian group: `+`, `-`, `<`, a value-initialized
/// zero, and `Cost::infinity()` strictly greater than any reduced cost that can
/// occur. The cost callback is `Cost(std::size_t row, std::size_t col)`.
///
/// Returns `col_of_row`. Deterministic: scans columns in index order and keeps
/// the first minimum.
template <typename Cost, typename CostFn>
std::vector<std::size_t> min_cost_assignment(std::size_t rows, std::size_t cols, CostFn&& cost) {
    std::vector<std::size_t> col_of_row(rows, 0);
    if (rows == 0) return col_of_row;

    constexpr std::size_t none = 0; // 1-based indexing below; 0 is the virtual root
    std::vector<Cost> u(rows + 1), v(cols + 1);
    std::vector<std::size_t> row_of_col(cols + 1, none), way(cols + 1, 0);
    std::vector<Cost> min_slack(cols + 1);
    std::vector<char> used(cols + 1);

    for (std::size_t i = 1; i <= rows; ++i) {
        row_of_col[0] = i;
        std::size_t j0 = 0;
        std::fill(min_slack.begin(), min_slack.end(), Cost::infinity());
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = row_of_col[j0];
            Cost delta = Cost::infinity();
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= cols; ++j) {
                if (used[j]) continue;
                const Cost cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < min_slack[j]) {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if (min_slack[j] < delta) {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= cols; ++j) {
                if (used[j]) {
                    u[row_of_col[j]] = u[row_of_col[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    min_slack[j] = min_slack[j] - delta;
                }
            }
            j0 = j1;
        } while (row_of_col[j0] != none);
        do {
            const std::size_t j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    for (std::size_t j = 1; j <= cols; ++j)
        if (row_of_col[j] != none) col_of_row[row_of_col[j] - 1] = j - 1;
    return col_of_row;
}

} // namespace census
