#pragma once

#include <utility>
#include <vector>

#include "partreg/types.hpp"

namespace partreg {

/// Result of the 1D partial transport problem: a monotone partial bijection
/// over the sorted inputs plus the optimal objective value.
struct Opt1dSolution {
    std::vector<std::pair<Index, Index>> matches;  // (source idx, target idx), ascending
    double cost = 0.0;  // matched squared differences + lambda * (N + M - 2|matches|)
};

/// Exact 1D partial transport with squared-difference ground cost and a
/// linear penalty lambda per unmatched point on either side. Inputs must be
/// ascending. The optimum over monotone partial bijections is found by an
/// O(N*M) dynamic program; ties are resolved match-first, then skip-source,
/// so repeated runs reconstruct the same map.
inline Opt1dSolution solve_opt_1d(const std::vector<double>& a, const std::vector<double>& b,
                                  double lambda) {
    if (!(lambda >= 0.0)) throw parameter_error("solve_opt_1d: lambda must be >= 0");
    for (std::size_t i = 1; i < a.size(); ++i)
        if (a[i] < a[i - 1]) throw contract_error("solve_opt_1d: first input is not ascending");
    for (std::size_t j = 1; j < b.size(); ++j)
        if (b[j] < b[j - 1]) throw contract_error("solve_opt_1d: second input is not ascending");

    const std::size_t n = a.size(), m = b.size();
    // dp over prefixes; parent codes: 0 = match, 1 = skip a_i, 2 = skip b_j.
    std::vector<double> prev_row(m + 1), cur_row(m + 1);
    std::vector<std::uint8_t> parent(n * m);
    for (std::size_t j = 0; j <= m; ++j) prev_row[j] = lambda * static_cast<double>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        cur_row[0] = lambda * static_cast<double>(i);
        for (std::size_t j = 1; j <= m; ++j) {
            const double d = a[i - 1] - b[j - 1];
            double best = prev_row[j - 1] + d * d;
            std::uint8_t arg = 0;
            const double skip_a = prev_row[j] + lambda;
            if (skip_a < best) { best = skip_a; arg = 1; }
            const double skip_b = cur_row[j - 1] + lambda;
            if (skip_b < best) { best = skip_b; arg = 2; }
            cur_row[j] = best;
            parent[(i - 1) * m + (j - 1)] = arg;
        }
        std::swap(prev_row, cur_row);
    }

    Opt1dSolution sol;
    sol.cost = prev_row[m];
    std::size_t i = n, j = m;
    while (i > 0 && j > 0) {
        switch (parent[(i - 1) * m + (j - 1)]) {
            case 0:
                sol.matches.emplace_back(static_cast<Index>(i - 1), static_cast<Index>(j - 1));
                --i; --j;
                break;
            case 1: --i; break;
            default: --j; break;
        }
    }
    std::reverse(sol.matches.begin(), sol.matches.end());
    return sol;
}

}  // namespace partreg
