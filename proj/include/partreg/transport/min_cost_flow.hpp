#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "partreg/deform.hpp"
#include "partreg/types.hpp"

namespace partreg::detail {

using FlowMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct TransportationSolution {
    FlowMatrix flow;       // N x M integer flows
    Vector pot_source;     // dual potentials certifying optimality
    Vector pot_target;
};

/// Exact minimum-cost transportation on the dense bipartite graph with
/// integer node balances, by successive shortest augmenting paths with
/// node potentials. Supplies and demands must balance. Optimality is
/// certified through reduced costs before returning; eps-complementary
/// slackness uses eps = 1e-9 * max(1, max cost).
inline TransportationSolution solve_transportation(const Matrix& cost,
                                                   const std::vector<std::int64_t>& supply,
                                                   const std::vector<std::int64_t>& demand) {
    const Index n = cost.rows(), m = cost.cols();
    if (static_cast<Index>(supply.size()) != n || static_cast<Index>(demand.size()) != m)
        throw contract_error("solve_transportation: balance vectors do not match cost shape");
    std::int64_t total_s = 0, total_d = 0;
    for (auto s : supply) {
        if (s < 0) throw contract_error("solve_transportation: negative supply");
        total_s += s;
    }
    for (auto d : demand) {
        if (d < 0) throw contract_error("solve_transportation: negative demand");
        total_d += d;
    }
    if (total_s != total_d)
        throw contract_error("solve_transportation: supply and demand must balance");

    TransportationSolution sol;
    sol.flow = FlowMatrix::Zero(n, m);
    sol.pot_source = Vector::Zero(n);
    sol.pot_target = Vector::Zero(m);

    std::vector<std::int64_t> rem_s = supply, rem_d = demand;
    std::int64_t remaining = total_s;

    const Index nv = n + m;  // sources first, then targets
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(static_cast<std::size_t>(nv));
    std::vector<Index> prev(static_cast<std::size_t>(nv));
    std::vector<char> done(static_cast<std::size_t>(nv));

    while (remaining > 0) {
        // Multi-source Dijkstra over reduced costs, from sources with
        // remaining supply to the nearest target with remaining demand.
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(prev.begin(), prev.end(), Index{-1});
        std::fill(done.begin(), done.end(), char{0});
        for (Index i = 0; i < n; ++i)
            if (rem_s[static_cast<std::size_t>(i)] > 0) dist[static_cast<std::size_t>(i)] = 0.0;

        Index reached = -1;
        for (;;) {
            Index u = -1;
            double best = inf;
            for (Index v = 0; v < nv; ++v) {
                if (!done[static_cast<std::size_t>(v)] && dist[static_cast<std::size_t>(v)] < best) {
                    best = dist[static_cast<std::size_t>(v)];
                    u = v;
                }
            }
            if (u < 0) break;
            done[static_cast<std::size_t>(u)] = 1;
            if (u >= n && rem_d[static_cast<std::size_t>(u - n)] > 0) {
                reached = u;
                break;
            }
            if (u < n) {
                const Index i = u;
                const double base = dist[static_cast<std::size_t>(u)];
                for (Index j = 0; j < m; ++j) {
                    const Index v = n + j;
                    if (done[static_cast<std::size_t>(v)]) continue;
                    double rc = cost(i, j) + sol.pot_source[i] - sol.pot_target[j];
                    if (rc < 0.0) rc = 0.0;  // guards rounding of certified arcs
                    if (base + rc < dist[static_cast<std::size_t>(v)]) {
                        dist[static_cast<std::size_t>(v)] = base + rc;
                        prev[static_cast<std::size_t>(v)] = u;
                    }
                }
            } else {
                const Index j = u - n;
                const double base = dist[static_cast<std::size_t>(u)];
                for (Index i = 0; i < n; ++i) {
                    if (done[static_cast<std::size_t>(i)] || sol.flow(i, j) <= 0) continue;
                    double rc = -cost(i, j) - sol.pot_source[i] + sol.pot_target[j];
                    if (rc < 0.0) rc = 0.0;
                    if (base + rc < dist[static_cast<std::size_t>(i)]) {
                        dist[static_cast<std::size_t>(i)] = base + rc;
                        prev[static_cast<std::size_t>(i)] = u;
                    }
                }
            }
        }
        if (reached < 0)
            throw numeric_error("solve_transportation: no augmenting path (infeasible instance)");

        const double dcap = dist[static_cast<std::size_t>(reached)];
        for (Index i = 0; i < n; ++i)
            sol.pot_source[i] += std::min(dist[static_cast<std::size_t>(i)], dcap);
        for (Index j = 0; j < m; ++j)
            sol.pot_target[j] += std::min(dist[static_cast<std::size_t>(n + j)], dcap);

        // Bottleneck along the path.
        std::int64_t amt = rem_d[static_cast<std::size_t>(reached - n)];
        Index v = reached;
        while (prev[static_cast<std::size_t>(v)] >= 0) {
            const Index u = prev[static_cast<std::size_t>(v)];
            if (u >= n) amt = std::min(amt, sol.flow(v, u - n));  // backward arc target->source
            v = u;
        }
        amt = std::min(amt, rem_s[static_cast<std::size_t>(v)]);

        v = reached;
        while (prev[static_cast<std::size_t>(v)] >= 0) {
            const Index u = prev[static_cast<std::size_t>(v)];
            if (u < n) sol.flow(u, v - n) += amt;   // forward source->target
            else sol.flow(v, u - n) -= amt;         // backward target->source
            v = u;
        }
        rem_s[static_cast<std::size_t>(v)] -= amt;
        rem_d[static_cast<std::size_t>(reached - n)] -= amt;
        remaining -= amt;
    }

    // Reduced-cost certificate.
    const double eps = 1e-9 * std::max(1.0, cost.size() > 0 ? cost.maxCoeff() : 0.0);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) {
            const double rc = cost(i, j) + sol.pot_source[i] - sol.pot_target[j];
            if (rc < -eps || (sol.flow(i, j) > 0 && rc > eps))
                throw numeric_error("solve_transportation: optimality certificate failed");
        }
    }
    return sol;
}

}  // namespace partreg::detail
