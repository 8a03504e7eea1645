#pragma once

#include <cmath>

#include "partreg/transport/min_cost_flow.hpp"

namespace partreg {

struct OtSolution {
    TransportPlan plan;
    double cost = 0.0;
};

struct PrimalOptSolution {
    TransportPlan plan;
    double cost = 0.0;           // cost restricted to real points
    double extended_cost = 0.0;  // objective of the reservoir-extended problem
};

/// Exact balanced optimal transport between uniform empirical measures.
/// Masses are scaled internally so that each side totals min(N, M); with
/// N = M every point carries unit mass and the optimal plan is a
/// permutation. Solved as an integer transportation problem and certified
/// by reduced costs.
inline OtSolution solve_balanced_ot(const CostMatrix& cost) {
    const Index n = cost.rows(), m = cost.cols();
    if (n < 1 || m < 1) throw contract_error("solve_balanced_ot: empty cost matrix");
    const std::int64_t lo = static_cast<std::int64_t>(std::min(n, m));
    // mass per source point = min/N, per target point = min/M; integerized
    // by the common factor N*M.
    std::vector<std::int64_t> supply(static_cast<std::size_t>(n), lo * m);
    std::vector<std::int64_t> demand(static_cast<std::size_t>(m), lo * n);
    const auto sol = detail::solve_transportation(cost.values, supply, demand);

    OtSolution out;
    out.plan.n_source = n;
    out.plan.n_target = m;
    const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(m));
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) {
            if (sol.flow(i, j) > 0) {
                const double g = static_cast<double>(sol.flow(i, j)) * scale;
                out.plan.entries.push_back({i, j, g});
                out.cost += cost.values(i, j) * g;
            }
        }
    }
    return out;
}

/// Exact partial transport with the hard mass constraint |plan| = zeta.
///
/// A reservoir point is appended to each side: the extended cost carries
/// lambda = max cost + 1 on real-to-reservoir arcs and 2*lambda + delta
/// (delta = 1) on the reservoir-to-reservoir arc, the reservoirs carry
/// masses M - zeta and N - zeta, and the extended problem is solved as
/// balanced transport. The restriction to real points is the optimum and
/// carries mass exactly zeta.
inline PrimalOptSolution solve_primal_opt(const CostMatrix& cost, double zeta) {
    const Index n = cost.rows(), m = cost.cols();
    if (n < 1 || m < 1) throw contract_error("solve_primal_opt: empty cost matrix");
    const double zmax = static_cast<double>(std::min(n, m));
    if (!(zeta >= 0.0) || zeta > zmax)
        throw parameter_error("solve_primal_opt: zeta must lie in [0, min(N, M)]");
    const double zr = std::round(zeta);
    if (std::abs(zeta - zr) > 1e-12)
        throw parameter_error(
            "solve_primal_opt: the exact solver requires integer zeta; "
            "use the entropic solver for fractional mass");
    const auto z = static_cast<std::int64_t>(zr);

    PrimalOptSolution out;
    out.plan.n_source = n;
    out.plan.n_target = m;
    if (z == 0) return out;

    const double lambda = cost.values.maxCoeff() + 1.0;
    const double delta = 1.0;
    Matrix ext(n + 1, m + 1);
    ext.topLeftCorner(n, m) = cost.values;
    ext.topRightCorner(n, 1).setConstant(lambda);
    ext.bottomLeftCorner(1, m).setConstant(lambda);
    ext(n, m) = 2.0 * lambda + delta;

    std::vector<std::int64_t> supply(static_cast<std::size_t>(n), 1);
    supply.push_back(static_cast<std::int64_t>(m) - z);
    std::vector<std::int64_t> demand(static_cast<std::size_t>(m), 1);
    demand.push_back(static_cast<std::int64_t>(n) - z);

    const auto sol = detail::solve_transportation(ext, supply, demand);
    for (Index i = 0; i < n + 1; ++i)
        for (Index j = 0; j < m + 1; ++j)
            if (sol.flow(i, j) > 0)
                out.extended_cost += ext(i, j) * static_cast<double>(sol.flow(i, j));
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) {
            if (sol.flow(i, j) > 0) {
                const double g = static_cast<double>(sol.flow(i, j));
                out.plan.entries.push_back({i, j, g});
                out.cost += cost.values(i, j) * g;
            }
        }
    }
    return out;
}

/// Barycentric projection of a plan: each source row with positive mass is
/// replaced by the mass-weighted average of its matched targets.
struct BarycentricUpdate {
    std::vector<Index> domain;          // rows with positive mass, ascending
    Matrix rows;                        // |domain| x D replacement rows
};

inline BarycentricUpdate barycentric_update(const TransportPlan& plan, const Matrix& Y) {
    if (plan.n_target != Y.rows())
        throw contract_error("barycentric_update: plan/target size mismatch");
    Vector mass = Vector::Zero(plan.n_source);
    Matrix acc = Matrix::Zero(plan.n_source, Y.cols());
    for (const auto& e : plan.entries) {
        mass[e.source] += e.mass;
        acc.row(e.source) += e.mass * Y.row(e.target);
    }
    BarycentricUpdate out;
    for (Index i = 0; i < plan.n_source; ++i)
        if (mass[i] > 0.0) out.domain.push_back(i);
    out.rows.resize(static_cast<Index>(out.domain.size()), Y.cols());
    for (Index k = 0; k < out.rows.rows(); ++k) {
        const Index i = out.domain[static_cast<std::size_t>(k)];
        out.rows.row(k) = acc.row(i) / mass[i];
    }
    return out;
}

inline BarycentricUpdate barycentric_update(const TransportPlan& plan, const PointCloud& Y) {
    return barycentric_update(plan, Y.points);
}

}  // namespace partreg
