#pragma once

#include <cmath>
#include <vector>

#include "partreg/deform.hpp"
#include "partreg/types.hpp"

namespace partreg {

struct SinkhornSolution {
    TransportPlan plan;
    double cost = 0.0;       // transport cost restricted to real points
    bool converged = false;  // marginal residual reached tol within max_iter
    double residual = 0.0;   // final marginal residual (max-abs)
    int sweeps = 0;          // total scaling sweeps plus polish steps
    // Dual objective after each sweep of the final stage; exact alternating
    // maximization makes this sequence non-decreasing.
    std::vector<double> dual_objectives;
};

namespace detail {

// Row log-sum-exp of (shift_col + F_row - C)/xi style expressions; hand
// rolled to keep the inner loop allocation-free.
inline double lse_pair(const Vector& add, const Eigen::Ref<const Vector>& base, double xi) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index k = 0; k < add.size(); ++k) mx = std::max(mx, (add[k] + base[k]) / xi);
    if (!std::isfinite(mx)) return -std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (Index k = 0; k < add.size(); ++k) s += std::exp((add[k] + base[k]) / xi - mx);
    return mx + std::log(s);
}

struct EntropicCore {
    Matrix C;       // n x m cost, rows/cols already reduced to positive mass
    Vector p, q;    // marginals (equality) or unit bounds (inequality)
    Vector f, g;    // potentials
    double xi = 0.0;

    Matrix plan() const {
        Matrix G(C.rows(), C.cols());
        for (Index i = 0; i < C.rows(); ++i)
            for (Index j = 0; j < C.cols(); ++j) {
                double e = (f[i] + g[j] - C(i, j)) / xi;
                G(i, j) = std::exp(std::min(e, 690.0));
            }
        return G;
    }

    double dual_equality() const {
        const Matrix G = plan();
        return p.dot(f) + q.dot(g) - xi * G.sum();
    }

    // One equality-constrained sweep (exact row then column maximization).
    void sweep_equality() {
        Vector mC(C.cols());
        for (Index i = 0; i < C.rows(); ++i) {
            for (Index j = 0; j < C.cols(); ++j) mC[j] = -C(i, j);
            f[i] = xi * std::log(p[i]) - xi * lse_pair(g, mC, xi);
        }
        Vector mCt(C.rows());
        for (Index j = 0; j < C.cols(); ++j) {
            for (Index i = 0; i < C.rows(); ++i) mCt[i] = -C(i, j);
            g[j] = xi * std::log(q[j]) - xi * lse_pair(f, mCt, xi);
        }
    }

    double residual_equality() const {
        const Matrix G = plan();
        const double r = (G.rowwise().sum() - p).cwiseAbs().maxCoeff();
        const double c = (G.colwise().sum().transpose() - q).cwiseAbs().maxCoeff();
        return std::max(r, c);
    }

    // Damped Newton ascent on the equality dual; returns the residual.
    double newton_polish_equality(double tol, int max_steps, int& steps_used) {
        const Index n = C.rows(), m = C.cols();
        for (int s = 0; s < max_steps; ++s) {
            const Matrix G = plan();
            Vector rows = G.rowwise().sum();
            Vector cols = G.colwise().sum().transpose();
            double res = std::max((rows - p).cwiseAbs().maxCoeff(),
                                  (cols - q).cwiseAbs().maxCoeff());
            if (res < tol) return res;
            ++steps_used;
            Matrix H(n + m, n + m);
            H.setZero();
            H.topLeftCorner(n, n).diagonal() = rows;
            H.bottomRightCorner(m, m).diagonal() = cols;
            H.topRightCorner(n, m) = G;
            H.bottomLeftCorner(m, n) = G.transpose();
            H /= xi;
            const double ridge = 1e-13 * std::max(rows.maxCoeff(), cols.maxCoeff()) / xi + 1e-300;
            H.diagonal().array() += ridge;
            Vector grad(n + m);
            grad.head(n) = p - rows;
            grad.tail(m) = q - cols;
            Eigen::LDLT<Matrix> ldlt(H);
            if (ldlt.info() != Eigen::Success) return res;
            const Vector d = ldlt.solve(grad);
            const double g0 = grad.norm();
            double t = 1.0;
            bool accepted = false;
            for (int bt = 0; bt < 50; ++bt) {
                const Vector f2 = f + t * d.head(n);
                const Vector g2 = g + t * d.tail(m);
                Vector rows2 = Vector::Zero(n), cols2 = Vector::Zero(m);
                for (Index i = 0; i < n; ++i)
                    for (Index j = 0; j < m; ++j) {
                        const double e = std::exp(
                            std::min((f2[i] + g2[j] - C(i, j)) / xi, 690.0));
                        rows2[i] += e;
                        cols2[j] += e;
                    }
                Vector gr2(n + m);
                gr2.head(n) = p - rows2;
                gr2.tail(m) = q - cols2;
                if (gr2.norm() <= (1.0 - 0.25 * t) * g0) {
                    f = f2;
                    g = g2;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) return res;
        }
        return residual_equality();
    }
};

}  // namespace detail

/// Entropic primal partial transport: the reservoir-extended balanced
/// entropic problem with marginals (1_N, M - zeta) x (1_M, N - zeta) is
/// solved by log-domain Sinkhorn scaling. The weight is annealed from the
/// cost scale down to xi (halving steps, loose intermediate tolerance);
/// when plain scaling stalls above tol at the final weight and the problem
/// is small enough, a damped Newton ascent on the dual finishes the job.
/// Non-convergence within max_iter is reported, never silent.
inline SinkhornSolution sinkhorn_entropic_primal_opt(const CostMatrix& cost, double zeta,
                                                     double xi, int max_iter = 10000,
                                                     double tol = 1e-9) {
    const Index n = cost.rows(), m = cost.cols();
    if (n < 1 || m < 1) throw contract_error("sinkhorn_entropic_primal_opt: empty cost");
    const double zmax = static_cast<double>(std::min(n, m));
    if (!(zeta > 0.0) || zeta > zmax)
        throw parameter_error("sinkhorn_entropic_primal_opt: zeta must lie in (0, min(N, M)]");
    if (!(xi > 0.0)) throw parameter_error("sinkhorn_entropic_primal_opt: xi must be > 0");

    const double lambda = cost.values.maxCoeff() + 1.0;
    const double delta = 1.0;
    const bool src_res = static_cast<double>(m) - zeta > 0.0;  // reservoir rows/cols with
    const bool tgt_res = static_cast<double>(n) - zeta > 0.0;  // zero mass are dropped
    const Index ne = n + (src_res ? 1 : 0);
    const Index me = m + (tgt_res ? 1 : 0);

    detail::EntropicCore core;
    core.xi = xi;
    core.C.resize(ne, me);
    core.C.topLeftCorner(n, m) = cost.values;
    if (tgt_res) core.C.block(0, m, n, 1).setConstant(lambda);
    if (src_res) core.C.block(n, 0, 1, m).setConstant(lambda);
    if (src_res && tgt_res) core.C(n, m) = 2.0 * lambda + delta;
    core.p = Vector::Ones(ne);
    core.q = Vector::Ones(me);
    if (src_res) core.p[n] = static_cast<double>(m) - zeta;
    if (tgt_res) core.q[m] = static_cast<double>(n) - zeta;
    core.f = Vector::Zero(ne);
    core.g = Vector::Zero(me);

    // Annealing schedule down to the requested weight.
    std::vector<double> schedule;
    for (double x = std::max(core.C.maxCoeff(), xi); x > xi; x *= 0.5) schedule.push_back(x);
    schedule.push_back(xi);

    SinkhornSolution out;
    int budget = max_iter;
    double res = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < schedule.size(); ++s) {
        const bool last = s + 1 == schedule.size();
        core.xi = schedule[s];
        const double stage_tol = last ? tol : std::max(1e-6, tol);
        const int stage_cap = last ? budget : std::min(budget, 500);
        for (int it = 0; it < stage_cap; ++it) {
            core.sweep_equality();
            ++out.sweeps;
            --budget;
            res = core.residual_equality();
            if (last) out.dual_objectives.push_back(core.dual_equality());
            if (res < stage_tol) break;
        }
        if (budget <= 0) break;
    }
    core.xi = xi;
    if (res >= tol && ne + me <= 1024) {
        int steps = 0;
        res = core.newton_polish_equality(tol, 100, steps);
        out.sweeps += steps;
    }
    out.converged = res < tol;
    out.residual = res;

    const Matrix G = core.plan();
    out.plan.n_source = n;
    out.plan.n_target = m;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) {
            if (G(i, j) >= 1e-15) {
                out.plan.entries.push_back({i, j, G(i, j)});
                out.cost += cost.values(i, j) * G(i, j);
            }
        }
    }
    return out;
}

/// Entropic partial transport with the linear mass penalty lambda: minimizes
/// sum (c - 2 lambda) gamma + xi sum gamma ln gamma over plans whose row and
/// column sums stay at most one. Solved by clamped log-domain scaling
/// (potentials are capped at zero, matching the inequality constraints).
inline SinkhornSolution sinkhorn_entropic_opt_penalized(const CostMatrix& cost, double lambda,
                                                        double xi, int max_iter = 10000,
                                                        double tol = 1e-9) {
    const Index n = cost.rows(), m = cost.cols();
    if (n < 1 || m < 1) throw contract_error("sinkhorn_entropic_opt_penalized: empty cost");
    if (!(xi > 0.0)) throw parameter_error("sinkhorn_entropic_opt_penalized: xi must be > 0");
    if (!(lambda >= 0.0))
        throw parameter_error("sinkhorn_entropic_opt_penalized: lambda must be >= 0");

    const Matrix Cp = cost.values.array() - 2.0 * lambda;
    Vector f = Vector::Zero(n), g = Vector::Zero(m);
    SinkhornSolution out;

    auto plan_at = [&](const Vector& fv, const Vector& gv) {
        Matrix G(n, m);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < m; ++j)
                G(i, j) = std::exp(std::min((fv[i] + gv[j] - Cp(i, j)) / xi - 1.0, 690.0));
        return G;
    };
    auto dual_at = [&](const Matrix& G) { return f.sum() + g.sum() - xi * G.sum(); };

    double res = std::numeric_limits<double>::infinity();
    Vector mC(m), mCt(n);
    for (int it = 0; it < max_iter; ++it) {
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < m; ++j) mC[j] = -Cp(i, j);
            f[i] = std::min(0.0, -xi * (detail::lse_pair(g, mC, xi) - 1.0));
        }
        for (Index j = 0; j < m; ++j) {
            for (Index i = 0; i < n; ++i) mCt[i] = -Cp(i, j);
            g[j] = std::min(0.0, -xi * (detail::lse_pair(f, mCt, xi) - 1.0));
        }
        ++out.sweeps;
        const Matrix G = plan_at(f, g);
        out.dual_objectives.push_back(dual_at(G));
        const Vector rows = G.rowwise().sum();
        const Vector cols = G.colwise().sum().transpose();
        double worst = 0.0;
        for (Index i = 0; i < n; ++i) {
            worst = std::max(worst, rows[i] - 1.0);                      // feasibility
            if (f[i] < -1e-13) worst = std::max(worst, std::abs(rows[i] - 1.0));  // activity
        }
        for (Index j = 0; j < m; ++j) {
            worst = std::max(worst, cols[j] - 1.0);
            if (g[j] < -1e-13) worst = std::max(worst, std::abs(cols[j] - 1.0));
        }
        res = worst;
        if (res < tol) break;
    }
    out.converged = res < tol;
    out.residual = res;

    const Matrix G = plan_at(f, g);
    out.plan.n_source = n;
    out.plan.n_target = m;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < m; ++j) {
            if (G(i, j) >= 1e-15) {
                out.plan.entries.push_back({i, j, G(i, j)});
                out.cost += cost.values(i, j) * G(i, j);
            }
        }
    }
    return out;
}

}  // namespace partreg
