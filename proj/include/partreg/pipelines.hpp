#pragma once

#include <chrono>
#include <cmath>
#include <optional>

#include "partreg/deform.hpp"
#include "partreg/kernels.hpp"
#include "partreg/regression.hpp"
#include "partreg/rng.hpp"
#include "partreg/transport/exact.hpp"
#include "partreg/transport/sinkhorn.hpp"
#include "partreg/transport/sliced.hpp"
#include "partreg/types.hpp"

namespace partreg {

enum class Method {
    opt_rbf,
    opt_tps,
    sopt_rbf,
    sopt_tps,
    ot_rbf,
    ot_tps,
    sot_rbf,
    sot_tps,
    tps_rpm_new,
};

inline bool method_is_sliced(Method m) {
    return m == Method::sopt_rbf || m == Method::sopt_tps || m == Method::sot_rbf ||
           m == Method::sot_tps;
}

inline bool method_is_tps(Method m) {
    return m == Method::opt_tps || m == Method::sopt_tps || m == Method::ot_tps ||
           m == Method::sot_tps || m == Method::tps_rpm_new;
}

inline bool method_is_balanced(Method m) {
    return m == Method::ot_rbf || m == Method::ot_tps || m == Method::sot_rbf ||
           m == Method::sot_tps;
}

struct RegistrationConfig {
    Method method = Method::sopt_tps;
    Index zeta = 0;               // clean-point prior (transported mass)
    int max_iterations = 100;     // T
    int rigid_iterations = 20;    // rigid-only warmup length
    KernelSpec kernel = KernelSpec::gaussian(1.0);  // RBF methods only
    double epsilon = 1e-2;        // ridge weight (RBF) / bending weight (TPS)
    Index projections = 100;      // sliced methods
    double lambda0 = 0.0;         // sliced methods; 0 selects the default rule
    double xi = 0.0;              // entropic weight; 0 selects 0.01 * std(Y)
    std::uint64_t seed = 0;
    ScalingMode scaling = ScalingMode::fixed_identity;
    UniformScaleRule uniform_rule = UniformScaleRule::covariance_ratio;
    double convergence_tol = 0.0;  // mean displacement; 0 selects 1e-6 * diameter
    int patience = 3;
    std::optional<Matrix> control;      // RBF control points; default is X
    bool tps_restrict_to_domain = false;  // fit TPS on matched rows only
    int sinkhorn_max_iter = 10000;
    double sinkhorn_tol = 1e-9;
};

namespace detail {

inline double bounding_diameter(const Matrix& A, const Matrix& B) {
    const Index d = A.cols();
    Vector lo(d), hi(d);
    for (Index k = 0; k < d; ++k) {
        lo[k] = std::min(A.col(k).minCoeff(), B.col(k).minCoeff());
        hi[k] = std::max(A.col(k).maxCoeff(), B.col(k).maxCoeff());
    }
    return (hi - lo).norm();
}

}  // namespace detail

/// Runs the configured registration method and reports the fitted model
/// plus per-iteration diagnostics. Identical inputs (including the seed)
/// produce bit-identical models.
inline RegistrationReport run_registration(const PointCloud& X, const PointCloud& Y,
                                           const RegistrationConfig& config) {
    const Index n = X.size(), m = Y.size(), d = X.dim();
    if (Y.dim() != d) throw contract_error("run_registration: dimension mismatch");
    if (config.zeta < 1 || config.zeta > std::min(n, m))
        throw parameter_error("run_registration: zeta must lie in [1, min(N, M)]");
    if (config.max_iterations < 1)
        throw parameter_error("run_registration: max_iterations must be >= 1");
    if (config.rigid_iterations > config.max_iterations)
        throw parameter_error("run_registration: rigid_iterations must not exceed T");
    const bool tps = method_is_tps(config.method);
    if (!tps && !(config.epsilon > 0.0))
        throw parameter_error("run_registration: RBF methods require epsilon > 0");
    if (!(config.epsilon >= 0.0))
        throw parameter_error("run_registration: epsilon must be >= 0");

    const bool sliced = method_is_sliced(config.method);
    const bool balanced = method_is_balanced(config.method);

    Matrix control = tps ? X.points : config.control.value_or(X.points);
    const KernelSpec kernel = tps ? KernelSpec::tps(d) : config.kernel;
    const Matrix Phi_full = kernel_matrix(X.points, control, kernel).values;
    Matrix Phi_eval = Phi_full;  // phi(X, current control); re-anchored fits replace it

    Matrix R = Matrix::Identity(d, d);
    Vector S = Vector::Ones(d);
    Vector beta = Vector::Zero(d);
    Matrix alpha = Matrix::Zero(control.rows(), d);
    Matrix B = S.asDiagonal() * R;  // TPS-path linear part
    bool general_linear = false;    // true once a TPS fit replaced (R, S)

    const double diameter = detail::bounding_diameter(X.points, Y.points);
    const double conv_tol =
        config.convergence_tol > 0.0 ? config.convergence_tol : 1e-6 * diameter;
    double lambda = config.lambda0;
    if (sliced && !(lambda > 0.0)) {
        const double drift =
            (Y.points.colwise().mean() - X.points.colwise().mean()).squaredNorm();
        lambda = std::max(2.0 * drift, 1e-6 * diameter * diameter);
    }
    // Balanced sliced baselines: a penalty beyond any attainable projected
    // gap forces every point to match.
    const bool lambda_adaptive = config.method == Method::sopt_rbf ||
                                 config.method == Method::sopt_tps;
    if (config.method == Method::sot_rbf || config.method == Method::sot_tps)
        lambda = 1e30;

    double xi_eff = config.xi;
    if (config.method == Method::tps_rpm_new && !(xi_eff > 0.0)) {
        const RowVector mu = Y.points.colwise().mean();
        const double var = (Y.points.rowwise() - mu).squaredNorm() /
                           static_cast<double>(m * d);
        xi_eff = 0.01 * std::sqrt(var);
    }

    Rng seed_stream(config.seed);
    RegistrationReport report;
    bool warned_sinkhorn = false;
    bool nonrigid_engaged = false;
    bool have_prev_linear = false;
    Matrix R_prev;
    Vector S_prev, beta_prev;
    Matrix B_prev;
    Matrix Yhat_model_prev;
    int calm_streak = 0;

    RigidFitOptions rigid_opts;
    rigid_opts.scaling = config.scaling;
    rigid_opts.uniform_rule = config.uniform_rule;

    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();

        Matrix Yhat = X.points * (tps ? B : Matrix(S.asDiagonal() * R));
        Yhat.rowwise() += beta.transpose();
        if (alpha.cwiseAbs().maxCoeff() > 0.0) Yhat += Phi.values * alpha;
        const Matrix Yhat_model = Yhat;

        // Step 1: correspondence.
        std::vector<Index> domain;
        double transport_cost = 0.0;
        if (sliced) {
            const SliceDirectionSet dirs =
                sample_directions(config.projections, d, seed_stream.next_u64());
            std::vector<char> in_domain(static_cast<std::size_t>(n), 0);
            double cost_acc = 0.0;
            for (Index s = 0; s < dirs.directions.rows(); ++s) {
                const Vector theta = dirs.directions.row(s).transpose();
                const SlicedStepResult step = sliced_step(Yhat, Y.points, theta, lambda);
                for (Index idx : step.matched_source) in_domain[static_cast<std::size_t>(idx)] = 1;
                cost_acc += step.opt_cost;
                if (lambda_adaptive)
                    lambda = adapt_lambda(lambda, step.matched_count, config.zeta);
            }
            transport_cost = cost_acc / static_cast<double>(dirs.directions.rows());
            for (Index i = 0; i < n; ++i)
                if (in_domain[static_cast<std::size_t>(i)]) domain.push_back(i);
        } else {
            const CostMatrix cost = squared_distance_cost(Yhat, Y.points);
            TransportPlan plan;
            if (balanced) {
                OtSolution sol = solve_balanced_ot(cost);
                plan = std::move(sol.plan);
                transport_cost = sol.cost;
            } else if (config.method == Method::tps_rpm_new) {
                SinkhornSolution sol =
                    sinkhorn_entropic_primal_opt(cost, static_cast<double>(config.zeta),
                                                 xi_eff, config.sinkhorn_max_iter,
                                                 config.sinkhorn_tol);
                if (!sol.converged && !warned_sinkhorn) {
                    report.warnings.push_back(
                        "sinkhorn step did not reach tolerance; continuing with the "
                        "best iterate");
                    warned_sinkhorn = true;
                }
                plan = std::move(sol.plan);
                transport_cost = sol.cost;
            } else {
                PrimalOptSolution sol =
                    solve_primal_opt(cost, static_cast<double>(config.zeta));
                plan = std::move(sol.plan);
                transport_cost = sol.cost;
            }
            const BarycentricUpdate upd = barycentric_update(plan, Y.points);
            domain = upd.domain;
            for (Index k = 0; k < upd.rows.rows(); ++k)
                Yhat.row(domain[static_cast<std::size_t>(k)]) = upd.rows.row(k);
        }

        // Step 2: parameter update on the matched subset.
        const Index n_sub = static_cast<Index>(domain.size());
        if (n_sub >= d + 1) {
            // Gate for the nonrigid update: enough rigid iterations and the
            // linear parameters have settled. Once engaged it stays engaged.
            if (!nonrigid_engaged && iter > config.rigid_iterations && have_prev_linear) {
                double delta;
                if (general_linear)
                    delta = (B - B_prev).norm() + (beta - beta_prev).norm();
                else
                    delta = (R - R_prev).norm() + (S - S_prev).norm() +
                            (beta - beta_prev).norm();
                if (delta < 10.0 * conv_tol) nonrigid_engaged = true;
            }
            R_prev = R; S_prev = S; beta_prev = beta; B_prev = B;
            have_prev_linear = true;

            CorrespondenceSet corr;
            corr.indices = domain;
            corr.X_sub.resize(n_sub, d);
            corr.Yhat_sub.resize(n_sub, d);
            corr.Phi_sub.resize(n_sub, K);
            for (Index k = 0; k < n_sub; ++k) {
                const Index i = domain[static_cast<std::size_t>(k)];
                corr.X_sub.row(k) = X.points.row(i);
                corr.Yhat_sub.row(k) = Yhat.row(i);
                corr.Phi_sub.row(k) = Phi.values.row(i);
            }

            const bool fit_nonrigid =
                config.method == Method::tps_rpm_new || nonrigid_engaged;
            if (!tps) {
                const RigidFit rf = fit_rigid(corr, alpha, rigid_opts);
                R = rf.rotation; S = rf.scale; beta = rf.beta;
                if (fit_nonrigid) {
                    Matrix Ydp = corr.Yhat_sub - corr.X_sub * S.asDiagonal() * R;
                    Ydp.rowwise() -= beta.transpose();
                    alpha = fit_rbf_alpha(corr.Phi_sub, Ydp, config.epsilon);
                }
            } else if (!fit_nonrigid) {
                const RigidFit rf = fit_rigid(corr, alpha, rigid_opts);
                R = rf.rotation; S = rf.scale; beta = rf.beta;
                B = S.asDiagonal() * R;
            } else if (config.tps_restrict_to_domain && n_sub >= d + 2) {
                Matrix Phi_dd(n_sub, n_sub);
                for (Index a = 0; a < n_sub; ++a)
                    for (Index b = 0; b < n_sub; ++b)
                        Phi_dd(a, b) = Phi.values(domain[static_cast<std::size_t>(a)],
                                                  domain[static_cast<std::size_t>(b)]);
                const TpsFit tf = fit_tps(corr.X_sub, corr.Yhat_sub, Phi_dd, config.epsilon);
                // The kernel expansion is re-anchored on the matched subset.
                control = corr.X_sub;
                alpha = tf.alpha;
                beta = tf.Bbar.row(0).transpose();
                B = tf.Bbar.bottomRows(d);
                general_linear = true;
            } else {
                const TpsFit tf = fit_tps(X.points, Yhat, Phi.values, config.epsilon);
                alpha = tf.alpha;
                beta = tf.Bbar.row(0).transpose();
                B = tf.Bbar.bottomRows(d);
                general_linear = true;
            }
        } else {
            report.warnings.push_back("iteration " + std::to_string(iter) +
                                      ": matched set too small, parameter update skipped");
        }

        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.per_iter.push_back(
            {iter, transport_cost, n_sub, sliced ? lambda : 0.0, seconds});

        if (Yhat_model_prev.size() > 0) {
            const double disp =
                (Yhat_model - Yhat_model_prev).rowwise().norm().mean();
            calm_streak = disp < conv_tol ? calm_streak + 1 : 0;
            if (calm_streak >= config.patience) {
                report.converged_at = iter;
                break;
            }
        }
        Yhat_model_prev = Yhat_model;
    }

    DeformationModel model;
    model.kernel = kernel;
    if (config.tps_restrict_to_domain && general_linear) {
        model.control = control;
    } else {
        model.control = tps ? X.points : control;
    }
    model.alpha = alpha;
    model.beta = beta;
    if (tps && general_linear) {
        model.linear = GeneralLinear{B};
    } else if (tps) {
        model.linear = GeneralLinear{B};  // rigid phase result, stored as B = S R
    } else {
        model.linear = RotationScaling{R, S};
    }
    report.model = std::move(model);
    return report;
}

}  // namespace partreg
