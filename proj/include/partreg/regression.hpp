#pragma once

#include <Eigen/QR>
#include <Eigen/SVD>

#include <vector>

#include "partreg/types.hpp"

namespace partreg {

/// Matched rows used by the parameter-update step: source points, their
/// current target estimates, and the matching kernel-matrix rows.
struct CorrespondenceSet {
    Matrix X_sub;     // N_sub x D
    Matrix Yhat_sub;  // N_sub x D
    Matrix Phi_sub;   // N_sub x K
    std::vector<Index> indices;

    void validate() const {
        if (X_sub.rows() < 1) throw contract_error("correspondence set is empty");
        if (Yhat_sub.rows() != X_sub.rows() ||
            (Phi_sub.size() > 0 && Phi_sub.rows() != X_sub.rows()))
            throw contract_error("correspondence blocks disagree on row count");
    }
};

struct RotationFit {
    Matrix rotation;
    bool degenerate = false;  // ambiguous optimum (rank-deficient cross matrix)
};

/// Least-squares rotation for centered, pre-scaled inputs: minimizes
/// |Xc_scaled * R - Yc|_F over rotations. The SVD of Xc_scaled^T * Yc gives
/// R, with the last singular direction flipped when needed to keep
/// det R = +1. Singular-vector signs are normalized (largest entry of each
/// left vector positive) so repeated runs agree bit for bit.
inline RotationFit fit_rotation(const Matrix& Xc_scaled, const Matrix& Yc) {
    if (Xc_scaled.rows() != Yc.rows() || Xc_scaled.cols() != Yc.cols())
        throw contract_error("fit_rotation: shape mismatch");
    const Index d = Xc_scaled.cols();
    const Matrix H = Xc_scaled.transpose() * Yc;
    Eigen::JacobiSVD<Matrix> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix U = svd.matrixU();
    Matrix V = svd.matrixV();
    for (Index c = 0; c < d; ++c) {
        Index imax = 0;
        U.col(c).cwiseAbs().maxCoeff(&imax);
        if (U(imax, c) < 0.0) {
            U.col(c) *= -1.0;
            V.col(c) *= -1.0;
        }
    }
    Vector corr = Vector::Ones(d);
    corr[d - 1] = (V * U.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    RotationFit fit;
    fit.rotation = U * corr.asDiagonal() * V.transpose();
    const Vector sv = svd.singularValues();
    fit.degenerate = sv[d - 1] < 1e-10 * std::max(sv[0], 1e-300);
    return fit;
}

struct ScalingFit {
    Vector scale;             // positive diagonal
    bool degenerate = false;  // some axis had no extent and was pinned to 1
};

enum class ScalingMode { fixed_identity, uniform, per_axis };
enum class UniformScaleRule { covariance_ratio, axis_mean };

/// Per-axis least-squares scaling for centered inputs and a fixed rotation:
/// s_d = <Xc[:,d], (Yc R^T)[:,d]> / |Xc[:,d]|^2. Axes without extent (or a
/// non-positive estimate) are pinned to 1 and flagged. The uniform variants
/// return s*I with s either sqrt of the total variance ratio (default) or
/// the mean of the per-axis factors.
inline ScalingFit fit_scaling(const Matrix& Xc, const Matrix& Yc, const Matrix& R,
                              bool uniform = false,
                              UniformScaleRule rule = UniformScaleRule::covariance_ratio) {
    if (Xc.rows() != Yc.rows() || Xc.cols() != Yc.cols())
        throw contract_error("fit_scaling: shape mismatch");
    const Index d = Xc.cols();
    ScalingFit fit;
    fit.scale = Vector::Ones(d);
    if (uniform && rule == UniformScaleRule::covariance_ratio) {
        const double den = Xc.squaredNorm();
        if (den <= 0.0) {
            fit.degenerate = true;
            return fit;
        }
        const double s = std::sqrt(Yc.squaredNorm() / den);
        if (!(s > 0.0)) {
            fit.degenerate = true;
            return fit;
        }
        fit.scale.setConstant(s);
        return fit;
    }
    const Matrix YcRt = Yc * R.transpose();
    for (Index k = 0; k < d; ++k) {
        const double den = Xc.col(k).squaredNorm();
        if (den <= 0.0) {
            fit.degenerate = true;
            continue;
        }
        const double s = Xc.col(k).dot(YcRt.col(k)) / den;
        if (s > 0.0) fit.scale[k] = s;
        else fit.degenerate = true;
    }
    if (uniform) fit.scale.setConstant(fit.scale.mean());
    return fit;
}

/// beta = mean over rows of (yhat' - x * S * R).
inline Vector fit_translation(const Matrix& Yhat_prime, const Matrix& X_sub, const Vector& S,
                              const Matrix& R) {
    if (Yhat_prime.rows() != X_sub.rows() || Yhat_prime.cols() != X_sub.cols())
        throw contract_error("fit_translation: shape mismatch");
    const Matrix resid = Yhat_prime - X_sub * S.asDiagonal() * R;
    return resid.colwise().mean().transpose();
}

struct RigidFit {
    Matrix rotation;
    Vector scale;
    Vector beta;
    bool degenerate = false;
    int inner_iterations = 0;
    std::vector<double> inner_objectives;  // |Xc S R - Yc|^2 after each R/S pass
};

struct RigidFitOptions {
    ScalingMode scaling = ScalingMode::per_axis;
    UniformScaleRule uniform_rule = UniformScaleRule::covariance_ratio;
    int max_inner = 50;
    double tol = 1e-10;  // Frobenius change of (R, S) across passes
};

/// Full rigid update for a correspondence set: strips the kernel part
/// (Yhat' = Yhat_sub - Phi_sub * alpha), centers, alternates rotation and
/// scaling solves until both settle, then recovers the translation from
/// the uncentered residuals. Uniform and fixed-identity modes need a
/// single rotation solve.
inline RigidFit fit_rigid(const CorrespondenceSet& corr, const Matrix& alpha,
                          const RigidFitOptions& opts = {}) {
    corr.validate();
    const Index d = corr.X_sub.cols();
    Matrix Yp = corr.Yhat_sub;
    if (alpha.size() > 0 && corr.Phi_sub.size() > 0) Yp -= corr.Phi_sub * alpha;

    const RowVector xbar = corr.X_sub.colwise().mean();
    const RowVector ybar = Yp.colwise().mean();
    const Matrix Xc = corr.X_sub.rowwise() - xbar;
    const Matrix Yc = Yp.rowwise() - ybar;

    RigidFit fit;
    fit.scale = Vector::Ones(d);

    if (opts.scaling == ScalingMode::per_axis) {
        Matrix R_prev = Matrix::Identity(d, d);
        Vector S_prev = fit.scale;
        for (int it = 0; it < opts.max_inner; ++it) {
            const RotationFit rf = fit_rotation(Xc * fit.scale.asDiagonal(), Yc);
            fit.degenerate |= rf.degenerate;
            fit.rotation = rf.rotation;
            const ScalingFit sf = fit_scaling(Xc, Yc, fit.rotation, false);
            fit.degenerate |= sf.degenerate;
            fit.scale = sf.scale;
            fit.inner_iterations = it + 1;
            fit.inner_objectives.push_back(
                (Xc * fit.scale.asDiagonal() * fit.rotation - Yc).squaredNorm());
            const double change =
                (fit.rotation - R_prev).norm() + (fit.scale - S_prev).norm();
            if (change < opts.tol) break;
            R_prev = fit.rotation;
            S_prev = fit.scale;
        }
    } else {
        const RotationFit rf = fit_rotation(Xc, Yc);
        fit.degenerate |= rf.degenerate;
        fit.rotation = rf.rotation;
        fit.inner_iterations = 1;
        if (opts.scaling == ScalingMode::uniform) {
            const ScalingFit sf = fit_scaling(Xc, Yc, fit.rotation, true, opts.uniform_rule);
            fit.degenerate |= sf.degenerate;
            fit.scale = sf.scale;
        }
        fit.inner_objectives.push_back(
            (Xc * fit.scale.asDiagonal() * fit.rotation - Yc).squaredNorm());
    }

    fit.beta = fit_translation(Yp, corr.X_sub, fit.scale, fit.rotation);
    return fit;
}

/// Ridge solution alpha = (Phi^T Phi + eps I)^{-1} Phi^T Y'', computed via
/// a positive-definite factorization.
inline Matrix fit_rbf_alpha(const Matrix& Phi_sub, const Matrix& Yhat_dprime, double epsilon) {
    if (!(epsilon > 0.0)) throw parameter_error("fit_rbf_alpha: epsilon must be > 0");
    if (Phi_sub.rows() != Yhat_dprime.rows())
        throw contract_error("fit_rbf_alpha: row mismatch");
    const Index k = Phi_sub.cols();
    Matrix normal = Phi_sub.transpose() * Phi_sub;
    normal.diagonal().array() += epsilon;
    const Eigen::LLT<Matrix> llt(normal);
    if (llt.info() != Eigen::Success)
        throw numeric_error("fit_rbf_alpha: normal equations not positive definite");
    return llt.solve(Phi_sub.transpose() * Yhat_dprime);
}

struct TpsFit {
    Matrix alpha;  // N x D kernel coefficients, X_bar^T alpha = 0
    Matrix Bbar;   // (D+1) x D, first row is beta^T, remainder is B
};

/// Thin-plate regression through the null-space trick: QR-decompose
/// X_bar = [1, X], restrict the kernel system to the orthogonal complement
/// of the affine columns, and back-substitute for the affine part.
///   alpha = Q2 (Q2^T (Phi + eps I) Q2)^{-1} Q2^T Y
///   Bbar  = Rfac^{-1} Q1^T (Y - (Phi + eps I) alpha)
inline TpsFit fit_tps(const Matrix& X, const Matrix& Yhat, const Matrix& Phi, double epsilon) {
    const Index n = X.rows(), d = X.cols();
    if (Yhat.rows() != n || Phi.rows() != n || Phi.cols() != n)
        throw contract_error("fit_tps: shape mismatch (Phi must be square over X)");
    if (!(epsilon >= 0.0)) throw parameter_error("fit_tps: epsilon must be >= 0");
    if (n < d + 2) throw contract_error("fit_tps: needs at least D + 2 points");

    Matrix Xbar(n, d + 1);
    Xbar.col(0).setOnes();
    Xbar.rightCols(d) = X;

    {
        const Eigen::ColPivHouseholderQR<Matrix> rank_check(Xbar);
        if (rank_check.rank() < d + 1)
            throw numeric_error(
                "fit_tps: affine part of the cloud is rank deficient "
                "(collinear or coplanar points)");
    }

    const Eigen::HouseholderQR<Matrix> qr(Xbar);
    const Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
    const Matrix Q1 = Q.leftCols(d + 1);
    const Matrix Q2 = Q.rightCols(n - d - 1);
    const Matrix Rfac = qr.matrixQR().topLeftCorner(d + 1, d + 1).triangularView<Eigen::Upper>();

    Matrix K = Phi;
    K.diagonal().array() += epsilon;

    const Matrix inner = Q2.transpose() * K * Q2;
    const Eigen::PartialPivLU<Matrix> lu(inner);
    TpsFit fit;
    fit.alpha = Q2 * lu.solve(Q2.transpose() * Yhat);
    fit.Bbar = Rfac.triangularView<Eigen::Upper>().solve(
        Q1.transpose() * (Yhat - K * fit.alpha));
    return fit;
}

}  // namespace partreg
