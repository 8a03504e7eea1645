#pragma once

#include "partreg/kernels.hpp"
#include "partreg/types.hpp"

namespace partreg {

/// Evaluates the deformation model at every row of X:
///   Y[n,:] = sum_k alpha[k,:] * phi(x_n, c_k) + X[n,:] * L + beta^T.
inline Matrix apply_deformation(const DeformationModel& model, const Matrix& X) {
    const Index d = model.dim();
    if (X.cols() != d) throw contract_error("apply_deformation: dimension mismatch");
    if (model.alpha.rows() != model.control.rows())
        throw contract_error("apply_deformation: alpha/control row mismatch");

    Matrix out = X * model.linear_matrix();
    out.rowwise() += model.beta.transpose();
    if (model.control.rows() > 0 && model.alpha.size() > 0 &&
        model.alpha.cwiseAbs().maxCoeff() > 0.0) {
        if (model.control.cols() != d)
            throw contract_error("apply_deformation: control dimension mismatch");
        out += kernel_matrix(X, model.control, model.kernel).values * model.alpha;
    }
    return out;
}

inline Matrix apply_deformation(const DeformationModel& model, const PointCloud& X) {
    return apply_deformation(model, X.points);
}

/// Pairwise cost matrix c(a_n, b_m) >= 0; the default ground cost is the
/// squared Euclidean distance.
struct CostMatrix {
    Matrix values;  // N x M

    CostMatrix() = default;
    explicit CostMatrix(Matrix v) : values(std::move(v)) {
        if (!values.allFinite() || (values.array() < 0.0).any())
            throw contract_error("cost matrix must be finite and non-negative");
    }

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
};

inline CostMatrix squared_distance_cost(const Matrix& A, const Matrix& B) {
    if (A.cols() != B.cols()) throw contract_error("cost: dimension mismatch");
    Matrix c(A.rows(), B.rows());
    for (Index i = 0; i < A.rows(); ++i)
        for (Index j = 0; j < B.rows(); ++j)
            c(i, j) = (A.row(i) - B.row(j)).squaredNorm();
    return CostMatrix(std::move(c));
}

}  // namespace partreg
