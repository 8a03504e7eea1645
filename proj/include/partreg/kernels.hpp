#pragma once

#include <cmath>

#include "partreg/types.hpp"

namespace partreg {

/// Dense matrix of kernel evaluations Phi[n,k] = phi(x_n, c_k).
struct KernelMatrix {
    Matrix values;  // N x K
    KernelSpec spec;
};

/// exp(-|c-x|^2 / sigma2).
inline double gaussian_kernel(const Eigen::Ref<const Vector>& x,
                              const Eigen::Ref<const Vector>& c, double sigma2) {
    if (!(sigma2 > 0.0)) throw parameter_error("gaussian_kernel: sigma2 must be > 0");
    if (x.size() != c.size()) throw contract_error("gaussian_kernel: dimension mismatch");
    return std::exp(-(c - x).squaredNorm() / sigma2);
}

/// Thin-plate-spline radial kernel. The value at r = 0 is the removable
/// limit 0 for every dimension.
///   D = 2:  r^2 ln r
///   D = 3:  r
///   D >= 4: r^2 ln(r^2)  (substitute for the singular radial power)
inline double tps_kernel(const Eigen::Ref<const Vector>& x,
                         const Eigen::Ref<const Vector>& c, Index dim) {
    if (dim < 1) throw parameter_error("tps_kernel: dim must be >= 1");
    if (x.size() != c.size()) throw contract_error("tps_kernel: dimension mismatch");
    const double r2 = (c - x).squaredNorm();
    if (r2 == 0.0) return 0.0;
    switch (dim) {
        case 2: return 0.5 * r2 * std::log(r2);  // == r^2 ln r
        case 3: return std::sqrt(r2);
        default: return r2 * std::log(r2);
    }
}

inline double kernel_value(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                           const Eigen::Ref<const Vector>& c) {
    return spec.kind == KernelSpec::Kind::gaussian ? gaussian_kernel(x, c, spec.sigma2)
                                                   : tps_kernel(x, c, spec.dim);
}

/// Assembles Phi[n,k] = phi(x_n, c_k) for all rows of X against all rows
/// of C. Evaluation order is fixed, so results are bit-identical across runs.
inline KernelMatrix kernel_matrix(const Matrix& X, const Matrix& C, const KernelSpec& spec) {
    if (X.cols() != C.cols()) throw contract_error("kernel_matrix: dimension mismatch");
    const Index n = X.rows(), k = C.rows();
    KernelMatrix km;
    km.spec = spec;
    km.values.resize(n, k);
    if (spec.kind == KernelSpec::Kind::gaussian) {
        if (!(spec.sigma2 > 0.0)) throw parameter_error("kernel_matrix: sigma2 must be > 0");
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < k; ++j)
                km.values(i, j) = std::exp(-(C.row(j) - X.row(i)).squaredNorm() / spec.sigma2);
    } else {
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < k; ++j) {
                const double r2 = (C.row(j) - X.row(i)).squaredNorm();
                double v = 0.0;
                if (r2 > 0.0) {
                    if (spec.dim == 2) v = 0.5 * r2 * std::log(r2);
                    else if (spec.dim == 3) v = std::sqrt(r2);
                    else v = r2 * std::log(r2);
                }
                km.values(i, j) = v;
            }
        }
    }
    return km;
}

inline KernelMatrix kernel_matrix(const PointCloud& X, const Matrix& C, const KernelSpec& spec) {
    return kernel_matrix(X.points, C, spec);
}

}  // namespace partreg
