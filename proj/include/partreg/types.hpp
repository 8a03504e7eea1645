#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace partreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Violated call contract (bad dimensions, unsorted input, ...).
struct contract_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Out-of-range or otherwise unusable parameter value.
struct parameter_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Malformed input data (files, point sets).
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A numerical procedure failed to produce a certified result.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class PointLabel : std::uint8_t { clean = 0, noise = 1 };

namespace detail {

inline void require(bool cond, const char* msg) {
    if (!cond) throw contract_error(msg);
}

inline bool all_finite(const Matrix& m) {
    return m.allFinite();
}

}  // namespace detail

/// An ordered set of D-dimensional points, stored one point per row.
///
/// Optional per-point labels distinguish clean points from injected noise,
/// and `truth_map` records a ground-truth partial bijection into a paired
/// cloud (index into the other cloud, or -1 when the point has no partner).
struct PointCloud {
    Matrix points;                                 // N x D
    std::vector<PointLabel> labels;                // empty or size N
    std::vector<Index> truth_map;                  // empty or size N, -1 = unmapped

    PointCloud() = default;
    explicit PointCloud(Matrix pts) : points(std::move(pts)) { validate(); }

    Index size() const { return points.rows(); }
    Index dim() const { return points.cols(); }

    bool has_labels() const { return !labels.empty(); }
    bool has_truth() const { return !truth_map.empty(); }

    /// Indices of points labeled clean (all points when unlabeled).
    std::vector<Index> clean_indices() const {
        std::vector<Index> idx;
        idx.reserve(static_cast<std::size_t>(size()));
        for (Index n = 0; n < size(); ++n) {
            if (labels.empty() || labels[static_cast<std::size_t>(n)] == PointLabel::clean)
                idx.push_back(n);
        }
        return idx;
    }

    /// Checks the structural invariants; throws on violation.
    ///
    /// Coordinates must be finite and points pairwise distinct. Duplicates
    /// are rejected rather than perturbed so that downstream solvers see
    /// exactly the data they were given.
    void validate() const {
        if (points.rows() < 1 || points.cols() < 1)
            throw data_error("point cloud must have at least one point and one dimension");
        if (!detail::all_finite(points))
            throw data_error("point cloud contains non-finite coordinates");
        if (!labels.empty() && static_cast<Index>(labels.size()) != points.rows())
            throw data_error("label vector length does not match point count");
        if (!truth_map.empty() && static_cast<Index>(truth_map.size()) != points.rows())
            throw data_error("truth map length does not match point count");

        // Duplicate detection via lexicographic sort of row indices.
        const Index n = points.rows();
        std::vector<Index> order(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        const Matrix& p = points;
        std::sort(order.begin(), order.end(), [&p](Index a, Index b) {
            for (Index d = 0; d < p.cols(); ++d) {
                if (p(a, d) != p(b, d)) return p(a, d) < p(b, d);
            }
            return false;
        });
        for (Index i = 0; i + 1 < n; ++i) {
            if (p.row(order[static_cast<std::size_t>(i)]) ==
                p.row(order[static_cast<std::size_t>(i + 1)]))
                throw data_error("point cloud contains duplicate points");
        }

        if (!truth_map.empty()) {
            std::vector<Index> tgt;
            for (Index m : truth_map)
                if (m >= 0) tgt.push_back(m);
            std::sort(tgt.begin(), tgt.end());
            if (std::adjacent_find(tgt.begin(), tgt.end()) != tgt.end())
                throw data_error("truth map is not injective");
        }
    }
};

/// Kernel family used by the deformation model.
struct KernelSpec {
    enum class Kind { gaussian, tps };
    Kind kind = Kind::gaussian;
    double sigma2 = 1.0;  // gaussian width parameter, > 0
    Index dim = 3;        // ambient dimension for the tps kernel

    static KernelSpec gaussian(double sigma2) {
        if (!(sigma2 > 0.0)) throw parameter_error("gaussian kernel requires sigma2 > 0");
        KernelSpec s;
        s.kind = Kind::gaussian;
        s.sigma2 = sigma2;
        return s;
    }
    static KernelSpec tps(Index dim) {
        if (dim < 1) throw parameter_error("tps kernel requires dim >= 1");
        KernelSpec s;
        s.kind = Kind::tps;
        s.dim = dim;
        return s;
    }
};

/// Linear part restricted to rotation-plus-positive-scaling.
struct RotationScaling {
    Matrix rotation;   // D x D, orthogonal with det +1
    Vector scale;      // D, positive diagonal of S
};

/// Unrestricted linear part.
struct GeneralLinear {
    Matrix matrix;  // D x D
};

/// Parametric deformation: kernel expansion over control points plus a
/// linear map and translation. Points are row vectors throughout, so the
/// model evaluates rowwise as
///   y = sum_k alpha[k] * phi(x, c[k]) + x * L + beta^T,
/// with L = S * R for the rotation-scaling form and L = B otherwise.
struct DeformationModel {
    KernelSpec kernel;
    Matrix control;   // K x D
    Matrix alpha;     // K x D
    std::variant<RotationScaling, GeneralLinear> linear;
    Vector beta;      // D

    Index dim() const { return beta.size(); }

    bool is_rotation_scaling() const {
        return std::holds_alternative<RotationScaling>(linear);
    }

    /// Row-form linear factor (S*R or B).
    Matrix linear_matrix() const {
        if (const auto* rs = std::get_if<RotationScaling>(&linear))
            return rs->scale.asDiagonal() * rs->rotation;
        return std::get<GeneralLinear>(linear).matrix;
    }

    static DeformationModel identity(Index dim, KernelSpec kernel, Matrix control) {
        DeformationModel m;
        m.kernel = kernel;
        m.alpha = Matrix::Zero(control.rows(), dim);
        m.control = std::move(control);
        RotationScaling rs;
        rs.rotation = Matrix::Identity(dim, dim);
        rs.scale = Vector::Ones(dim);
        m.linear = rs;
        m.beta = Vector::Zero(dim);
        return m;
    }

    void validate(double tol = 1e-8) const {
        const Index d = dim();
        if (alpha.rows() != control.rows())
            throw contract_error("alpha row count must equal control row count");
        if ((alpha.size() > 0 && alpha.cols() != d) ||
            (control.size() > 0 && control.cols() != d))
            throw contract_error("model blocks disagree on dimension");
        if (const auto* rs = std::get_if<RotationScaling>(&linear)) {
            if (rs->rotation.rows() != d || rs->rotation.cols() != d || rs->scale.size() != d)
                throw contract_error("linear part has wrong dimensions");
            const Matrix err = rs->rotation.transpose() * rs->rotation - Matrix::Identity(d, d);
            if (err.cwiseAbs().maxCoeff() > tol)
                throw contract_error("rotation is not orthogonal");
            if (std::abs(rs->rotation.determinant() - 1.0) > tol)
                throw contract_error("rotation determinant is not +1");
            if ((rs->scale.array() <= 0.0).any())
                throw contract_error("scaling entries must be positive");
        } else {
            const auto& g = std::get<GeneralLinear>(linear);
            if (g.matrix.rows() != d || g.matrix.cols() != d)
                throw contract_error("linear part has wrong dimensions");
        }
    }
};

/// Sparse non-negative coupling between a source of N and a target of M
/// unit-mass points. Row and column sums never exceed one; a plan whose
/// entries are all exactly one is a partial bijection.
struct TransportPlan {
    struct Entry {
        Index source;
        Index target;
        double mass;
    };

    std::vector<Entry> entries;
    Index n_source = 0;
    Index n_target = 0;

    double total_mass() const {
        double s = 0.0;
        for (const auto& e : entries) s += e.mass;
        return s;
    }

    Vector row_sums() const {
        Vector r = Vector::Zero(n_source);
        for (const auto& e : entries) r[e.source] += e.mass;
        return r;
    }

    Vector col_sums() const {
        Vector c = Vector::Zero(n_target);
        for (const auto& e : entries) c[e.target] += e.mass;
        return c;
    }

    Matrix to_dense() const {
        Matrix g = Matrix::Zero(n_source, n_target);
        for (const auto& e : entries) g(e.source, e.target) += e.mass;
        return g;
    }

    void validate(double tol = 1e-9) const {
        for (const auto& e : entries) {
            if (e.source < 0 || e.source >= n_source || e.target < 0 || e.target >= n_target)
                throw contract_error("transport plan entry out of range");
            if (!(e.mass > 0.0) || !std::isfinite(e.mass))
                throw contract_error("transport plan masses must be positive and finite");
        }
        if (row_sums().maxCoeff() > 1.0 + tol || col_sums().maxCoeff() > 1.0 + tol)
            throw contract_error("transport plan marginal exceeds unit mass");
        const double lim = static_cast<double>(std::min(n_source, n_target));
        const double m = total_mass();
        if (m < -tol || m > lim + tol)
            throw contract_error("transport plan total mass out of range");
    }
};

/// Per-run diagnostics of a registration method.
struct RegistrationReport {
    struct IterationStat {
        int iteration = 0;            // 1-based outer iteration
        double transport_cost = 0.0;  // step-1 objective value
        Index matched = 0;            // |D|, size of the matched set
        double lambda = 0.0;          // current lambda (sliced methods only)
        double seconds = 0.0;         // wall time of the iteration
    };

    DeformationModel model;
    std::vector<IterationStat> per_iter;
    std::optional<double> final_error;
    int converged_at = -1;            // -1 when the iteration cap was reached
    std::vector<std::string> warnings;
};

}  // namespace partreg
