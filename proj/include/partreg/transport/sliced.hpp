#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "partreg/rng.hpp"
#include "partreg/transport/opt1d.hpp"
#include "partreg/types.hpp"

namespace partreg {

/// A batch of unit projection directions plus the seed that produced them.
struct SliceDirectionSet {
    Matrix directions;  // t x D, unit rows
    std::uint64_t seed = 0;
};

/// Draws t independent directions uniformly on the unit sphere
/// (normalized isotropic Gaussian vectors). Deterministic per seed.
inline SliceDirectionSet sample_directions(Index t, Index dim, std::uint64_t seed) {
    if (t < 1) throw parameter_error("sample_directions: t must be >= 1");
    if (dim < 1) throw parameter_error("sample_directions: dim must be >= 1");
    SliceDirectionSet out;
    out.seed = seed;
    out.directions.resize(t, dim);
    Rng rng(seed);
    for (Index i = 0; i < t; ++i) {
        double norm2 = 0.0;
        do {
            for (Index d = 0; d < dim; ++d) out.directions(i, d) = rng.normal();
            norm2 = out.directions.row(i).squaredNorm();
        } while (norm2 == 0.0);
        out.directions.row(i) /= std::sqrt(norm2);
    }
    return out;
}

/// Multiplicative lambda adaptation: grow when fewer than zeta points were
/// matched, shrink otherwise, clamped to [1e-8, 1e8].
inline double adapt_lambda(double lambda, Index matched, Index zeta, double factor = 1.05,
                           double lo = 1e-8, double hi = 1e8) {
    if (!(lambda > 0.0)) throw parameter_error("adapt_lambda: lambda must be > 0");
    const double next = matched < zeta ? lambda * factor : lambda / factor;
    return std::clamp(next, lo, hi);
}

struct SlicedStepResult {
    std::vector<Index> matched_source;  // D_t, ascending source indices
    Index matched_count = 0;
    double opt_cost = 0.0;              // 1D objective on the projections
};

namespace detail {

/// Stable sort permutation of v (ascending; ties keep original order).
inline std::vector<Index> sort_permutation(const Vector& v) {
    std::vector<Index> p(static_cast<std::size_t>(v.size()));
    std::iota(p.begin(), p.end(), Index{0});
    std::stable_sort(p.begin(), p.end(), [&v](Index a, Index b) { return v[a] < v[b]; });
    return p;
}

}  // namespace detail

/// One slice of the sliced partial-transport update. Projects the moving
/// set and the target onto theta, solves the 1D partial problem on the
/// sorted projections, and moves every matched row of Yhat along theta so
/// that its projection coincides with its partner's. Components orthogonal
/// to theta are untouched. Coincident projections keep their original
/// order (stable sort), so pairing is deterministic.
inline SlicedStepResult sliced_step(Matrix& Yhat, const Matrix& Y,
                                    const Eigen::Ref<const Vector>& theta, double lambda) {
    if (Yhat.cols() != Y.cols() || theta.size() != Yhat.cols())
        throw contract_error("sliced_step: dimension mismatch");
    if (std::abs(theta.norm() - 1.0) > 1e-12)
        throw contract_error("sliced_step: direction must be unit length");

    const Vector p = Yhat * theta;
    const Vector q = Y * theta;
    const auto perm_p = detail::sort_permutation(p);
    const auto perm_q = detail::sort_permutation(q);

    std::vector<double> a(perm_p.size()), b(perm_q.size());
    for (std::size_t i = 0; i < perm_p.size(); ++i) a[i] = p[perm_p[i]];
    for (std::size_t j = 0; j < perm_q.size(); ++j) b[j] = q[perm_q[j]];

    const Opt1dSolution sol = solve_opt_1d(a, b, lambda);

    SlicedStepResult out;
    out.opt_cost = sol.cost;
    out.matched_count = static_cast<Index>(sol.matches.size());
    out.matched_source.reserve(sol.matches.size());
    for (const auto& [si, tj] : sol.matches) {
        const Index n = perm_p[static_cast<std::size_t>(si)];
        const Index m = perm_q[static_cast<std::size_t>(tj)];
        Yhat.row(n) += (q[m] - p[n]) * theta.transpose();
        out.matched_source.push_back(n);
    }
    std::sort(out.matched_source.begin(), out.matched_source.end());
    return out;
}

}  // namespace partreg
