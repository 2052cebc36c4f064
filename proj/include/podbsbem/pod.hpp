#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "podbsbem/common.hpp"
#include "podbsbem/snapshots.hpp"

namespace podbsbem {

/// Orthonormal basis retained by the cumulative-energy criterion.
struct PodBasis {
    Eigen::MatrixXd modes;            // rows x L, orthonormal columns
    Eigen::VectorXd singular_values;  // the L retained singular values, descending
    double tolerance = 0.0;
    double captured_energy = 0.0;     // sum_{l<=L} s_l^2 / sum_{l<=N_r} s_l^2
    Eigen::Index numerical_rank = 0;  // N_r: count of s_l > 1e-14 * s_1
};

namespace detail {

inline constexpr double kSingularFloor = 1e-14;

/// Flips each column so its largest-magnitude entry (first such entry on
/// ties) is positive. Resolves the sign ambiguity of singular vectors.
inline void fix_mode_signs(Eigen::MatrixXd& modes) {
    for (Eigen::Index c = 0; c < modes.cols(); ++c) {
        Eigen::Index where = 0;
        modes.col(c).cwiseAbs().maxCoeff(&where);
        if (modes(where, c) < 0.0) modes.col(c) = -modes.col(c);
    }
}

/// Number of leading modes needed to capture more than (1 - tolerance) of the
/// energy held by the first numerical_rank singular values.
inline Eigen::Index energy_cutoff(const Eigen::VectorXd& sigma, Eigen::Index numerical_rank, double tolerance,
                                  double* captured) {
    double denominator = 0.0;
    for (Eigen::Index i = 0; i < numerical_rank; ++i) denominator += sigma(i) * sigma(i);
    double cumulative = 0.0;
    for (Eigen::Index count = 1; count <= numerical_rank; ++count) {
        cumulative += sigma(count - 1) * sigma(count - 1);
        if (cumulative > (1.0 - tolerance) * denominator) {
            if (captured) *captured = cumulative / denominator;
            return count;
        }
    }
    if (captured) *captured = 1.0;
    return numerical_rank;
}

}  // namespace detail

/// POD of a dense matrix: modes are the leading left singular vectors, kept
/// up to the smallest L with sum_{l<=L} s_l^2 / sum_{l<=N_r} s_l^2 > 1 - tolerance,
/// where N_r counts singular values above 1e-14 * s_1. Thin SVD by default;
/// for very tall inputs (rows >= 4*cols and cols >= 512) the method of
/// snapshots is used instead: eigendecomposition of the column Gram matrix
/// and modes U*v_l/s_l, which is far cheaper at that shape.
inline PodBasis pod(const Eigen::MatrixXd& matrix, double tolerance) {
    if (matrix.size() == 0) throw std::invalid_argument("pod: empty input matrix");
    if (!(tolerance > 0.0 && tolerance < 1.0)) throw std::invalid_argument("pod: tolerance must lie in (0, 1)");
    if (!matrix.allFinite()) throw numeric_error("pod: input matrix has non-finite entries");

    PodBasis basis;
    basis.tolerance = tolerance;

    const bool snapshots_method = matrix.rows() >= 4 * matrix.cols() && matrix.cols() >= 512;
    if (snapshots_method) {
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(matrix.cols(), matrix.cols());
        gram.selfadjointView<Eigen::Lower>().rankUpdate(matrix.transpose());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        if (eig.info() != Eigen::Success) throw numeric_error("pod: eigendecomposition failed");
        const Eigen::Index n = gram.cols();
        Eigen::VectorXd sigma(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double lambda = std::max(eig.eigenvalues()(n - 1 - i), 0.0);
            sigma(i) = std::sqrt(lambda);
        }
        if (!(sigma(0) > 0.0)) throw numeric_error("pod: input matrix is identically zero");
        Eigen::Index rank = 0;
        while (rank < n && sigma(rank) > detail::kSingularFloor * sigma(0)) ++rank;
        basis.numerical_rank = rank;
        const Eigen::Index kept = detail::energy_cutoff(sigma, rank, tolerance, &basis.captured_energy);
        Eigen::MatrixXd right(n, kept);
        for (Eigen::Index c = 0; c < kept; ++c) right.col(c) = eig.eigenvectors().col(n - 1 - c);
        basis.modes.noalias() = matrix * right;
        for (Eigen::Index c = 0; c < kept; ++c) basis.modes.col(c) /= sigma(c);
        basis.singular_values = sigma.head(kept);
    } else {
        const Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix, Eigen::ComputeThinU);
        const Eigen::VectorXd& sigma = svd.singularValues();
        if (!(sigma(0) > 0.0)) throw numeric_error("pod: input matrix is identically zero");
        Eigen::Index rank = 0;
        while (rank < sigma.size() && sigma(rank) > detail::kSingularFloor * sigma(0)) ++rank;
        basis.numerical_rank = rank;
        const Eigen::Index kept = detail::energy_cutoff(sigma, rank, tolerance, &basis.captured_energy);
        basis.modes = svd.matrixU().leftCols(kept);
        basis.singular_values = sigma.head(kept);
    }
    detail::fix_mode_signs(basis.modes);
    return basis;
}

/// Two-step POD: compress each sample trajectory with tolerance_time, pool
/// the per-sample modes in sample order, and extract the global basis from
/// the pooled matrix with tolerance_sample. With a single time level the
/// trajectory step would only rescale columns and distort the pooled
/// spectrum, so the steady case reduces to one POD of the raw snapshots.
inline PodBasis two_step_pod(const SnapshotMatrix& snapshots, double tolerance_time, double tolerance_sample,
                             int threads = 1) {
    if (snapshots.n_samples < 1) throw std::invalid_argument("two_step_pod: empty snapshot matrix");
    if (snapshots.n_times == 1) return pod(snapshots.values, tolerance_sample);
    std::vector<Eigen::MatrixXd> compressed(static_cast<std::size_t>(snapshots.n_samples));
    for_blocks(snapshots.n_samples, 1, threads, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
        for (std::int64_t s = begin; s < end; ++s)
            compressed[static_cast<std::size_t>(s)] = pod(snapshots.sample_block(s), tolerance_time).modes;
    });
    Eigen::Index pooled_cols = 0;
    for (const auto& block : compressed) pooled_cols += block.cols();
    Eigen::MatrixXd pooled(snapshots.n_nodes, pooled_cols);
    Eigen::Index offset = 0;
    for (const auto& block : compressed) {
        pooled.middleCols(offset, block.cols()) = block;
        offset += block.cols();
    }
    return pod(pooled, tolerance_sample);
}

/// Projection coefficients of the snapshots onto the basis: B = modes^T * U,
/// L x (n_samples * n_times) with the snapshot column layout.
inline Eigen::MatrixXd project_coefficients(const PodBasis& basis, const SnapshotMatrix& snapshots) {
    if (basis.modes.rows() != snapshots.n_nodes)
        throw std::invalid_argument("project_coefficients: basis and snapshots disagree on node count");
    return basis.modes.transpose() * snapshots.values;
}

/// Reshapes row `mode` of the projection-coefficient matrix into the n_times
/// x n_samples table beta, where column s is the time history of sample s:
/// beta(j, s) = B(mode, s*n_times + j).
inline Eigen::MatrixXd mode_time_table(const Eigen::MatrixXd& coefficients, Eigen::Index mode,
                                       Eigen::Index n_times, Eigen::Index n_samples) {
    if (coefficients.cols() != n_times * n_samples)
        throw std::invalid_argument("mode_time_table: column count does not factor as n_times * n_samples");
    if (mode < 0 || mode >= coefficients.rows())
        throw std::invalid_argument("mode_time_table: mode index out of range");
    const Eigen::VectorXd row = coefficients.row(mode).transpose();
    return Eigen::Map<const Eigen::MatrixXd>(row.data(), n_times, n_samples);
}

/// Per-mode temporal compression. modes is the N_t x K basis of the mode's
/// time-sample table, coefficients = modes^T * beta its K x n_samples
/// projection.
struct TemporalBasis {
    Eigen::MatrixXd modes;
    Eigen::MatrixXd coefficients;
    Eigen::VectorXd singular_values;
};

inline TemporalBasis third_level_pod(const Eigen::MatrixXd& beta, double tolerance) {
    PodBasis basis = pod(beta, tolerance);
    TemporalBasis temporal;
    temporal.coefficients.noalias() = basis.modes.transpose() * beta;
    temporal.modes = std::move(basis.modes);
    temporal.singular_values = std::move(basis.singular_values);
    return temporal;
}

}  // namespace podbsbem
