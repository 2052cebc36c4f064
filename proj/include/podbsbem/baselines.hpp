#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "podbsbem/common.hpp"
#include "podbsbem/rom.hpp"
#include "podbsbem/sampling.hpp"

namespace podbsbem {

/// Legendre polynomial P_degree on [-1, 1] by the three-term recurrence.
inline double legendre_value(int degree, double z) {
    if (degree < 0) throw std::invalid_argument("legendre_value: negative degree");
    if (degree == 0) return 1.0;
    double prev = 1.0;
    double value = z;
    for (int j = 2; j <= degree; ++j) {
        const double next = ((2.0 * j - 1.0) * z * value - (j - 1.0) * prev) / j;
        prev = value;
        value = next;
    }
    return value;
}

/// All multi-indices with total degree <= order, graded (by total degree)
/// and, within a degree, lexicographic with the leading dimension decreasing
/// first. The first entry is always the all-zero index.
inline std::vector<std::vector<int>> total_degree_multi_indices(int dims, int order) {
    if (dims < 1) throw std::invalid_argument("total_degree_multi_indices: need at least one dimension");
    if (order < 0) throw std::invalid_argument("total_degree_multi_indices: negative order");
    std::vector<std::vector<int>> indices;
    std::vector<int> current(static_cast<std::size_t>(dims), 0);
    const std::function<void(int, int)> emit = [&](int d, int remaining) {
        if (d == dims - 1) {
            current[static_cast<std::size_t>(d)] = remaining;
            indices.push_back(current);
            return;
        }
        for (int k = remaining; k >= 0; --k) {
            current[static_cast<std::size_t>(d)] = k;
            emit(d + 1, remaining - k);
        }
    };
    for (int degree = 0; degree <= order; ++degree) emit(0, degree);
    return indices;
}

/// Full polynomial chaos expansion in the normalized uniform measure:
/// total-degree Legendre basis fitted by least squares on a Latin hypercube
/// design of oversampling * basis_count points.
struct PceExpansion {
    int order = 0;
    int oversampling = 0;
    std::uint64_t seed = 0;
    std::string rng = kRngId;
    std::vector<std::vector<int>> index_set;
    Eigen::MatrixXd coefficients;  // basis_count x (n_nodes * n_times), column-major field layout
    Eigen::Index n_nodes = 0;
    Eigen::Index n_times = 0;
    Eigen::VectorXd times;
};

/// Fits the expansion at explicit unit-cube design points (columns).
inline PceExpansion pce_fit_at(const ModelSpec& model, const UncertainInput& input, int order,
                               const Eigen::MatrixXd& unit_points, std::uint64_t seed, int threads = 1) {
    if (!model.trajectory) throw std::invalid_argument("pce_fit: model has no trajectory function");
    if (order < 0) throw std::invalid_argument("pce_fit: negative order");
    if (unit_points.rows() != input.dim()) throw std::invalid_argument("pce_fit: design point dimension mismatch");

    PceExpansion expansion;
    expansion.order = order;
    expansion.seed = seed;
    expansion.index_set = total_degree_multi_indices(input.dim(), order);
    expansion.n_nodes = model.n_nodes;
    expansion.n_times = model.times.size();
    expansion.times = model.times;

    const auto basis_count = static_cast<Eigen::Index>(expansion.index_set.size());
    const Eigen::Index n_points = unit_points.cols();
    if (n_points < basis_count)
        throw numeric_error("pce_fit: fewer design points than basis functions");

    Eigen::MatrixXd design(n_points, basis_count);
    for (Eigen::Index i = 0; i < n_points; ++i) {
        for (Eigen::Index k = 0; k < basis_count; ++k) {
            double value = 1.0;
            const auto& index = expansion.index_set[static_cast<std::size_t>(k)];
            for (int d = 0; d < input.dim(); ++d)
                value *= legendre_value(index[static_cast<std::size_t>(d)], 2.0 * unit_points(d, i) - 1.0);
            design(i, k) = value;
        }
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < basis_count)
        throw numeric_error("pce_fit: rank-deficient design matrix; add samples or reduce the order");

    const Eigen::MatrixXd physical = to_physical(input, unit_points);
    const Eigen::Index field_size = model.n_nodes * model.times.size();
    Eigen::MatrixXd responses(n_points, field_size);
    for_blocks(n_points, 1, threads, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
        for (std::int64_t s = begin; s < end; ++s) {
            const Eigen::MatrixXd trajectory = model.trajectory(physical.col(s));
            if (trajectory.rows() != model.n_nodes || trajectory.cols() != model.times.size())
                throw std::invalid_argument("pce_fit: model returned a trajectory with wrong dimensions");
            responses.row(s) = Eigen::Map<const Eigen::VectorXd>(trajectory.data(), field_size).transpose();
        }
    });

    expansion.coefficients.resize(basis_count, field_size);
    const Eigen::Index chunk = 8192;
    for (Eigen::Index begin = 0; begin < field_size; begin += chunk) {
        const Eigen::Index width = std::min(chunk, field_size - begin);
        expansion.coefficients.middleCols(begin, width) = qr.solve(responses.middleCols(begin, width));
    }
    return expansion;
}

inline PceExpansion pce_fit(const ModelSpec& model, const UncertainInput& input, int order, int oversampling,
                            std::uint64_t seed, int threads = 1) {
    if (oversampling < 1) throw std::invalid_argument("pce_fit: oversampling must be >= 1");
    const auto basis_count =
        static_cast<Eigen::Index>(total_degree_multi_indices(input.dim(), order).size());
    const SampleSet design = lhs_sample(input, oversampling * basis_count, seed);
    PceExpansion expansion = pce_fit_at(model, input, order, design.unit_points, seed, threads);
    expansion.oversampling = oversampling;
    return expansion;
}

/// Closed-form statistics of the expansion: the mean is the constant
/// coefficient; the variance adds c_k^2 * prod_d 1/(2 a_d + 1) over k >= 1.
inline FieldStatistics pce_statistics(const PceExpansion& expansion) {
    const Eigen::Index field_size = expansion.n_nodes * expansion.n_times;
    FieldStatistics stats;
    const Eigen::RowVectorXd mean_row = expansion.coefficients.row(0);
    stats.mean = Eigen::Map<const Eigen::MatrixXd>(mean_row.data(), expansion.n_nodes, expansion.n_times);
    Eigen::RowVectorXd variance = Eigen::RowVectorXd::Zero(field_size);
    for (Eigen::Index k = 1; k < expansion.coefficients.rows(); ++k) {
        double weight = 1.0;
        for (const int degree : expansion.index_set[static_cast<std::size_t>(k)])
            weight /= 2.0 * degree + 1.0;
        variance += weight * expansion.coefficients.row(k).cwiseAbs2();
    }
    const Eigen::RowVectorXd deviation = variance.cwiseSqrt();
    stats.std_dev = Eigen::Map<const Eigen::MatrixXd>(deviation.data(), expansion.n_nodes, expansion.n_times);
    return stats;
}

/// Sampling reference: mean and population (n denominator) standard
/// deviation fields plus optional per-sample probe values and the wall time
/// of the whole loop.
struct ReferenceRun {
    FieldStatistics stats;
    Eigen::MatrixXd probe_samples;  // n x probes.size()
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    SampleScheme scheme = SampleScheme::monte_carlo;
};

inline ReferenceRun reference_run(const ModelSpec& model, const UncertainInput& input, Eigen::Index count,
                                  SampleScheme scheme, std::uint64_t seed, int threads = 1,
                                  const std::vector<std::pair<Eigen::Index, Eigen::Index>>& probes = {}) {
    if (!model.trajectory) throw std::invalid_argument("reference_run: model has no trajectory function");
    if (count < 1) throw std::invalid_argument("reference_run: need at least one sample");
    for (const auto& [node, time] : probes)
        if (node < 0 || node >= model.n_nodes || time < 0 || time >= model.times.size())
            throw std::invalid_argument("reference_run: probe index out of range");

    const auto t0 = std::chrono::steady_clock::now();
    SampleSet samples;
    switch (scheme) {
        case SampleScheme::monte_carlo: samples = mc_sample(input, count, seed); break;
        case SampleScheme::latin_hypercube: samples = lhs_sample(input, count, seed); break;
        default: throw std::invalid_argument("reference_run: scheme must be monte_carlo or latin_hypercube");
    }

    const Eigen::Index field_rows = model.n_nodes;
    const Eigen::Index field_cols = model.times.size();
    const std::int64_t blocks = (count + kReductionBlock - 1) / kReductionBlock;
    std::vector<Eigen::MatrixXd> block_sum(static_cast<std::size_t>(blocks));
    std::vector<Eigen::MatrixXd> block_square(static_cast<std::size_t>(blocks));

    ReferenceRun run;
    run.seed = seed;
    run.scheme = scheme;
    run.probe_samples.resize(count, static_cast<Eigen::Index>(probes.size()));

    for_blocks(count, kReductionBlock, threads, [&](std::int64_t b, std::int64_t begin, std::int64_t end) {
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(field_rows, field_cols);
        Eigen::MatrixXd square = Eigen::MatrixXd::Zero(field_rows, field_cols);
        for (std::int64_t s = begin; s < end; ++s) {
            const Eigen::MatrixXd field = model.trajectory(samples.physical_points.col(s));
            if (field.rows() != field_rows || field.cols() != field_cols)
                throw std::invalid_argument("reference_run: model returned a trajectory with wrong dimensions");
            sum.noalias() += field;
            square.noalias() += field.cwiseProduct(field);
            for (std::size_t p = 0; p < probes.size(); ++p)
                run.probe_samples(s, static_cast<Eigen::Index>(p)) = field(probes[p].first, probes[p].second);
        }
        block_sum[static_cast<std::size_t>(b)] = std::move(sum);
        block_square[static_cast<std::size_t>(b)] = std::move(square);
    });

    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(field_rows, field_cols);
    Eigen::MatrixXd square = Eigen::MatrixXd::Zero(field_rows, field_cols);
    for (std::int64_t b = 0; b < blocks; ++b) {
        sum += block_sum[static_cast<std::size_t>(b)];
        square += block_square[static_cast<std::size_t>(b)];
    }
    const double inverse = 1.0 / static_cast<double>(count);
    run.stats.mean = sum * inverse;
    run.stats.std_dev =
        (square * inverse - run.stats.mean.cwiseProduct(run.stats.mean)).cwiseMax(0.0).cwiseSqrt();
    run.wall_seconds = detail::seconds_between(t0, std::chrono::steady_clock::now());
    return run;
}

inline FieldStatistics reference_statistics(const ModelSpec& model, const UncertainInput& input, Eigen::Index count,
                                            SampleScheme scheme, std::uint64_t seed, int threads = 1) {
    return reference_run(model, input, count, scheme, seed, threads).stats;
}

}  // namespace podbsbem
