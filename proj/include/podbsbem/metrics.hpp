#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "podbsbem/common.hpp"

namespace podbsbem {

/// Relative L2 error sqrt(sum (c - r)^2 / sum r^2) over all entries.
inline double l2_relative_error(const Eigen::MatrixXd& candidate, const Eigen::MatrixXd& reference) {
    if (candidate.rows() != reference.rows() || candidate.cols() != reference.cols())
        throw std::invalid_argument("l2_relative_error: shape mismatch");
    const double denominator = reference.norm();
    if (!(denominator > 0.0)) throw numeric_error("l2_relative_error: reference has zero norm");
    return (candidate - reference).norm() / denominator;
}

/// Per-time relative L2 errors (one per column) and their maximum.
struct ErrorReport {
    Eigen::VectorXd per_time;
    double max_error = 0.0;
    Eigen::Index arg_max = 0;
};

inline ErrorReport max_l2_over_time(const Eigen::MatrixXd& candidate, const Eigen::MatrixXd& reference) {
    if (candidate.rows() != reference.rows() || candidate.cols() != reference.cols())
        throw std::invalid_argument("max_l2_over_time: shape mismatch");
    ErrorReport report;
    report.per_time.resize(candidate.cols());
    for (Eigen::Index t = 0; t < candidate.cols(); ++t) {
        const double denominator = reference.col(t).norm();
        if (!(denominator > 0.0))
            throw numeric_error("max_l2_over_time: reference column " + std::to_string(t) + " has zero norm");
        report.per_time(t) = (candidate.col(t) - reference.col(t)).norm() / denominator;
    }
    report.max_error = report.per_time.maxCoeff(&report.arg_max);
    return report;
}

struct KdeResult {
    Eigen::VectorXd density;
    double bandwidth = 0.0;
};

namespace detail {

/// Type-7 (linear interpolation) quantile of a sorted vector.
inline double sorted_quantile(const std::vector<double>& sorted, double probability) {
    const auto n = static_cast<std::ptrdiff_t>(sorted.size());
    const double position = probability * static_cast<double>(n - 1);
    const auto low = static_cast<std::ptrdiff_t>(std::floor(position));
    const auto high = std::min<std::ptrdiff_t>(low + 1, n - 1);
    const double fraction = position - static_cast<double>(low);
    return sorted[static_cast<std::size_t>(low)] * (1.0 - fraction) + sorted[static_cast<std::size_t>(high)] * fraction;
}

}  // namespace detail

/// Gaussian kernel density estimate on the given grid with Silverman's
/// bandwidth h = 0.9 * min(sd, IQR/1.34) * n^(-1/5) (sd with the n-1
/// denominator, quartiles by linear interpolation).
inline KdeResult gaussian_kde(const Eigen::VectorXd& samples, const Eigen::VectorXd& grid) {
    const Eigen::Index n = samples.size();
    if (n < 2) throw std::invalid_argument("gaussian_kde: need at least two samples");
    if (grid.size() < 1) throw std::invalid_argument("gaussian_kde: empty evaluation grid");
    const double mean = samples.mean();
    const double variance = (samples.array() - mean).square().sum() / static_cast<double>(n - 1);
    std::vector<double> sorted(samples.data(), samples.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const double iqr = detail::sorted_quantile(sorted, 0.75) - detail::sorted_quantile(sorted, 0.25);
    double spread = std::min(std::sqrt(variance), iqr / 1.34);
    if (!(spread > 0.0)) spread = std::max(std::sqrt(variance), iqr / 1.34);
    const double bandwidth = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
    if (!(bandwidth > 0.0)) throw numeric_error("gaussian_kde: degenerate sample set (zero spread)");

    KdeResult result;
    result.bandwidth = bandwidth;
    result.density.resize(grid.size());
    const double norm = 1.0 / (static_cast<double>(n) * bandwidth * std::sqrt(2.0 * 3.14159265358979323846));
    for (Eigen::Index g = 0; g < grid.size(); ++g) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = (grid(g) - samples(i)) / bandwidth;
            sum += std::exp(-0.5 * z * z);
        }
        result.density(g) = norm * sum;
    }
    return result;
}

}  // namespace podbsbem
