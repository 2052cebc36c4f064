#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "podbsbem/common.hpp"
#include "podbsbem/pod.hpp"
#include "podbsbem/sampling.hpp"
#include "podbsbem/snapshots.hpp"
#include "podbsbem/splines.hpp"

namespace podbsbem {

struct Hyperparameters {
    double tolerance_time = 1e-10;
    double tolerance_sample = 1e-10;
    int oversample = 1;
    std::uint64_t seed = 0;
    std::string rng = kRngId;
};

struct FieldStatistics {
    Eigen::MatrixXd mean;     // n_nodes x n_times
    Eigen::MatrixXd std_dev;  // n_nodes x n_times
};

/// A forward model: trajectory(eta) returns the n_nodes x times.size() field
/// history at physical parameter point eta. grid_axes optionally carries the
/// spatial coordinate axes (node enumeration has axis 1 fastest).
struct ModelSpec {
    std::string name;
    Eigen::Index n_nodes = 0;
    Eigen::VectorXd times;
    std::vector<Eigen::VectorXd> grid_axes;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> trajectory;
};

struct BuildTiming {
    double snapshot_seconds = 0.0;
    double decomposition_seconds = 0.0;
    double regression_seconds = 0.0;
    double total_seconds = 0.0;
};

/// Offline product of the pipeline: spatial basis, per-mode temporal bases,
/// and per-(mode, temporal-mode) spline coefficient vectors.
struct Surrogate {
    BSplineSpace space;
    UncertainInput inputs;
    Eigen::VectorXd times;
    PodBasis basis;                              // modes: n_nodes x L
    std::vector<Eigen::MatrixXd> temporal;       // per mode: n_times x K_l
    std::vector<Eigen::MatrixXd> coefficients;   // per mode: M x K_l, column k solves the global system
    Hyperparameters hyper;
    bool rank_deficient = false;
    std::string problem;
    std::vector<Eigen::VectorXd> grid_axes;

    Eigen::Index n_nodes() const { return basis.modes.rows(); }
    Eigen::Index n_times() const { return times.size(); }
    Eigen::Index n_modes() const { return basis.modes.cols(); }
};

/// Values of the element's local basis functions at each sample point:
/// row i of the result is eval_local_basis at column i of points.
inline Eigen::MatrixXd local_design(const BSplineSpace& space, const std::vector<int>& element,
                                    const Eigen::MatrixXd& points) {
    Eigen::MatrixXd design(points.cols(), space.local_count());
    for (Eigen::Index i = 0; i < points.cols(); ++i)
        design.row(i) = eval_local_basis(space, element, points.col(i)).transpose();
    return design;
}

/// Global normal-equation matrix: sum over elements of the IEN-scattered
/// local Gram blocks design^T * design. designs is indexed by element linear
/// index.
inline Eigen::MatrixXd assemble_gram(const BSplineSpace& space, const std::vector<Eigen::MatrixXd>& designs) {
    if (static_cast<std::int64_t>(designs.size()) != space.element_count())
        throw std::invalid_argument("assemble_gram: one design block per element required");
    const Eigen::Index m = space.global_count();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
    const int n_local = space.local_count();
    for (std::int64_t e = 0; e < space.element_count(); ++e) {
        const auto element = element_multi_index(space, e);
        const Eigen::MatrixXd& design = designs[static_cast<std::size_t>(e)];
        if (design.size() == 0) continue;
        if (design.cols() != n_local)
            throw std::invalid_argument("assemble_gram: design block has wrong local width");
        const Eigen::MatrixXd local = design.transpose() * design;
        for (int a = 0; a < n_local; ++a) {
            const std::int64_t ga = ien(space, element, a);
            for (int b = 0; b < n_local; ++b) gram(ga, ien(space, element, b)) += local(a, b);
        }
    }
    return gram;
}

/// Global right-hand side: sum over elements of the scattered design^T *
/// local_values blocks. local_values[e] holds the regression targets at the
/// element's sample points, in the same row order as designs[e].
inline Eigen::VectorXd assemble_rhs(const BSplineSpace& space, const std::vector<Eigen::MatrixXd>& designs,
                                    const std::vector<Eigen::VectorXd>& local_values) {
    if (designs.size() != local_values.size())
        throw std::invalid_argument("assemble_rhs: designs and local value blocks must align");
    const Eigen::Index m = space.global_count();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    const int n_local = space.local_count();
    for (std::int64_t e = 0; e < space.element_count(); ++e) {
        const Eigen::MatrixXd& design = designs[static_cast<std::size_t>(e)];
        const Eigen::VectorXd& values = local_values[static_cast<std::size_t>(e)];
        if (design.size() == 0 && values.size() == 0) continue;
        if (design.rows() != values.size())
            throw std::invalid_argument("assemble_rhs: design rows and value count differ");
        const auto element = element_multi_index(space, e);
        const Eigen::VectorXd local = design.transpose() * values;
        for (int a = 0; a < n_local; ++a) rhs(ien(space, element, a)) += local(a);
    }
    return rhs;
}

/// Factors the assembled Gram matrix once and solves many right-hand sides.
/// Cholesky when the matrix is positive definite; otherwise (or when a solve
/// fails a residual check) a rank-revealing minimum-norm fallback.
class GramSolver {
public:
    explicit GramSolver(const Eigen::MatrixXd& gram) : gram_(gram), llt_(gram) {
        if (llt_.info() != Eigen::Success) switch_to_fallback();
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) {
        if (!fallback_) {
            Eigen::VectorXd solution = llt_.solve(rhs);
            const double scale = gram_.norm() * solution.norm() + rhs.norm();
            if (scale > 0.0 && (gram_ * solution - rhs).norm() > 1e-8 * scale) {
                switch_to_fallback();
            } else {
                return solution;
            }
        }
        return cod_.solve(rhs);
    }

    bool rank_deficient() const { return fallback_; }

private:
    void switch_to_fallback() {
        if (!fallback_) {
            cod_.compute(gram_);
            fallback_ = true;
        }
    }

    Eigen::MatrixXd gram_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
    bool fallback_ = false;
};

struct GlobalSolve {
    Eigen::VectorXd solution;
    bool rank_deficient = false;
};

inline GlobalSolve solve_global(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs) {
    GramSolver solver(gram);
    GlobalSolve result;
    result.solution = solver.solve(rhs);
    result.rank_deficient = solver.rank_deficient();
    return result;
}

namespace detail {

inline double seconds_between(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

}  // namespace detail

/// Fits the surrogate from an existing snapshot set. unit_points holds the
/// sample locations in [0,1]^m (columns aligned with the snapshot sample
/// blocks); samples are grouped into elements by position, so any layout with
/// enough points per element works, not only the canonical collocation one.
inline Surrogate fit_surrogate(const BSplineSpace& space, const UncertainInput& inputs,
                               const Eigen::MatrixXd& unit_points, const SnapshotMatrix& snapshots,
                               const Eigen::VectorXd& times, const Hyperparameters& hyper, int threads = 1,
                               BuildTiming* timing = nullptr) {
    if (inputs.dim() != space.dim())
        throw std::invalid_argument("fit_surrogate: input and spline space dimensions differ");
    if (unit_points.rows() != space.dim())
        throw std::invalid_argument("fit_surrogate: sample point dimension mismatch");
    if (unit_points.cols() != snapshots.n_samples)
        throw std::invalid_argument("fit_surrogate: sample count disagrees with snapshot blocks");
    if (times.size() != snapshots.n_times)
        throw std::invalid_argument("fit_surrogate: time grid length disagrees with snapshot blocks");

    const auto t_fit0 = std::chrono::steady_clock::now();

    Surrogate surrogate;
    surrogate.space = space;
    surrogate.inputs = inputs;
    surrogate.times = times;
    surrogate.hyper = hyper;

    surrogate.basis = two_step_pod(snapshots, hyper.tolerance_time, hyper.tolerance_sample, threads);
    const Eigen::MatrixXd projections = project_coefficients(surrogate.basis, snapshots);
    const auto t_pod = std::chrono::steady_clock::now();

    const std::int64_t n_elements = space.element_count();
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(n_elements));
    for (Eigen::Index s = 0; s < unit_points.cols(); ++s) {
        const std::int64_t e = element_linear_index(space, locate_element(space, unit_points.col(s)));
        members[static_cast<std::size_t>(e)].push_back(s);
    }

    std::vector<Eigen::MatrixXd> designs(static_cast<std::size_t>(n_elements));
    for (std::int64_t e = 0; e < n_elements; ++e) {
        const auto& rows = members[static_cast<std::size_t>(e)];
        Eigen::MatrixXd points(space.dim(), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) points.col(static_cast<Eigen::Index>(i)) = unit_points.col(rows[i]);
        designs[static_cast<std::size_t>(e)] = local_design(space, element_multi_index(space, e), points);
    }

    GramSolver solver(assemble_gram(space, designs));

    const Eigen::Index n_modes = surrogate.basis.modes.cols();
    surrogate.temporal.resize(static_cast<std::size_t>(n_modes));
    surrogate.coefficients.resize(static_cast<std::size_t>(n_modes));
    std::vector<Eigen::VectorXd> local_values(static_cast<std::size_t>(n_elements));
    for (Eigen::Index mode = 0; mode < n_modes; ++mode) {
        const Eigen::MatrixXd beta = mode_time_table(projections, mode, snapshots.n_times, snapshots.n_samples);
        TemporalBasis temporal = third_level_pod(beta, hyper.tolerance_sample);
        const Eigen::Index k_count = temporal.modes.cols();
        Eigen::MatrixXd alpha(space.global_count(), k_count);
        for (Eigen::Index k = 0; k < k_count; ++k) {
            for (std::int64_t e = 0; e < n_elements; ++e) {
                const auto& rows = members[static_cast<std::size_t>(e)];
                Eigen::VectorXd values(static_cast<Eigen::Index>(rows.size()));
                for (std::size_t i = 0; i < rows.size(); ++i)
                    values(static_cast<Eigen::Index>(i)) = temporal.coefficients(k, rows[i]);
                local_values[static_cast<std::size_t>(e)] = std::move(values);
            }
            alpha.col(k) = solver.solve(assemble_rhs(space, designs, local_values));
        }
        surrogate.temporal[static_cast<std::size_t>(mode)] = std::move(temporal.modes);
        surrogate.coefficients[static_cast<std::size_t>(mode)] = std::move(alpha);
    }
    surrogate.rank_deficient = solver.rank_deficient();

    const auto t_end = std::chrono::steady_clock::now();
    if (timing) {
        timing->decomposition_seconds = detail::seconds_between(t_fit0, t_pod);
        timing->regression_seconds = detail::seconds_between(t_pod, t_end);
        timing->total_seconds += detail::seconds_between(t_fit0, t_end);
    }
    return surrogate;
}

/// Collocation sample set of the whole space: every element's points in
/// element linear order. physical_points attached from inputs.
inline SampleSet collocation_samples(const BSplineSpace& space, const UncertainInput& inputs, int oversample) {
    SampleSet all;
    all.scheme = SampleScheme::element_collocation;
    std::vector<Eigen::MatrixXd> blocks;
    Eigen::Index total = 0;
    for (std::int64_t e = 0; e < space.element_count(); ++e) {
        blocks.push_back(element_collocation_points(space, e, oversample).unit_points);
        total += blocks.back().cols();
    }
    all.unit_points.resize(space.dim(), total);
    Eigen::Index offset = 0;
    for (const auto& block : blocks) {
        all.unit_points.middleCols(offset, block.cols()) = block;
        offset += block.cols();
    }
    attach_physical(all, inputs);
    return all;
}

/// One forward solve per sample column. The block partition is fixed, so the
/// fill is identical for any thread count.
inline SnapshotMatrix run_model(const ModelSpec& model, const SampleSet& samples, int threads = 1) {
    if (!model.trajectory) throw std::invalid_argument("run_model: model has no trajectory function");
    if (model.n_nodes < 1 || model.times.size() < 1)
        throw std::invalid_argument("run_model: model dimensions must be positive");
    const Eigen::Index n_samples = samples.physical_points.cols();
    if (n_samples < 1) throw std::invalid_argument("run_model: samples need attached physical points");

    SnapshotMatrix snapshots(model.n_nodes, n_samples, model.times.size());
    for_blocks(n_samples, 1, threads, [&](std::int64_t, std::int64_t begin, std::int64_t end) {
        for (std::int64_t s = begin; s < end; ++s) {
            Eigen::MatrixXd trajectory = model.trajectory(samples.physical_points.col(s));
            if (trajectory.rows() != model.n_nodes || trajectory.cols() != model.times.size())
                throw std::invalid_argument("run_model: model returned a trajectory with wrong dimensions");
            snapshots.sample_block(s) = trajectory;
        }
    });
    return snapshots;
}

/// Full offline pipeline: deterministic element collocation points, one
/// forward solve per point, two-step POD, per-mode temporal POD, and the
/// global spline regression.
inline Surrogate offline(const ModelSpec& model, const UncertainInput& inputs, const BSplineSpace& space,
                         double tolerance_time, double tolerance_sample, std::uint64_t seed, int oversample = 1,
                         int threads = 1, BuildTiming* timing = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    const SampleSet samples = collocation_samples(space, inputs, oversample);
    const SnapshotMatrix snapshots = run_model(model, samples, threads);
    const auto t_snap = std::chrono::steady_clock::now();

    Hyperparameters hyper;
    hyper.tolerance_time = tolerance_time;
    hyper.tolerance_sample = tolerance_sample;
    hyper.oversample = oversample;
    hyper.seed = seed;

    BuildTiming local_timing;
    Surrogate surrogate =
        fit_surrogate(space, inputs, samples.unit_points, snapshots, model.times, hyper, threads, &local_timing);
    surrogate.problem = model.name;
    surrogate.grid_axes = model.grid_axes;

    if (timing) {
        timing->snapshot_seconds = detail::seconds_between(t0, t_snap);
        timing->decomposition_seconds = local_timing.decomposition_seconds;
        timing->regression_seconds = local_timing.regression_seconds;
        timing->total_seconds = detail::seconds_between(t0, std::chrono::steady_clock::now());
    }
    return surrogate;
}

namespace detail {

/// Temporal coefficient block at one parameter point: row l holds the
/// reconstructed time history of spatial mode l.
inline Eigen::MatrixXd temporal_block(const Surrogate& surrogate, const Eigen::VectorXd& xi) {
    if (xi.size() != surrogate.space.dim()) throw std::invalid_argument("evaluate: point dimension mismatch");
    for (Eigen::Index d = 0; d < xi.size(); ++d)
        if (!(xi(d) >= 0.0 && xi(d) <= 1.0)) throw std::invalid_argument("evaluate: point outside the unit cube");
    const auto element = locate_element(surrogate.space, xi);
    const Eigen::VectorXd basis_values = eval_local_basis(surrogate.space, element, xi);
    const int n_local = surrogate.space.local_count();
    Eigen::VectorXi globals(n_local);
    for (int j = 0; j < n_local; ++j) globals(j) = static_cast<int>(ien(surrogate.space, element, j));

    const Eigen::Index n_modes = surrogate.n_modes();
    Eigen::MatrixXd block(n_modes, surrogate.n_times());
    for (Eigen::Index mode = 0; mode < n_modes; ++mode) {
        const Eigen::MatrixXd& alpha = surrogate.coefficients[static_cast<std::size_t>(mode)];
        Eigen::VectorXd delta = Eigen::VectorXd::Zero(alpha.cols());
        for (int j = 0; j < n_local; ++j) delta.noalias() += basis_values(j) * alpha.row(globals(j)).transpose();
        block.row(mode) = (surrogate.temporal[static_cast<std::size_t>(mode)] * delta).transpose();
    }
    return block;
}

}  // namespace detail

/// Field history at unit point xi: n_nodes x n_times.
inline Eigen::MatrixXd evaluate(const Surrogate& surrogate, const Eigen::VectorXd& xi) {
    return surrogate.basis.modes * detail::temporal_block(surrogate, xi);
}

/// Values at selected (node, time) probes only; avoids forming the full field.
inline Eigen::VectorXd evaluate_at(const Surrogate& surrogate, const Eigen::VectorXd& xi,
                                   const std::vector<std::pair<Eigen::Index, Eigen::Index>>& probes) {
    const Eigen::MatrixXd block = detail::temporal_block(surrogate, xi);
    Eigen::VectorXd values(static_cast<Eigen::Index>(probes.size()));
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto [node, time] = probes[i];
        if (node < 0 || node >= surrogate.n_nodes() || time < 0 || time >= surrogate.n_times())
            throw std::invalid_argument("evaluate_at: probe index out of range");
        values(static_cast<Eigen::Index>(i)) = surrogate.basis.modes.row(node) * block.col(time);
    }
    return values;
}

/// Mean and standard deviation fields of the surrogate under the uniform
/// unit-cube parameter measure, by per-element Gauss quadrature of u and u^2.
/// The default p_d+1 points per dimension integrate both exactly for the
/// surrogate's polynomial parameter dependence. Tiny negative variances from
/// cancellation are clamped to zero.
inline FieldStatistics statistics(const Surrogate& surrogate, std::vector<int> points_per_dim = {}) {
    const BSplineSpace& space = surrogate.space;
    if (points_per_dim.empty()) {
        points_per_dim.resize(static_cast<std::size_t>(space.dim()));
        for (int d = 0; d < space.dim(); ++d) points_per_dim[static_cast<std::size_t>(d)] = space.degrees[d] + 1;
    }
    if (static_cast<int>(points_per_dim.size()) != space.dim())
        throw std::invalid_argument("statistics: points_per_dim size mismatch");
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(surrogate.n_nodes(), surrogate.n_times());
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(surrogate.n_nodes(), surrogate.n_times());
    for (std::int64_t e = 0; e < space.element_count(); ++e) {
        const QuadratureRule rule = element_quadrature(space, element_multi_index(space, e), points_per_dim);
        for (Eigen::Index q = 0; q < rule.weights.size(); ++q) {
            const Eigen::MatrixXd field = evaluate(surrogate, rule.nodes.col(q));
            mean.noalias() += rule.weights(q) * field;
            second.noalias() += rule.weights(q) * field.cwiseProduct(field);
        }
    }
    FieldStatistics stats;
    stats.mean = std::move(mean);
    stats.std_dev = (second - stats.mean.cwiseProduct(stats.mean)).cwiseMax(0.0).cwiseSqrt();
    return stats;
}

}  // namespace podbsbem
