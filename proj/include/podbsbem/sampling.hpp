#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "podbsbem/common.hpp"
#include "podbsbem/splines.hpp"

namespace podbsbem {

enum class Distribution { uniform };

struct UncertainParameter {
    std::string name;
    Distribution distribution = Distribution::uniform;
    double lower = 0.0;
    double upper = 1.0;
};

inline UncertainParameter uniform_parameter(std::string name, double lower, double upper) {
    if (!(std::isfinite(lower) && std::isfinite(upper) && lower < upper))
        throw std::invalid_argument("uniform_parameter: bounds must be finite with lower < upper");
    return UncertainParameter{std::move(name), Distribution::uniform, lower, upper};
}

struct UncertainInput {
    std::vector<UncertainParameter> parameters;
    int dim() const { return static_cast<int>(parameters.size()); }
};

/// Marginal CDF value in [0,1]; clamped outside the support.
inline double cdf(const UncertainParameter& parameter, double eta) {
    const double xi = (eta - parameter.lower) / (parameter.upper - parameter.lower);
    return std::clamp(xi, 0.0, 1.0);
}

inline double inverse_cdf(const UncertainParameter& parameter, double xi) {
    if (!(xi >= 0.0 && xi <= 1.0)) throw std::invalid_argument("inverse_cdf: argument outside [0, 1]");
    return parameter.lower + xi * (parameter.upper - parameter.lower);
}

/// Uniform bounds with the given mean and coefficient of variation:
/// (mean - sqrt(3)*mean*cv, mean + sqrt(3)*mean*cv).
inline std::pair<double, double> bounds_from_moments(double mean, double cv) {
    if (!(mean > 0.0)) throw std::invalid_argument("bounds_from_moments: mean must be positive");
    if (!(cv > 0.0)) throw std::invalid_argument("bounds_from_moments: cv must be positive");
    const double half_width = std::sqrt(3.0) * mean * cv;
    return {mean - half_width, mean + half_width};
}

/// Seedable generator with reproducible draw primitives. The engine is the
/// standard mt19937_64; the uniform-double and bounded-integer mappings are
/// fixed here rather than taken from std::*_distribution, which is
/// implementation-defined and would break cross-toolchain reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double strictly inside (0, 1).
    double canonical() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound), Lemire multiply-shift with rejection.
    std::uint64_t bounded(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("Rng::bounded: bound must be positive");
        unsigned __int128 product = static_cast<unsigned __int128>(engine_()) * bound;
        auto low = static_cast<std::uint64_t>(product);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                product = static_cast<unsigned __int128>(engine_()) * bound;
                low = static_cast<std::uint64_t>(product);
            }
        }
        return static_cast<std::uint64_t>(product >> 64);
    }

    template <class T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i)
            std::swap(values[i - 1], values[static_cast<std::size_t>(bounded(i))]);
    }

private:
    std::mt19937_64 engine_;
};

enum class SampleScheme { monte_carlo, latin_hypercube, element_collocation, external };

inline const char* scheme_name(SampleScheme scheme) {
    switch (scheme) {
        case SampleScheme::monte_carlo: return "mc";
        case SampleScheme::latin_hypercube: return "lhs";
        case SampleScheme::element_collocation: return "element_collocation";
        case SampleScheme::external: return "external";
    }
    return "unknown";
}

inline std::optional<SampleScheme> parse_scheme(const std::string& name) {
    if (name == "mc") return SampleScheme::monte_carlo;
    if (name == "lhs") return SampleScheme::latin_hypercube;
    if (name == "element_collocation") return SampleScheme::element_collocation;
    if (name == "external") return SampleScheme::external;
    return std::nullopt;
}

/// A batch of parameter points. Columns are points: unit_points(d, j) in
/// [0,1]^m and physical_points(d, j) = inverse_cdf of it, when attached.
struct SampleSet {
    Eigen::MatrixXd unit_points;
    Eigen::MatrixXd physical_points;
    std::uint64_t seed = 0;
    SampleScheme scheme = SampleScheme::monte_carlo;
    std::string rng = kRngId;
};

inline Eigen::MatrixXd to_physical(const UncertainInput& input, const Eigen::MatrixXd& unit_points) {
    if (unit_points.rows() != input.dim())
        throw std::invalid_argument("to_physical: point dimension mismatch");
    Eigen::MatrixXd physical(unit_points.rows(), unit_points.cols());
    for (Eigen::Index j = 0; j < unit_points.cols(); ++j)
        for (int d = 0; d < input.dim(); ++d)
            physical(d, j) = inverse_cdf(input.parameters[static_cast<std::size_t>(d)], unit_points(d, j));
    return physical;
}

inline Eigen::MatrixXd to_unit(const UncertainInput& input, const Eigen::MatrixXd& physical_points) {
    if (physical_points.rows() != input.dim())
        throw std::invalid_argument("to_unit: point dimension mismatch");
    Eigen::MatrixXd unit(physical_points.rows(), physical_points.cols());
    for (Eigen::Index j = 0; j < physical_points.cols(); ++j)
        for (int d = 0; d < input.dim(); ++d)
            unit(d, j) = cdf(input.parameters[static_cast<std::size_t>(d)], physical_points(d, j));
    return unit;
}

inline void attach_physical(SampleSet& set, const UncertainInput& input) {
    set.physical_points = to_physical(input, set.unit_points);
}

/// Independent uniform draws. Engine consumption order: point by point,
/// dimension 1 first within a point.
inline SampleSet mc_sample(const UncertainInput& input, Eigen::Index count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("mc_sample: need at least one sample");
    if (input.dim() < 1) throw std::invalid_argument("mc_sample: need at least one parameter");
    Rng rng(seed);
    SampleSet set;
    set.seed = seed;
    set.scheme = SampleScheme::monte_carlo;
    set.unit_points.resize(input.dim(), count);
    for (Eigen::Index j = 0; j < count; ++j)
        for (int d = 0; d < input.dim(); ++d) set.unit_points(d, j) = rng.canonical();
    attach_physical(set, input);
    return set;
}

/// Latin hypercube design: per dimension, a random permutation assigns one
/// point to each of the n equal strata and the point sits at a uniformly
/// random position strictly inside its stratum. Engine consumption order:
/// dimension by dimension, permutation first, then the n offsets.
inline SampleSet lhs_sample(const UncertainInput& input, Eigen::Index count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("lhs_sample: need at least one sample");
    if (input.dim() < 1) throw std::invalid_argument("lhs_sample: need at least one parameter");
    Rng rng(seed);
    SampleSet set;
    set.seed = seed;
    set.scheme = SampleScheme::latin_hypercube;
    set.unit_points.resize(input.dim(), count);
    std::vector<std::int64_t> strata(static_cast<std::size_t>(count));
    for (int d = 0; d < input.dim(); ++d) {
        for (Eigen::Index j = 0; j < count; ++j) strata[static_cast<std::size_t>(j)] = j;
        rng.shuffle(strata);
        for (Eigen::Index j = 0; j < count; ++j)
            set.unit_points(d, j) =
                (static_cast<double>(strata[static_cast<std::size_t>(j)]) + rng.canonical()) / static_cast<double>(count);
    }
    attach_physical(set, input);
    return set;
}

/// Deterministic collocation points of one element: the tensor Gauss-Legendre
/// abscissae of oversample*(p_d+1) points per dimension, mapped into the
/// element's box. Strictly interior to the element; enumeration has dimension
/// 1 fastest. physical_points is left empty until attach_physical.
inline SampleSet element_collocation_points(const BSplineSpace& space, std::int64_t element_index,
                                            int oversample = 1) {
    if (oversample < 1) throw std::invalid_argument("element_collocation_points: oversample must be >= 1");
    const std::vector<int> element = element_multi_index(space, element_index);
    std::vector<int> per_dim(static_cast<std::size_t>(space.dim()));
    for (int d = 0; d < space.dim(); ++d) per_dim[static_cast<std::size_t>(d)] = oversample * (space.degrees[d] + 1);
    const QuadratureRule rule = element_quadrature(space, element, per_dim);
    SampleSet set;
    set.scheme = SampleScheme::element_collocation;
    set.unit_points = rule.nodes;
    return set;
}

}  // namespace podbsbem
