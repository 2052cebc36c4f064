#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "podbsbem/common.hpp"
#include "podbsbem/rom.hpp"
#include "podbsbem/sampling.hpp"
#include "podbsbem/snapshots.hpp"

namespace podbsbem {

// ---------------------------------------------------------------------------
// Ackley response surface: steady, two space dimensions, three uncertain
// coefficients. xi(0) perturbs the oscillation frequency, xi(1) the radial
// decay rate, xi(2) the well amplitude; each is uniform on [-1, 1].
// ---------------------------------------------------------------------------

inline double ackley_value(double x, double y, double xi1, double xi2, double xi3) {
    const double radial = std::sqrt(0.5 * (x * x + y * y));
    const double frequency = 2.0 * std::numbers::pi * (1.0 + 0.1 * xi1);
    return -20.0 * (1.0 + 0.1 * xi3) * std::exp(-0.2 * (1.0 + 0.1 * xi2) * radial) -
           std::exp(0.5 * (std::cos(frequency * x) + std::cos(frequency * y))) + 20.0 + std::numbers::e;
}

inline UncertainInput ackley_inputs() {
    UncertainInput input;
    input.parameters = {uniform_parameter("xi1", -1.0, 1.0), uniform_parameter("xi2", -1.0, 1.0),
                        uniform_parameter("xi3", -1.0, 1.0)};
    return input;
}

namespace detail {

inline Eigen::VectorXd ackley_radial_table(const Eigen::VectorXd& axis) {
    const Eigen::Index n = axis.size();
    Eigen::VectorXd radial(n * n);
    Eigen::Index node = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i, ++node)
            radial(node) = std::sqrt(0.5 * (axis(i) * axis(i) + axis(j) * axis(j)));
    return radial;
}

/// Field fill shared by ackley_field and the model factory. axis holds the
/// common x and y node coordinates, radial the precomputed distance table in
/// node order (x fastest). The cosine exponential is factored per axis; this
/// agrees with ackley_value up to rounding.
inline Eigen::VectorXd ackley_fill(const Eigen::VectorXd& axis, const Eigen::VectorXd& radial,
                                   const Eigen::VectorXd& xi) {
    if (xi.size() != 3) throw std::invalid_argument("ackley_fill: parameter point must have 3 entries");
    const Eigen::Index n = axis.size();
    const double frequency = 2.0 * std::numbers::pi * (1.0 + 0.1 * xi(0));
    const double rate = -0.2 * (1.0 + 0.1 * xi(1));
    const double amplitude = -20.0 * (1.0 + 0.1 * xi(2));
    Eigen::VectorXd half_cos_exp(n);
    for (Eigen::Index i = 0; i < n; ++i) half_cos_exp(i) = std::exp(0.5 * std::cos(frequency * axis(i)));
    Eigen::VectorXd field(n * n);
    Eigen::Index node = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double ey = half_cos_exp(j);
        for (Eigen::Index i = 0; i < n; ++i, ++node)
            field(node) = amplitude * std::exp(rate * radial(node)) - half_cos_exp(i) * ey + 20.0 + std::numbers::e;
    }
    return field;
}

}  // namespace detail

/// Ackley field over the tensor grid of nodes_per_axis^2 nodes on [-5,5]^2,
/// x varying fastest.
inline Eigen::VectorXd ackley_field(const Eigen::VectorXd& xi, Eigen::Index nodes_per_axis = 160) {
    if (nodes_per_axis < 2) throw std::invalid_argument("ackley_field: need at least 2 nodes per axis");
    const Eigen::VectorXd axis = Eigen::VectorXd::LinSpaced(nodes_per_axis, -5.0, 5.0);
    return detail::ackley_fill(axis, detail::ackley_radial_table(axis), xi);
}

/// Steady Ackley model: one time level over the square grid.
inline ModelSpec make_ackley_model(Eigen::Index nodes_per_axis = 160) {
    if (nodes_per_axis < 2) throw std::invalid_argument("make_ackley_model: need at least 2 nodes per axis");
    ModelSpec model;
    model.name = "ackley";
    model.n_nodes = nodes_per_axis * nodes_per_axis;
    model.times = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd axis = Eigen::VectorXd::LinSpaced(nodes_per_axis, -5.0, 5.0);
    model.grid_axes = {axis, axis};
    Eigen::VectorXd radial = detail::ackley_radial_table(axis);
    model.trajectory = [axis = std::move(axis), radial = std::move(radial)](const Eigen::VectorXd& eta) {
        return Eigen::MatrixXd(detail::ackley_fill(axis, radial, eta));
    };
    return model;
}

// ---------------------------------------------------------------------------
// Viscous Burgers front: exact solution of u_t + u u_x = u_xx / re on [0, 1]
// with u(x,0) = x / (1 + exp(re (4x^2 - 1) / 16)) and u(0,t) = u(1,t) = 0.
// The uncertain parameter is the Reynolds number re.
// ---------------------------------------------------------------------------

/// The exponent is assembled in log space and exponentiated once, so large re
/// cannot overflow an intermediate.
inline double burgers_exact(double x, double t, double re) {
    const double scale = 1.0 / (t + 1.0);
    const double log_gain = 0.5 * std::log1p(t) - re / 16.0;
    const double quad = re * (0.25 * scale);
    return x * scale / (1.0 + std::exp(log_gain + quad * (x * x)));
}

/// Uniform Reynolds-number parameter with the given mean and coefficient of
/// variation.
inline UncertainInput burgers_inputs(double mean_re, double cv) {
    const auto [lower, upper] = bounds_from_moments(mean_re, cv);
    UncertainInput input;
    input.parameters = {uniform_parameter("re", lower, upper)};
    return input;
}

/// Snapshot time levels t_j = j / n_times, j = 1..n_times: the initial
/// condition is excluded and the final time 1 is included.
inline Eigen::VectorXd burgers_times(Eigen::Index n_times = 50) {
    if (n_times < 1) throw std::invalid_argument("burgers_times: need at least one time level");
    Eigen::VectorXd times(n_times);
    for (Eigen::Index j = 0; j < n_times; ++j) times(j) = static_cast<double>(j + 1) / static_cast<double>(n_times);
    return times;
}

namespace detail {

inline void burgers_fill(const Eigen::VectorXd& nodes, const Eigen::VectorXd& times, double re,
                         Eigen::Ref<Eigen::MatrixXd> field) {
    for (Eigen::Index j = 0; j < times.size(); ++j) {
        const double t = times(j);
        const double scale = 1.0 / (t + 1.0);
        const double log_gain = 0.5 * std::log1p(t) - re / 16.0;
        const double quad = re * (0.25 * scale);
        for (Eigen::Index i = 0; i < nodes.size(); ++i) {
            const double x = nodes(i);
            field(i, j) = x * scale / (1.0 + std::exp(log_gain + quad * (x * x)));
        }
    }
}

}  // namespace detail

/// Burgers field on n_nodes equispaced nodes spanning [0,1], one column per
/// time level of burgers_times(n_times).
inline Eigen::MatrixXd burgers_field(double re, Eigen::Index n_nodes = 1000, Eigen::Index n_times = 50) {
    if (n_nodes < 2) throw std::invalid_argument("burgers_field: need at least 2 nodes");
    Eigen::MatrixXd field(n_nodes, n_times);
    detail::burgers_fill(Eigen::VectorXd::LinSpaced(n_nodes, 0.0, 1.0), burgers_times(n_times), re, field);
    return field;
}

inline ModelSpec make_burgers_model(Eigen::Index n_nodes = 1000, Eigen::Index n_times = 50) {
    if (n_nodes < 2) throw std::invalid_argument("make_burgers_model: need at least 2 nodes");
    ModelSpec model;
    model.name = "burgers";
    model.n_nodes = n_nodes;
    model.times = burgers_times(n_times);
    Eigen::VectorXd nodes = Eigen::VectorXd::LinSpaced(n_nodes, 0.0, 1.0);
    model.grid_axes = {nodes};
    model.trajectory = [nodes = std::move(nodes), times = model.times](const Eigen::VectorXd& eta) {
        if (eta.size() != 1) throw std::invalid_argument("burgers: parameter point must have 1 entry");
        Eigen::MatrixXd field(nodes.size(), times.size());
        detail::burgers_fill(nodes, times, eta(0), field);
        return field;
    };
    return model;
}

/// Built-in model lookup used by the command-line driver. mean_re and cv only
/// apply to the Burgers problem.
inline std::pair<ModelSpec, UncertainInput> make_problem(const std::string& name, double mean_re = 800.0,
                                                         double cv = 0.25) {
    if (name == "ackley") return {make_ackley_model(), ackley_inputs()};
    if (name == "burgers") return {make_burgers_model(), burgers_inputs(mean_re, cv)};
    throw std::invalid_argument("unknown problem: " + name);
}

// ---------------------------------------------------------------------------
// Snapshot exchange files: a JSON metadata sidecar next to a raw payload of
// little-endian float64 values, column-major, in the canonical sample-major
// column order. The payload file is referenced from the sidecar by name and
// resolved relative to the sidecar's directory.
// ---------------------------------------------------------------------------

/// A snapshot set with everything needed to fit a surrogate from it.
/// grid_axes is optional presentation metadata (empty when unknown).
struct SnapshotBundle {
    std::string problem;
    UncertainInput inputs;
    Eigen::VectorXd times;
    Eigen::MatrixXd unit_points;      // dim x n_samples, in [0,1]
    Eigen::MatrixXd physical_points;  // dim x n_samples
    SnapshotMatrix snapshots;
    std::vector<Eigen::VectorXd> grid_axes;
    SampleScheme scheme = SampleScheme::external;
    std::uint64_t seed = 0;
    std::string rng = kRngId;
};

namespace detail {

/// Rejects non-finite snapshot entries, citing the first bad location.
inline void check_snapshot_values(const SnapshotMatrix& snapshots, const std::string& context) {
    if (snapshots.values.allFinite()) return;
    for (Eigen::Index c = 0; c < snapshots.values.cols(); ++c)
        for (Eigen::Index i = 0; i < snapshots.values.rows(); ++i)
            if (!std::isfinite(snapshots.values(i, c))) {
                std::ostringstream message;
                message << context << ": non-finite value at node " << i << ", sample " << c / snapshots.n_times
                        << ", time index " << c % snapshots.n_times << " (column " << c << ")";
                throw io_error(message.str());
            }
}

inline void check_little_endian() {
    if constexpr (std::endian::native != std::endian::little)
        throw io_error("snapshot payload IO requires a little-endian host");
}

inline nlohmann::json points_to_json(const Eigen::MatrixXd& points) {
    nlohmann::json table = nlohmann::json::array();
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        nlohmann::json point = nlohmann::json::array();
        for (Eigen::Index d = 0; d < points.rows(); ++d) point.push_back(points(d, j));
        table.push_back(std::move(point));
    }
    return table;
}

inline Eigen::MatrixXd points_from_json(const nlohmann::json& table, Eigen::Index dim, Eigen::Index count,
                                        const std::string& what) {
    if (!table.is_array() || static_cast<Eigen::Index>(table.size()) != count) {
        std::ostringstream message;
        message << what << ": expected " << count << " points, found "
                << (table.is_array() ? std::to_string(table.size()) : std::string("non-array"));
        throw io_error(message.str());
    }
    Eigen::MatrixXd points(dim, count);
    for (Eigen::Index j = 0; j < count; ++j) {
        const auto& point = table[static_cast<std::size_t>(j)];
        if (!point.is_array() || static_cast<Eigen::Index>(point.size()) != dim) {
            std::ostringstream message;
            message << what << ": point " << j << " must have " << dim << " entries";
            throw io_error(message.str());
        }
        for (Eigen::Index d = 0; d < dim; ++d) {
            const auto& entry = point[static_cast<std::size_t>(d)];
            if (!entry.is_number() || !std::isfinite(entry.get<double>())) {
                std::ostringstream message;
                message << what << ": point " << j << " entry " << d << " is not a finite number";
                throw io_error(message.str());
            }
            points(d, j) = entry.get<double>();
        }
    }
    return points;
}

}  // namespace detail

/// Writes the metadata sidecar at metadata_path and the raw payload next to
/// it (same stem, .bin extension). Non-finite data is rejected up front so
/// every written pair can be ingested back.
inline void export_snapshots(const std::filesystem::path& metadata_path, const SnapshotBundle& bundle) {
    detail::check_little_endian();
    const Eigen::Index dim = bundle.inputs.dim();
    if (dim < 1) throw std::invalid_argument("export_snapshots: bundle has no parameters");
    const SnapshotMatrix& snapshots = bundle.snapshots;
    if (snapshots.n_nodes < 1 || snapshots.n_samples < 1 || snapshots.n_times < 1)
        throw std::invalid_argument("export_snapshots: empty snapshot matrix");
    if (bundle.times.size() != snapshots.n_times)
        throw std::invalid_argument("export_snapshots: time grid length disagrees with snapshots");
    if (bundle.unit_points.rows() != dim || bundle.unit_points.cols() != snapshots.n_samples ||
        bundle.physical_points.rows() != dim || bundle.physical_points.cols() != snapshots.n_samples)
        throw std::invalid_argument("export_snapshots: sample tables disagree with snapshot dimensions");
    if (!bundle.times.allFinite() || !bundle.unit_points.allFinite() || !bundle.physical_points.allFinite())
        throw std::invalid_argument("export_snapshots: non-finite sample metadata");
    if (!bundle.grid_axes.empty()) {
        Eigen::Index product = 1;
        for (const auto& axis : bundle.grid_axes) product *= axis.size();
        if (product != snapshots.n_nodes)
            throw std::invalid_argument("export_snapshots: grid axis sizes do not multiply to the node count");
    }
    detail::check_snapshot_values(snapshots, "export_snapshots");

    std::filesystem::path payload_path = metadata_path;
    payload_path.replace_extension(".bin");

    nlohmann::json meta;
    meta["format"] = "podbsbem-snapshots";
    meta["version"] = kSnapshotFormatVersion;
    meta["problem"] = bundle.problem;
    meta["n_nodes"] = snapshots.n_nodes;
    meta["n_samples"] = snapshots.n_samples;
    meta["n_times"] = snapshots.n_times;
    meta["ordering"] = "sample-major";
    meta["endianness"] = "little";
    meta["payload"] = payload_path.filename().string();
    meta["times"] = std::vector<double>(bundle.times.data(), bundle.times.data() + bundle.times.size());
    nlohmann::json parameters = nlohmann::json::array();
    for (const auto& parameter : bundle.inputs.parameters) {
        parameters.push_back({{"name", parameter.name},
                              {"distribution", "uniform"},
                              {"lower", parameter.lower},
                              {"upper", parameter.upper}});
    }
    meta["parameters"] = std::move(parameters);
    meta["physical_points"] = detail::points_to_json(bundle.physical_points);
    meta["unit_points"] = detail::points_to_json(bundle.unit_points);
    if (!bundle.grid_axes.empty()) {
        nlohmann::json axes = nlohmann::json::array();
        for (const auto& axis : bundle.grid_axes)
            axes.push_back(std::vector<double>(axis.data(), axis.data() + axis.size()));
        meta["grid_axes"] = std::move(axes);
    }
    meta["scheme"] = scheme_name(bundle.scheme);
    meta["seed"] = bundle.seed;
    meta["rng"] = bundle.rng;

    {
        std::ofstream out(metadata_path);
        if (!out) throw io_error("cannot open " + metadata_path.string() + " for writing");
        out << meta.dump(2) << '\n';
        if (!out) throw io_error("failed while writing " + metadata_path.string());
    }
    {
        std::ofstream out(payload_path, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open " + payload_path.string() + " for writing");
        const auto bytes = static_cast<std::streamsize>(sizeof(double) * snapshots.values.size());
        out.write(reinterpret_cast<const char*>(snapshots.values.data()), bytes);
        if (!out) throw io_error("failed while writing " + payload_path.string());
    }
}

/// Reads a sidecar/payload pair back into a bundle. The stored unit points
/// are used verbatim when present; otherwise they are derived from the
/// physical points through the parameter CDFs. Every declared dimension is
/// validated against the payload byte count and the payload is rejected if it
/// contains non-finite values.
inline SnapshotBundle ingest_snapshots(const std::filesystem::path& metadata_path) {
    detail::check_little_endian();
    std::ifstream in(metadata_path);
    if (!in) throw io_error("cannot open " + metadata_path.string());
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const nlohmann::json::exception& error) {
        throw io_error(metadata_path.string() + ": " + error.what());
    }

    try {
        if (meta.value("format", "") != "podbsbem-snapshots")
            throw io_error(metadata_path.string() + ": not a snapshot metadata file");
        const int version = meta.value("version", -1);
        if (version != kSnapshotFormatVersion) {
            std::ostringstream message;
            message << metadata_path.string() << ": unsupported version " << version << " (expected "
                    << kSnapshotFormatVersion << ")";
            throw io_error(message.str());
        }
        if (meta.value("ordering", "") != "sample-major")
            throw io_error(metadata_path.string() + ": unsupported ordering (expected sample-major)");
        if (meta.value("endianness", "") != "little")
            throw io_error(metadata_path.string() + ": unsupported endianness (expected little)");

        for (const char* key : {"n_nodes", "n_samples", "n_times"})
            if (!meta.contains(key) || !meta[key].is_number_integer() || meta[key].get<std::int64_t>() < 1)
                throw io_error(metadata_path.string() + ": " + key + " must be a positive integer");
        const auto n_nodes = meta["n_nodes"].get<Eigen::Index>();
        const auto n_samples = meta["n_samples"].get<Eigen::Index>();
        const auto n_times = meta["n_times"].get<Eigen::Index>();

        SnapshotBundle bundle;
        bundle.problem = meta.value("problem", "");
        bundle.seed = meta.value("seed", std::uint64_t{0});
        bundle.rng = meta.value("rng", std::string(kRngId));
        if (const auto scheme = parse_scheme(meta.value("scheme", std::string("external"))); scheme.has_value())
            bundle.scheme = *scheme;
        else
            throw io_error(metadata_path.string() + ": unknown sampling scheme " + meta["scheme"].get<std::string>());

        const auto times = meta.at("times").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(times.size()) != n_times)
            throw io_error(metadata_path.string() + ": time grid length disagrees with n_times");
        bundle.times = Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
        if (!bundle.times.allFinite()) throw io_error(metadata_path.string() + ": non-finite time value");

        const auto& parameters = meta.at("parameters");
        if (!parameters.is_array() || parameters.empty())
            throw io_error(metadata_path.string() + ": parameters must be a non-empty array");
        for (const auto& entry : parameters) {
            if (entry.value("distribution", "") != "uniform")
                throw io_error(metadata_path.string() + ": unsupported distribution (expected uniform)");
            bundle.inputs.parameters.push_back(uniform_parameter(
                entry.value("name", "parameter"), entry.at("lower").get<double>(), entry.at("upper").get<double>()));
        }
        const Eigen::Index dim = bundle.inputs.dim();

        bundle.physical_points =
            detail::points_from_json(meta.at("physical_points"), dim, n_samples, metadata_path.string() + ": physical_points");
        if (meta.contains("unit_points")) {
            bundle.unit_points =
                detail::points_from_json(meta["unit_points"], dim, n_samples, metadata_path.string() + ": unit_points");
            if ((bundle.unit_points.array() < 0.0).any() || (bundle.unit_points.array() > 1.0).any())
                throw io_error(metadata_path.string() + ": unit_points must lie in [0,1]");
        } else {
            bundle.unit_points = to_unit(bundle.inputs, bundle.physical_points);
        }

        if (meta.contains("grid_axes")) {
            Eigen::Index product = 1;
            for (const auto& axis_json : meta["grid_axes"]) {
                const auto axis = axis_json.get<std::vector<double>>();
                bundle.grid_axes.emplace_back(
                    Eigen::Map<const Eigen::VectorXd>(axis.data(), static_cast<Eigen::Index>(axis.size())));
                product *= bundle.grid_axes.back().size();
            }
            if (product != n_nodes)
                throw io_error(metadata_path.string() + ": grid axis sizes do not multiply to n_nodes");
        }

        const auto payload_name = meta.at("payload").get<std::string>();
        const std::filesystem::path payload_path = metadata_path.parent_path() / payload_name;
        const std::uintmax_t expected =
            sizeof(double) * static_cast<std::uintmax_t>(n_nodes) * static_cast<std::uintmax_t>(n_samples) *
            static_cast<std::uintmax_t>(n_times);
        std::error_code size_error;
        const std::uintmax_t actual = std::filesystem::file_size(payload_path, size_error);
        if (size_error) throw io_error("cannot stat " + payload_path.string() + ": " + size_error.message());
        if (actual != expected) {
            std::ostringstream message;
            message << payload_path.string() << ": expected " << expected << " bytes for " << n_nodes << " x "
                    << n_samples << " x " << n_times << " values, found " << actual;
            throw io_error(message.str());
        }

        bundle.snapshots = SnapshotMatrix(n_nodes, n_samples, n_times);
        std::ifstream payload(payload_path, std::ios::binary);
        if (!payload) throw io_error("cannot open " + payload_path.string());
        payload.read(reinterpret_cast<char*>(bundle.snapshots.values.data()),
                     static_cast<std::streamsize>(expected));
        if (!payload || payload.gcount() != static_cast<std::streamsize>(expected))
            throw io_error("failed while reading " + payload_path.string());
        detail::check_snapshot_values(bundle.snapshots, payload_path.string());
        return bundle;
    } catch (const nlohmann::json::exception& error) {
        throw io_error(metadata_path.string() + ": " + error.what());
    }
}

}  // namespace podbsbem
