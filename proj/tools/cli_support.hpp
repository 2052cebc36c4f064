#pragma once

// Command implementations for the podbsbem tool. Everything here is
// deterministic by construction: CSV outputs depend only on the resolved
// configuration (never on wall time or thread count), while human-readable
// .txt reports carry the measured timings.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "podbsbem/baselines.hpp"
#include "podbsbem/metrics.hpp"
#include "podbsbem/problems.hpp"
#include "podbsbem/rom.hpp"
#include "podbsbem/surrogate_io.hpp"

namespace podbsbem::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
    std::string problem = "burgers";  // "ackley", "burgers", or a snapshot sidecar path
    double mean = 800.0;
    double cv = 0.25;
    int degree = 2;
    int elements = 10;
    double tolerance_time = 1e-10;
    double tolerance_sample = 1e-10;
    int oversample = 1;
    int pce_order = 6;
    int pce_oversampling = 2;
    std::string reference_scheme = "mc";
    long long reference_count = 20000;
    std::uint64_t seed = 7;
    std::string output_dir = "out";
    std::vector<double> sweep = {1e-3, 1e-5, 1e-8, 1e-10};
    std::vector<int> sweep_elements = {};
    int threads = default_thread_count();
};

/// Command-line values that take precedence over the config file.
struct Overrides {
    std::optional<std::string> problem, reference_scheme, output_dir;
    std::optional<double> mean, cv, tolerance_time, tolerance_sample;
    std::optional<int> degree, elements, oversample, pce_order, pce_oversampling, threads;
    std::optional<long long> reference_count;
    std::optional<std::uint64_t> seed;
    std::vector<double> sweep;
    std::vector<int> sweep_elements;
};

inline nlohmann::json to_json(const RunConfig& config) {
    nlohmann::json j;
    j["problem"] = config.problem;
    j["mean"] = config.mean;
    j["cv"] = config.cv;
    j["degree"] = config.degree;
    j["elements"] = config.elements;
    j["tolerance_time"] = config.tolerance_time;
    j["tolerance_sample"] = config.tolerance_sample;
    j["oversample"] = config.oversample;
    j["pce_order"] = config.pce_order;
    j["pce_oversampling"] = config.pce_oversampling;
    j["reference_scheme"] = config.reference_scheme;
    j["reference_count"] = config.reference_count;
    j["seed"] = config.seed;
    j["output_dir"] = config.output_dir;
    j["sweep"] = config.sweep;
    j["sweep_elements"] = config.sweep_elements;
    j["threads"] = config.threads;
    return j;
}

inline void apply_json(RunConfig& config, const nlohmann::json& file) {
    if (!file.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
    for (const auto& [key, value] : file.items()) {
        if (key == "problem")
            config.problem = value.get<std::string>();
        else if (key == "mean")
            config.mean = value.get<double>();
        else if (key == "cv")
            config.cv = value.get<double>();
        else if (key == "degree")
            config.degree = value.get<int>();
        else if (key == "elements")
            config.elements = value.get<int>();
        else if (key == "tolerance_time")
            config.tolerance_time = value.get<double>();
        else if (key == "tolerance_sample")
            config.tolerance_sample = value.get<double>();
        else if (key == "oversample")
            config.oversample = value.get<int>();
        else if (key == "pce_order")
            config.pce_order = value.get<int>();
        else if (key == "pce_oversampling")
            config.pce_oversampling = value.get<int>();
        else if (key == "reference_scheme")
            config.reference_scheme = value.get<std::string>();
        else if (key == "reference_count")
            config.reference_count = value.get<long long>();
        else if (key == "seed")
            config.seed = value.get<std::uint64_t>();
        else if (key == "output_dir")
            config.output_dir = value.get<std::string>();
        else if (key == "sweep")
            config.sweep = value.get<std::vector<double>>();
        else if (key == "sweep_elements")
            config.sweep_elements = value.get<std::vector<int>>();
        else if (key == "threads")
            config.threads = value.get<int>();
        else
            throw std::invalid_argument("config: unknown key \"" + key + "\"");
    }
}

inline void apply_overrides(RunConfig& config, const Overrides& o) {
    if (o.problem) config.problem = *o.problem;
    if (o.mean) config.mean = *o.mean;
    if (o.cv) config.cv = *o.cv;
    if (o.degree) config.degree = *o.degree;
    if (o.elements) config.elements = *o.elements;
    if (o.tolerance_time) config.tolerance_time = *o.tolerance_time;
    if (o.tolerance_sample) config.tolerance_sample = *o.tolerance_sample;
    if (o.oversample) config.oversample = *o.oversample;
    if (o.pce_order) config.pce_order = *o.pce_order;
    if (o.pce_oversampling) config.pce_oversampling = *o.pce_oversampling;
    if (o.reference_scheme) config.reference_scheme = *o.reference_scheme;
    if (o.reference_count) config.reference_count = *o.reference_count;
    if (o.seed) config.seed = *o.seed;
    if (o.output_dir) config.output_dir = *o.output_dir;
    if (!o.sweep.empty()) config.sweep = o.sweep;
    if (!o.sweep_elements.empty()) config.sweep_elements = o.sweep_elements;
    if (o.threads) config.threads = *o.threads;
}

inline RunConfig make_config(const std::string& config_path, const Overrides& overrides) {
    RunConfig config;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw io_error("cannot open config file " + config_path);
        nlohmann::json file;
        try {
            in >> file;
        } catch (const nlohmann::json::exception& error) {
            throw std::invalid_argument(config_path + ": " + error.what());
        }
        apply_json(config, file);
    }
    apply_overrides(config, overrides);
    return config;
}

inline bool builtin_problem(const std::string& name) { return name == "ackley" || name == "burgers"; }

inline void validate(const RunConfig& config) {
    if (config.problem.empty()) throw std::invalid_argument("config: problem must not be empty");
    if (builtin_problem(config.problem)) {
        if (!(config.mean > 0.0)) throw std::invalid_argument("config: mean must be positive");
        if (!(config.cv > 0.0)) throw std::invalid_argument("config: cv must be positive");
    }
    if (config.degree < 1) throw std::invalid_argument("config: degree must be >= 1");
    if (config.elements < 1) throw std::invalid_argument("config: elements must be >= 1");
    for (const auto [name, value] : {std::pair{"tolerance_time", config.tolerance_time},
                                     std::pair{"tolerance_sample", config.tolerance_sample}})
        if (!(value > 0.0) || !(value < 1.0))
            throw std::invalid_argument(std::string("config: ") + name + " must lie in (0,1)");
    if (config.oversample < 1) throw std::invalid_argument("config: oversample must be >= 1");
    if (config.pce_order < 0) throw std::invalid_argument("config: pce_order must be >= 0");
    if (config.pce_oversampling < 1) throw std::invalid_argument("config: pce_oversampling must be >= 1");
    if (!parse_scheme(config.reference_scheme).has_value() ||
        (config.reference_scheme != "mc" && config.reference_scheme != "lhs"))
        throw std::invalid_argument("config: reference_scheme must be mc or lhs");
    if (config.reference_count < 1) throw std::invalid_argument("config: reference_count must be >= 1");
    if (config.threads < 1) throw std::invalid_argument("config: threads must be >= 1");
    for (const double value : config.sweep)
        if (!(value > 0.0) || !(value < 1.0))
            throw std::invalid_argument("config: sweep tolerances must lie in (0,1)");
    for (const int value : config.sweep_elements)
        if (value < 1) throw std::invalid_argument("config: sweep_elements entries must be >= 1");
}

// ---------------------------------------------------------------------------
// Output helpers

inline std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return buffer;
}

inline std::string hash_string(const nlohmann::json& canonical) {
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical.dump())));
    return buffer;
}

inline void stamp(std::ostream& out, std::uint64_t seed, const std::string& config_hash) {
    out << "# podbsbem " << kVersion << "\n";
    out << "# artifact-version: " << kSurrogateFormatVersion << "\n";
    out << "# seed: " << seed << "\n";
    out << "# config: " << config_hash << "\n";
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw io_error("failed while writing " + path.string());
}

inline std::filesystem::path prepare_output_dir(const std::string& dir) {
    const std::filesystem::path path(dir);
    std::error_code error;
    std::filesystem::create_directories(path, error);
    if (error) throw io_error("cannot create output directory " + path.string() + ": " + error.message());
    return path;
}

/// Coordinate column labels for a node grid: none without axes, "x" for
/// one axis, "x,y" for two, "x0..x{d-1}" beyond that.
inline std::vector<std::string> axis_labels(const std::vector<Eigen::VectorXd>& axes) {
    if (axes.empty()) return {};
    if (axes.size() == 1) return {"x"};
    if (axes.size() == 2) return {"x", "y"};
    std::vector<std::string> labels;
    for (std::size_t d = 0; d < axes.size(); ++d) labels.push_back("x" + std::to_string(d));
    return labels;
}

/// Coordinates of one node of the tensor grid; the first axis varies fastest.
inline std::vector<double> node_coordinates(const std::vector<Eigen::VectorXd>& axes, Eigen::Index node) {
    std::vector<double> coords;
    Eigen::Index rest = node;
    for (const auto& axis : axes) {
        coords.push_back(axis(rest % axis.size()));
        rest /= axis.size();
    }
    return coords;
}

// ---------------------------------------------------------------------------
// Problem resolution

struct ProblemSetup {
    bool builtin = false;
    ModelSpec model;        // trajectory is empty for external snapshot sets
    UncertainInput inputs;
    SnapshotBundle bundle;  // populated for external snapshot sets
    std::string name;
};

inline ProblemSetup resolve_problem(const RunConfig& config) {
    ProblemSetup setup;
    if (builtin_problem(config.problem)) {
        setup.builtin = true;
        auto [model, inputs] = make_problem(config.problem, config.mean, config.cv);
        setup.model = std::move(model);
        setup.inputs = std::move(inputs);
        setup.name = config.problem;
    } else {
        setup.bundle = ingest_snapshots(config.problem);
        setup.inputs = setup.bundle.inputs;
        setup.name = setup.bundle.problem.empty() ? "external" : setup.bundle.problem;
    }
    return setup;
}

inline BSplineSpace config_space(const RunConfig& config, Eigen::Index dim, int elements_override = 0) {
    const int elements = elements_override > 0 ? elements_override : config.elements;
    return build_space(std::vector<int>(static_cast<std::size_t>(dim), config.degree),
                       std::vector<int>(static_cast<std::size_t>(dim), elements));
}

inline Hyperparameters config_hyper(const RunConfig& config) {
    Hyperparameters hyper;
    hyper.tolerance_time = config.tolerance_time;
    hyper.tolerance_sample = config.tolerance_sample;
    hyper.oversample = config.oversample;
    hyper.seed = config.seed;
    return hyper;
}

// ---------------------------------------------------------------------------
// build

inline int cmd_build(const RunConfig& config) {
    validate(config);
    const auto out_dir = prepare_output_dir(config.output_dir);
    const std::string config_hash = hash_string(to_json(config));

    const ProblemSetup setup = resolve_problem(config);
    BuildTiming timing;
    Surrogate surrogate;
    Eigen::Index n_samples = 0;
    if (setup.builtin) {
        const BSplineSpace space = config_space(config, setup.inputs.dim());
        surrogate = offline(setup.model, setup.inputs, space, config.tolerance_time, config.tolerance_sample,
                            config.seed, config.oversample, config.threads, &timing);
        Eigen::Index per_element = 1;
        for (Eigen::Index d = 0; d < space.dim(); ++d)
            per_element *= static_cast<Eigen::Index>(config.oversample) * (space.degrees[static_cast<std::size_t>(d)] + 1);
        n_samples = space.element_count() * per_element;
    } else {
        const BSplineSpace space = config_space(config, setup.inputs.dim());
        surrogate = fit_surrogate(space, setup.inputs, setup.bundle.unit_points, setup.bundle.snapshots,
                                  setup.bundle.times, config_hyper(config), config.threads, &timing);
        surrogate.problem = setup.name;
        surrogate.grid_axes = setup.bundle.grid_axes;
        n_samples = setup.bundle.snapshots.n_samples;
    }

    const auto surrogate_path = out_dir / "surrogate.pbs";
    save_surrogate(surrogate_path, surrogate);

    const auto report_path = out_dir / "build_report.txt";
    auto report = open_output(report_path);
    stamp(report, config.seed, config_hash);
    report << "problem: " << setup.name << "\n";
    report << "samples: " << n_samples << "\n";
    report << "spatial_modes: " << surrogate.n_modes() << "\n";
    report << "numerical_rank: " << surrogate.basis.numerical_rank << "\n";
    report << "captured_energy: " << format_double(surrogate.basis.captured_energy) << "\n";
    report << "rank_deficient: " << (surrogate.rank_deficient ? "yes" : "no") << "\n";
    report << "temporal_modes:";
    for (const auto& alpha : surrogate.coefficients) report << ' ' << alpha.cols();
    report << "\n";
    report << "global_basis_size: " << surrogate.space.global_count() << "\n";
    report << "snapshot_seconds: " << format_double(timing.snapshot_seconds) << "\n";
    report << "decomposition_seconds: " << format_double(timing.decomposition_seconds) << "\n";
    report << "regression_seconds: " << format_double(timing.regression_seconds) << "\n";
    report << "total_seconds: " << format_double(timing.total_seconds) << "\n";
    finish_output(report, report_path);

    std::cout << "built " << surrogate_path.string() << ": samples=" << n_samples
              << " modes=" << surrogate.n_modes() << " total_seconds=" << format_double(timing.total_seconds)
              << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// stats

inline void write_stats_csv(const std::filesystem::path& path, const Surrogate& surrogate,
                            const FieldStatistics& stats, std::uint64_t seed, const std::string& config_hash) {
    auto out = open_output(path);
    stamp(out, seed, config_hash);
    const auto labels = axis_labels(surrogate.grid_axes);
    out << "node_id";
    for (const auto& label : labels) out << ',' << label;
    out << ",t,mean,std\n";
    for (Eigen::Index t = 0; t < surrogate.n_times(); ++t) {
        for (Eigen::Index node = 0; node < surrogate.n_nodes(); ++node) {
            out << node;
            for (const double c : node_coordinates(surrogate.grid_axes, node)) out << ',' << format_double(c);
            out << ',' << format_double(surrogate.times(t)) << ',' << format_double(stats.mean(node, t)) << ','
                << format_double(stats.std_dev(node, t)) << "\n";
        }
    }
    finish_output(out, path);
}

inline int cmd_stats(const std::string& surrogate_file, const std::string& output_dir) {
    const Surrogate surrogate = load_surrogate(surrogate_file);
    const auto out_dir = prepare_output_dir(output_dir);
    nlohmann::json identity;
    identity["command"] = "stats";
    identity["problem"] = surrogate.problem;
    identity["n_nodes"] = surrogate.n_nodes();
    identity["n_times"] = surrogate.n_times();
    identity["n_modes"] = surrogate.n_modes();
    identity["tolerance_time"] = surrogate.hyper.tolerance_time;
    identity["tolerance_sample"] = surrogate.hyper.tolerance_sample;
    identity["seed"] = surrogate.hyper.seed;

    const FieldStatistics stats = statistics(surrogate);
    const auto csv_path = out_dir / "stats.csv";
    write_stats_csv(csv_path, surrogate, stats, surrogate.hyper.seed, hash_string(identity));
    std::cout << "wrote " << csv_path.string() << ": rows=" << surrogate.n_nodes() * surrogate.n_times() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

inline int cmd_eval(const std::string& surrogate_file, const std::vector<std::vector<double>>& unit_points,
                    const std::vector<std::vector<double>>& physical_points, const std::string& output_dir) {
    if (unit_points.empty() && physical_points.empty())
        throw std::invalid_argument("eval: provide at least one --xi or --eta point");
    if (!unit_points.empty() && !physical_points.empty())
        throw std::invalid_argument("eval: use either --xi or --eta, not both");

    const Surrogate surrogate = load_surrogate(surrogate_file);
    const Eigen::Index dim = surrogate.space.dim();
    const auto& raw = unit_points.empty() ? physical_points : unit_points;
    Eigen::MatrixXd points(dim, static_cast<Eigen::Index>(raw.size()));
    for (std::size_t j = 0; j < raw.size(); ++j) {
        if (static_cast<Eigen::Index>(raw[j].size()) != dim)
            throw std::invalid_argument("eval: point " + std::to_string(j) + " must have " + std::to_string(dim) +
                                        " entries");
        for (Eigen::Index d = 0; d < dim; ++d) points(d, static_cast<Eigen::Index>(j)) = raw[j][static_cast<std::size_t>(d)];
    }
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        for (Eigen::Index d = 0; d < dim; ++d) {
            const double value = points(d, j);
            if (unit_points.empty()) {
                const auto& parameter = surrogate.inputs.parameters[static_cast<std::size_t>(d)];
                if (!(value >= parameter.lower && value <= parameter.upper))
                    throw std::invalid_argument("eval: point " + std::to_string(j) + " coordinate " +
                                                std::to_string(d) + " lies outside the trained parameter range [" +
                                                format_double(parameter.lower) + ", " + format_double(parameter.upper) +
                                                "]");
            } else if (!(value >= 0.0 && value <= 1.0)) {
                throw std::invalid_argument("eval: point " + std::to_string(j) + " coordinate " + std::to_string(d) +
                                            " lies outside the unit cube");
            }
        }
    }
    if (unit_points.empty()) points = to_unit(surrogate.inputs, points);

    nlohmann::json identity;
    identity["command"] = "eval";
    identity["problem"] = surrogate.problem;
    identity["seed"] = surrogate.hyper.seed;
    identity["points"] = nlohmann::json::array();
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        nlohmann::json point = nlohmann::json::array();
        for (Eigen::Index d = 0; d < dim; ++d) point.push_back(points(d, j));
        identity["points"].push_back(std::move(point));
    }

    const auto out_dir = prepare_output_dir(output_dir);
    const auto csv_path = out_dir / "eval.csv";
    auto out = open_output(csv_path);
    stamp(out, surrogate.hyper.seed, hash_string(identity));
    out << "point_id,node_id,t,value\n";
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        const Eigen::MatrixXd field = evaluate(surrogate, points.col(j));
        for (Eigen::Index t = 0; t < field.cols(); ++t)
            for (Eigen::Index node = 0; node < field.rows(); ++node)
                out << j << ',' << node << ',' << format_double(surrogate.times(t)) << ','
                    << format_double(field(node, t)) << "\n";
    }
    finish_output(out, csv_path);
    std::cout << "wrote " << csv_path.string() << ": points=" << points.cols() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// ingest

inline int cmd_ingest(const std::string& input_path, const std::string& output_dir) {
    const SnapshotBundle bundle = ingest_snapshots(input_path);
    const auto out_dir = prepare_output_dir(output_dir);

    nlohmann::json identity;
    identity["command"] = "ingest";
    identity["problem"] = bundle.problem;
    identity["n_nodes"] = bundle.snapshots.n_nodes;
    identity["n_samples"] = bundle.snapshots.n_samples;
    identity["n_times"] = bundle.snapshots.n_times;
    identity["seed"] = bundle.seed;

    const auto report_path = out_dir / "ingest_report.txt";
    auto report = open_output(report_path);
    stamp(report, bundle.seed, hash_string(identity));
    report << "source: " << input_path << "\n";
    report << "problem: " << (bundle.problem.empty() ? "external" : bundle.problem) << "\n";
    report << "nodes: " << bundle.snapshots.n_nodes << "\n";
    report << "samples: " << bundle.snapshots.n_samples << "\n";
    report << "times: " << bundle.snapshots.n_times << "\n";
    report << "scheme: " << scheme_name(bundle.scheme) << "\n";
    report << "rng: " << bundle.rng << "\n";
    for (const auto& parameter : bundle.inputs.parameters)
        report << "parameter " << parameter.name << ": [" << format_double(parameter.lower) << ", "
               << format_double(parameter.upper) << "]\n";
    if (bundle.times.size() > 0)
        report << "time_range: [" << format_double(bundle.times.minCoeff()) << ", "
               << format_double(bundle.times.maxCoeff()) << "]\n";
    report << "values_ok: yes\n";
    finish_output(report, report_path);

    std::cout << "ingested " << input_path << ": nodes=" << bundle.snapshots.n_nodes
              << " samples=" << bundle.snapshots.n_samples << " times=" << bundle.snapshots.n_times << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

namespace detail {

struct BenchRow {
    std::string method;
    double parameter = 0.0;
    Eigen::Index size = 0;
    double mean_error = 0.0;
    double std_error = 0.0;
};

struct BenchTiming {
    std::string label;
    double offline_seconds = 0.0;
    double online_seconds = 0.0;
};

/// Relative error of a statistics field against the reference: maximum over
/// time levels when the problem is transient, plain relative error otherwise.
inline double field_error(const Eigen::MatrixXd& candidate, const Eigen::MatrixXd& reference) {
    if (reference.cols() > 1) return max_l2_over_time(candidate, reference).max_error;
    return l2_relative_error(candidate, reference);
}

inline double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

inline int cmd_bench(const RunConfig& config) {
    validate(config);
    if (!builtin_problem(config.problem))
        throw std::invalid_argument("bench: requires a built-in problem (ackley or burgers)");
    const bool sweep_by_elements = !config.sweep_elements.empty();
    if (!sweep_by_elements && config.sweep.empty())
        throw std::invalid_argument("config: sweep must not be empty");

    const auto out_dir = prepare_output_dir(config.output_dir);
    const std::string config_hash = hash_string(to_json(config));
    const ProblemSetup setup = resolve_problem(config);
    const ModelSpec& model = setup.model;
    const UncertainInput& inputs = setup.inputs;

    // Probe node and time for the density and history series: the midpoint of
    // a steady grid, or x ~ 0.57 at t ~ 0.3 for the transient problem.
    const Eigen::Index probe_node =
        model.times.size() > 1 ? (model.n_nodes - 1) * 57 / 100 : model.n_nodes / 2;
    const Eigen::Index probe_time =
        model.times.size() > 1 ? std::min<Eigen::Index>(model.times.size() - 1,
                                                        std::max<Eigen::Index>(0, (3 * model.times.size()) / 10 - 1))
                               : 0;

    const SampleScheme reference_scheme = *parse_scheme(config.reference_scheme);
    const std::uint64_t reference_seed = config.seed + 1000003;
    const ReferenceRun reference = reference_run(model, inputs, config.reference_count, reference_scheme,
                                                 reference_seed, config.threads, {{probe_node, probe_time}});

    std::vector<podbsbem::cli::detail::BenchRow> rows;
    std::vector<podbsbem::cli::detail::BenchTiming> timings;
    Surrogate finest;
    double finest_offline = 0.0;

    if (sweep_by_elements) {
        for (const int elements : config.sweep_elements) {
            const BSplineSpace space = config_space(config, inputs.dim(), elements);
            BuildTiming timing;
            const Surrogate surrogate = offline(model, inputs, space, config.tolerance_time,
                                                config.tolerance_sample, config.seed, config.oversample,
                                                config.threads, &timing);
            const auto t_online = std::chrono::steady_clock::now();
            const FieldStatistics stats = statistics(surrogate);
            const double online = podbsbem::cli::detail::elapsed_seconds(t_online);
            rows.push_back({"podbsbem", static_cast<double>(elements), surrogate.n_modes(),
                            podbsbem::cli::detail::field_error(stats.mean, reference.stats.mean),
                            podbsbem::cli::detail::field_error(stats.std_dev, reference.stats.std_dev)});
            timings.push_back({"podbsbem elements=" + std::to_string(elements), timing.total_seconds, online});
            finest = surrogate;
            finest_offline = timing.total_seconds;
        }
    } else {
        // One snapshot set serves the whole tolerance sweep; only the
        // decomposition and regression repeat.
        const BSplineSpace space = config_space(config, inputs.dim());
        const auto t_snapshots = std::chrono::steady_clock::now();
        const SampleSet samples = collocation_samples(space, inputs, config.oversample);
        const SnapshotMatrix snapshots = run_model(model, samples, config.threads);
        const double snapshot_seconds = podbsbem::cli::detail::elapsed_seconds(t_snapshots);
        for (const double tolerance : config.sweep) {
            Hyperparameters hyper = config_hyper(config);
            hyper.tolerance_time = tolerance;
            hyper.tolerance_sample = tolerance;
            BuildTiming timing;
            const Surrogate surrogate =
                fit_surrogate(space, inputs, samples.unit_points, snapshots, model.times, hyper, config.threads,
                              &timing);
            const auto t_online = std::chrono::steady_clock::now();
            FieldStatistics stats = statistics(surrogate);
            const double online = podbsbem::cli::detail::elapsed_seconds(t_online);
            rows.push_back({"podbsbem", tolerance, surrogate.n_modes(),
                            podbsbem::cli::detail::field_error(stats.mean, reference.stats.mean),
                            podbsbem::cli::detail::field_error(stats.std_dev, reference.stats.std_dev)});
            timings.push_back({"podbsbem tolerance=" + format_double(tolerance),
                               snapshot_seconds + timing.total_seconds, online});
            finest = surrogate;
            finest.problem = model.name;
            finest.grid_axes = model.grid_axes;
            finest_offline = snapshot_seconds + timing.total_seconds;
        }
    }

    {
        const auto t_pce = std::chrono::steady_clock::now();
        const PceExpansion expansion =
            pce_fit(model, inputs, config.pce_order, config.pce_oversampling, config.seed, config.threads);
        const double pce_offline = podbsbem::cli::detail::elapsed_seconds(t_pce);
        const auto t_online = std::chrono::steady_clock::now();
        const FieldStatistics stats = pce_statistics(expansion);
        const double online = podbsbem::cli::detail::elapsed_seconds(t_online);
        rows.push_back({"pce", static_cast<double>(config.pce_order),
                        static_cast<Eigen::Index>(expansion.index_set.size()),
                        podbsbem::cli::detail::field_error(stats.mean, reference.stats.mean),
                        podbsbem::cli::detail::field_error(stats.std_dev, reference.stats.std_dev)});
        timings.push_back({"pce order=" + std::to_string(config.pce_order), pce_offline, online});
    }

    // errors.csv: one row per sweep value plus the spectral baseline.
    const auto errors_path = out_dir / "errors.csv";
    {
        auto out = open_output(errors_path);
        stamp(out, config.seed, config_hash);
        out << "method,parameter,size,mean_error,std_error\n";
        for (const auto& row : rows)
            out << row.method << ',' << format_double(row.parameter) << ',' << row.size << ','
                << format_double(row.mean_error) << ',' << format_double(row.std_error) << "\n";
        finish_output(out, errors_path);
    }

    // kde.csv: response density at the probe, reference vs finest surrogate.
    const auto kde_path = out_dir / "kde.csv";
    {
        const Eigen::VectorXd reference_values = reference.probe_samples.col(0);
        const Eigen::Index kde_count = std::min<Eigen::Index>(config.reference_count, 10000);
        const SampleSet kde_samples = mc_sample(inputs, kde_count, config.seed + 2000003);
        Eigen::VectorXd surrogate_values(kde_count);
        for (Eigen::Index s = 0; s < kde_count; ++s)
            surrogate_values(s) =
                evaluate_at(finest, kde_samples.unit_points.col(s), {{probe_node, probe_time}})(0);
        const double lo = std::min(reference_values.minCoeff(), surrogate_values.minCoeff());
        const double hi = std::max(reference_values.maxCoeff(), surrogate_values.maxCoeff());
        const double pad = 0.1 * std::max(hi - lo, 1e-12);
        const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(201, lo - pad, hi + pad);
        const KdeResult reference_kde = gaussian_kde(reference_values, grid);
        const KdeResult surrogate_kde = gaussian_kde(surrogate_values, grid);
        auto out = open_output(kde_path);
        stamp(out, config.seed, config_hash);
        out << "value,reference_density,surrogate_density\n";
        for (Eigen::Index g = 0; g < grid.size(); ++g)
            out << format_double(grid(g)) << ',' << format_double(reference_kde.density(g)) << ','
                << format_double(surrogate_kde.density(g)) << "\n";
        finish_output(out, kde_path);
    }

    // cross_section.csv and time_history.csv from the finest surrogate.
    const FieldStatistics finest_stats = statistics(finest);
    const auto cross_path = out_dir / "cross_section.csv";
    {
        auto out = open_output(cross_path);
        stamp(out, config.seed, config_hash);
        const auto labels = axis_labels(finest.grid_axes);
        out << "node_id";
        for (const auto& label : labels) out << ',' << label;
        out << ",t,mean,std\n";
        const Eigen::Index t_last = finest.n_times() - 1;
        for (Eigen::Index node = 0; node < finest.n_nodes(); ++node) {
            out << node;
            for (const double c : node_coordinates(finest.grid_axes, node)) out << ',' << format_double(c);
            out << ',' << format_double(finest.times(t_last)) << ','
                << format_double(finest_stats.mean(node, t_last)) << ','
                << format_double(finest_stats.std_dev(node, t_last)) << "\n";
        }
        finish_output(out, cross_path);
    }
    const auto history_path = out_dir / "time_history.csv";
    {
        auto out = open_output(history_path);
        stamp(out, config.seed, config_hash);
        out << "node_id,t,mean,std\n";
        for (Eigen::Index t = 0; t < finest.n_times(); ++t)
            out << probe_node << ',' << format_double(finest.times(t)) << ','
                << format_double(finest_stats.mean(probe_node, t)) << ','
                << format_double(finest_stats.std_dev(probe_node, t)) << "\n";
        finish_output(out, history_path);
    }

    const auto timings_path = out_dir / "bench_timings.txt";
    {
        auto out = open_output(timings_path);
        stamp(out, config.seed, config_hash);
        out << "reference " << config.reference_scheme << " n=" << config.reference_count
            << ": wall_seconds=" << format_double(reference.wall_seconds) << "\n";
        for (const auto& timing : timings)
            out << timing.label << ": offline_seconds=" << format_double(timing.offline_seconds)
                << " online_seconds=" << format_double(timing.online_seconds) << "\n";
        const auto& last = timings[rows.size() >= 2 ? rows.size() - 2 : 0];
        const double surrogate_total = finest_offline + last.online_seconds;
        if (surrogate_total > 0.0)
            out << "speedup_vs_reference: " << format_double(reference.wall_seconds / surrogate_total) << "\n";
        finish_output(out, timings_path);
    }

    std::cout << "wrote " << errors_path.string() << " (" << rows.size() << " rows), " << kde_path.string()
              << ", " << cross_path.string() << ", " << history_path.string() << ", " << timings_path.string()
              << "\n";
    return kExitOk;
}

}  // namespace podbsbem::cli
