// podbsbem: build, query, and benchmark B-spline reduced-order surrogates
// for uncertainty propagation.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "cli_support.hpp"

namespace {

using podbsbem::cli::Overrides;

/// Parses one comma-separated coordinate list, e.g. "0.5,0.25,0.75".
std::vector<double> parse_point(const std::string& text) {
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string token = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        try {
            std::size_t used = 0;
            values.push_back(std::stod(token, &used));
            if (used != token.size()) throw std::invalid_argument(token);
        } catch (const std::exception&) {
            throw std::invalid_argument("invalid coordinate \"" + token + "\" in point \"" + text + "\"");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return values;
}

std::vector<std::vector<double>> parse_points(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> points;
    for (const auto& text : texts) points.push_back(parse_point(text));
    return points;
}

/// Registers the options shared by build and bench on one subcommand.
struct ConfigFlags {
    std::string config_path;

    void attach(CLI::App& cmd, Overrides& o) {
        cmd.add_option("--config", config_path, "JSON configuration file");
        cmd.add_option("--problem", o.problem, "ackley, burgers, or a snapshot sidecar path");
        cmd.add_option("--mean", o.mean, "mean of the uncertain physical parameter");
        cmd.add_option("--cv", o.cv, "coefficient of variation of the uncertain parameter");
        cmd.add_option("--degree", o.degree, "spline degree per direction");
        cmd.add_option("--elements", o.elements, "spline elements per direction");
        cmd.add_option("--tolerance-time", o.tolerance_time, "energy tolerance of the trajectory reduction");
        cmd.add_option("--tolerance-sample", o.tolerance_sample, "energy tolerance of the pooled reduction");
        cmd.add_option("--oversample", o.oversample, "collocation points per element, as a multiple of degree+1");
        cmd.add_option("--seed", o.seed, "random seed");
        cmd.add_option("--output-dir", o.output_dir, "directory for output files");
        cmd.add_option("--threads", o.threads, "worker threads (numerics are thread-count independent)");
    }

    void attach_bench(CLI::App& cmd, Overrides& o) {
        attach(cmd, o);
        cmd.add_option("--pce-order", o.pce_order, "total degree of the spectral baseline");
        cmd.add_option("--pce-oversampling", o.pce_oversampling, "design points per basis function");
        cmd.add_option("--reference-scheme", o.reference_scheme, "reference sampler: mc or lhs");
        cmd.add_option("--reference-count", o.reference_count, "reference sample count");
        cmd.add_option("--sweep", o.sweep, "energy tolerances to sweep")->delimiter(',');
        cmd.add_option("--sweep-elements", o.sweep_elements, "element counts to sweep")->delimiter(',');
    }
};

int dispatch(int argc, char** argv) {
    CLI::App app{"B-spline reduced-order surrogates for uncertainty propagation"};
    app.require_subcommand(1);

    auto* build = app.add_subcommand("build", "fit a surrogate and write its container file");
    Overrides build_overrides;
    ConfigFlags build_flags;
    build_flags.attach(*build, build_overrides);

    auto* stats = app.add_subcommand("stats", "tabulate mean and standard deviation fields of a surrogate");
    std::string stats_surrogate, stats_output = "out";
    stats->add_option("--surrogate", stats_surrogate, "surrogate container file")->required();
    stats->add_option("--output-dir", stats_output, "directory for output files");

    auto* bench = app.add_subcommand("bench", "sweep accuracy against a sampling reference");
    Overrides bench_overrides;
    ConfigFlags bench_flags;
    bench_flags.attach_bench(*bench, bench_overrides);

    auto* eval = app.add_subcommand("eval", "evaluate a surrogate at explicit parameter points");
    std::string eval_surrogate, eval_output = "out";
    std::vector<std::string> eval_xi, eval_eta;
    eval->add_option("--surrogate", eval_surrogate, "surrogate container file")->required();
    eval->add_option("--xi", eval_xi, "unit-cube point, comma separated; repeatable");
    eval->add_option("--eta", eval_eta, "physical point, comma separated; repeatable");
    eval->add_option("--output-dir", eval_output, "directory for output files");

    auto* ingest = app.add_subcommand("ingest", "validate an exported snapshot set and summarize it");
    std::string ingest_input, ingest_output = "out";
    ingest->add_option("--input", ingest_input, "snapshot sidecar (JSON) path")->required();
    ingest->add_option("--output-dir", ingest_output, "directory for output files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& error) {
        const int code = app.exit(error);
        return code == 0 ? podbsbem::cli::kExitOk : podbsbem::cli::kExitConfig;
    }

    if (build->parsed())
        return podbsbem::cli::cmd_build(podbsbem::cli::make_config(build_flags.config_path, build_overrides));
    if (stats->parsed()) return podbsbem::cli::cmd_stats(stats_surrogate, stats_output);
    if (bench->parsed())
        return podbsbem::cli::cmd_bench(podbsbem::cli::make_config(bench_flags.config_path, bench_overrides));
    if (eval->parsed())
        return podbsbem::cli::cmd_eval(eval_surrogate, parse_points(eval_xi), parse_points(eval_eta), eval_output);
    if (ingest->parsed()) return podbsbem::cli::cmd_ingest(ingest_input, ingest_output);
    return podbsbem::cli::kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const podbsbem::io_error& error) {
        std::cerr << "io error: " << error.what() << "\n";
        return podbsbem::cli::kExitIo;
    } catch (const podbsbem::numeric_error& error) {
        std::cerr << "numeric error: " << error.what() << "\n";
        return podbsbem::cli::kExitNumeric;
    } catch (const nlohmann::json::exception& error) {
        std::cerr << "config error: " << error.what() << "\n";
        return podbsbem::cli::kExitConfig;
    } catch (const std::invalid_argument& error) {
        std::cerr << "config error: " << error.what() << "\n";
        return podbsbem::cli::kExitConfig;
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << "\n";
        return 1;
    }
}
