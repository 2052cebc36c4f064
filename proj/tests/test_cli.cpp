#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "podbsbem/problems.hpp"
#include "podbsbem/rom.hpp"
#include "podbsbem/surrogate_io.hpp"

using namespace podbsbem;

namespace {

std::string cli_path() {
    if (const char* env = std::getenv("PODBSBEM_CLI_PATH_OVERRIDE")) return env;
#ifdef PODBSBEM_CLI_PATH
    return PODBSBEM_CLI_PATH;
#else
    FAIL("PODBSBEM_CLI_PATH not defined");
    return {};
#endif
}

struct RunResult {
    int exit_code = -1;
    std::string output;
};

std::string shell_quote(const std::string& text) {
    std::string quoted = "'";
    for (const char c : text) {
        if (c == '\'')
            quoted += "'\\''";
        else
            quoted += c;
    }
    quoted += "'";
    return quoted;
}

RunResult run_cli(const std::vector<std::string>& args) {
    std::string command = shell_quote(cli_path());
    for (const auto& arg : args) command += " " + shell_quote(arg);
    command += " 2>&1";
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    char buffer[4096];
    while (std::size_t got = std::fread(buffer, 1, sizeof buffer, pipe)) result.output.append(buffer, got);
    const int status = pclose(pipe);
    result.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    return result;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const char* name) : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    REQUIRE(out.good());
}

std::string small_config_json(const std::filesystem::path& out_dir, int threads = 1) {
    std::ostringstream json;
    json << "{\n"
         << "  \"problem\": \"burgers\",\n"
         << "  \"mean\": 800.0,\n"
         << "  \"cv\": 0.25,\n"
         << "  \"degree\": 2,\n"
         << "  \"elements\": 3,\n"
         << "  \"tolerance_time\": 1e-8,\n"
         << "  \"tolerance_sample\": 1e-8,\n"
         << "  \"seed\": 11,\n"
         << "  \"threads\": " << threads << ",\n"
         << "  \"output_dir\": \"" << out_dir.string() << "\"\n"
         << "}\n";
    return json.str();
}

std::string format_seventeen(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return buffer;
}

long count_lines(const std::string& text) {
    long lines = 0;
    for (const char c : text)
        if (c == '\n') ++lines;
    return lines;
}

}  // namespace

TEST_CASE("build produces the container and a report, bitwise equal to the library pipeline") {
    const TempDir dir("podbsbem_cli_build");
    const auto config_path = dir.path / "config.json";
    write_file(config_path, small_config_json(dir.path / "out"));

    const RunResult run = run_cli({"build", "--config", config_path.string()});
    INFO(run.output);
    REQUIRE(run.exit_code == 0);
    REQUIRE(std::filesystem::exists(dir.path / "out" / "surrogate.pbs"));

    const std::string report = read_file(dir.path / "out" / "build_report.txt");
    CHECK(report.find("samples: 9") != std::string::npos);
    CHECK(report.find("spatial_modes: ") != std::string::npos);
    CHECK(report.find("# seed: 11") != std::string::npos);
    CHECK(report.find("# artifact-version: 1") != std::string::npos);

    // The same fit through the library, saved with the same writer, must give
    // the same bytes.
    const auto [model, inputs] = make_problem("burgers", 800.0, 0.25);
    const BSplineSpace space = build_space({2}, {3});
    Surrogate surrogate = offline(model, inputs, space, 1e-8, 1e-8, 11);
    const auto reference_path = dir.path / "reference.pbs";
    save_surrogate(reference_path, surrogate);
    CHECK(read_file(dir.path / "out" / "surrogate.pbs") == read_file(reference_path));
}

TEST_CASE("repeated runs with one configuration are byte-identical") {
    const TempDir dir("podbsbem_cli_repeat");
    for (const char* run_name : {"a", "b"}) {
        const auto config_path = dir.path / (std::string("config_") + run_name + ".json");
        write_file(config_path, small_config_json(dir.path / run_name));
        const RunResult built = run_cli({"build", "--config", config_path.string()});
        INFO(built.output);
        REQUIRE(built.exit_code == 0);
        const RunResult tabulated =
            run_cli({"stats", "--surrogate", (dir.path / run_name / "surrogate.pbs").string(), "--output-dir",
                     (dir.path / run_name).string()});
        INFO(tabulated.output);
        REQUIRE(tabulated.exit_code == 0);
    }
    CHECK(read_file(dir.path / "a" / "surrogate.pbs") == read_file(dir.path / "b" / "surrogate.pbs"));
    CHECK(read_file(dir.path / "a" / "stats.csv") == read_file(dir.path / "b" / "stats.csv"));
}

TEST_CASE("thread count changes nothing but the wall time") {
    const TempDir dir("podbsbem_cli_threads");
    for (const int threads : {1, 2}) {
        const auto out_dir = dir.path / std::to_string(threads);
        const auto config_path = dir.path / ("config_" + std::to_string(threads) + ".json");
        write_file(config_path, small_config_json(out_dir, threads));
        const RunResult run = run_cli({"build", "--config", config_path.string()});
        INFO(run.output);
        REQUIRE(run.exit_code == 0);
    }
    CHECK(read_file(dir.path / "1" / "surrogate.pbs") == read_file(dir.path / "2" / "surrogate.pbs"));
}

TEST_CASE("stats tabulates every node at every time level") {
    const TempDir dir("podbsbem_cli_stats");
    const auto config_path = dir.path / "config.json";
    write_file(config_path, small_config_json(dir.path / "out"));
    REQUIRE(run_cli({"build", "--config", config_path.string()}).exit_code == 0);

    const RunResult run = run_cli({"stats", "--surrogate", (dir.path / "out" / "surrogate.pbs").string(),
                                   "--output-dir", (dir.path / "out").string()});
    INFO(run.output);
    REQUIRE(run.exit_code == 0);
    const std::string csv = read_file(dir.path / "out" / "stats.csv");
    // 4 stamp lines + 1 header + 1000 nodes x 50 times.
    CHECK(count_lines(csv) == 4 + 1 + 1000 * 50);
    CHECK(csv.find("node_id,x,t,mean,std\n") != std::string::npos);
    CHECK(csv.find("# config: fnv1a64:") != std::string::npos);
    // First data row: node 0 at x = 0 and the first time level 0.02.
    const std::size_t header_end = csv.find("node_id,x,t,mean,std\n");
    const std::string first_row = csv.substr(header_end + std::string("node_id,x,t,mean,std\n").size(), 12);
    CHECK(first_row.rfind("0,0,0.02", 0) == 0);
}

TEST_CASE("configuration and file errors use distinct exit codes") {
    const TempDir dir("podbsbem_cli_errors");

    SECTION("an out-of-range tolerance is a configuration error") {
        const RunResult run = run_cli({"build", "--problem", "burgers", "--tolerance-sample", "1.5",
                                       "--output-dir", (dir.path / "out").string()});
        INFO(run.output);
        CHECK(run.exit_code == 2);
    }
    SECTION("an unknown configuration key is rejected") {
        const auto config_path = dir.path / "config.json";
        write_file(config_path, "{\"tolerance\": 1e-5}\n");
        const RunResult run = run_cli({"build", "--config", config_path.string()});
        INFO(run.output);
        CHECK(run.exit_code == 2);
        CHECK(run.output.find("unknown key") != std::string::npos);
    }
    SECTION("malformed JSON in the config file is a configuration error") {
        const auto config_path = dir.path / "config.json";
        write_file(config_path, "{ not json\n");
        CHECK(run_cli({"build", "--config", config_path.string()}).exit_code == 2);
    }
    SECTION("a missing config file is an IO error") {
        CHECK(run_cli({"build", "--config", (dir.path / "absent.json").string()}).exit_code == 3);
    }
    SECTION("a missing surrogate file is an IO error") {
        CHECK(run_cli({"stats", "--surrogate", (dir.path / "absent.pbs").string()}).exit_code == 3);
    }
    SECTION("an unknown flag is a configuration error") {
        CHECK(run_cli({"build", "--frobnicate"}).exit_code == 2);
    }
    SECTION("help exits cleanly") {
        CHECK(run_cli({"--help"}).exit_code == 0);
    }
}

TEST_CASE("a container from a different format version is refused") {
    const TempDir dir("podbsbem_cli_version");
    const auto config_path = dir.path / "config.json";
    write_file(config_path, small_config_json(dir.path / "out"));
    REQUIRE(run_cli({"build", "--config", config_path.string()}).exit_code == 0);

    std::string bytes = read_file(dir.path / "out" / "surrogate.pbs");
    const std::string magic = "podbsbem-surrogate 1";
    REQUIRE(bytes.rfind(magic, 0) == 0);
    bytes[magic.size() - 1] = '9';
    const auto patched = dir.path / "patched.pbs";
    write_file(patched, bytes);

    const RunResult run = run_cli({"stats", "--surrogate", patched.string()});
    INFO(run.output);
    CHECK(run.exit_code == 3);
    CHECK(run.output.find("version") != std::string::npos);
}

TEST_CASE("the ingest, build, and stats pipeline matches the in-memory fit") {
    const TempDir dir("podbsbem_cli_pipeline");

    // Synthesize an exported snapshot set from scattered samples.
    const ModelSpec model = make_burgers_model(40, 6);
    const UncertainInput inputs = burgers_inputs(200.0, 0.25);
    const SampleSet samples = lhs_sample(inputs, 60, 13);
    SnapshotBundle bundle;
    bundle.problem = "burgers";
    bundle.inputs = inputs;
    bundle.times = model.times;
    bundle.unit_points = samples.unit_points;
    bundle.physical_points = samples.physical_points;
    bundle.snapshots = run_model(model, samples);
    bundle.grid_axes = model.grid_axes;
    bundle.scheme = samples.scheme;
    bundle.seed = 13;
    const auto sidecar = dir.path / "snapshots.json";
    export_snapshots(sidecar, bundle);

    const RunResult ingested =
        run_cli({"ingest", "--input", sidecar.string(), "--output-dir", (dir.path / "out").string()});
    INFO(ingested.output);
    REQUIRE(ingested.exit_code == 0);
    const std::string report = read_file(dir.path / "out" / "ingest_report.txt");
    CHECK(report.find("samples: 60") != std::string::npos);
    CHECK(report.find("scheme: lhs") != std::string::npos);

    const RunResult built = run_cli({"build", "--problem", sidecar.string(), "--degree", "2", "--elements", "3",
                                     "--tolerance-time", "1e-8", "--tolerance-sample", "1e-8", "--seed", "11",
                                     "--output-dir", (dir.path / "out").string()});
    INFO(built.output);
    REQUIRE(built.exit_code == 0);

    // The same fit straight from the in-memory bundle.
    const BSplineSpace space = build_space({2}, {3});
    Hyperparameters hyper;
    hyper.tolerance_time = 1e-8;
    hyper.tolerance_sample = 1e-8;
    hyper.seed = 11;
    Surrogate surrogate =
        fit_surrogate(space, bundle.inputs, bundle.unit_points, bundle.snapshots, bundle.times, hyper);
    surrogate.problem = bundle.problem;
    surrogate.grid_axes = bundle.grid_axes;
    const auto reference_path = dir.path / "reference.pbs";
    save_surrogate(reference_path, surrogate);
    CHECK(read_file(dir.path / "out" / "surrogate.pbs") == read_file(reference_path));

    const RunResult tabulated = run_cli({"stats", "--surrogate", (dir.path / "out" / "surrogate.pbs").string(),
                                         "--output-dir", (dir.path / "out").string()});
    INFO(tabulated.output);
    REQUIRE(tabulated.exit_code == 0);
    CHECK(count_lines(read_file(dir.path / "out" / "stats.csv")) == 4 + 1 + 40 * 6);

    SECTION("ingest of a missing sidecar is an IO error") {
        CHECK(run_cli({"ingest", "--input", (dir.path / "absent.json").string()}).exit_code == 3);
    }
}

TEST_CASE("eval reproduces the library evaluation at explicit points") {
    const TempDir dir("podbsbem_cli_eval");
    const auto config_path = dir.path / "config.json";
    write_file(config_path, small_config_json(dir.path / "out"));
    REQUIRE(run_cli({"build", "--config", config_path.string()}).exit_code == 0);
    const auto surrogate_path = dir.path / "out" / "surrogate.pbs";
    const Surrogate surrogate = load_surrogate(surrogate_path);

    // Probe the first stored collocation point.
    const SampleSet collocation = collocation_samples(surrogate.space, surrogate.inputs, 1);
    const double xi = collocation.unit_points(0, 0);
    const RunResult run = run_cli({"eval", "--surrogate", surrogate_path.string(), "--xi", format_seventeen(xi),
                                   "--output-dir", (dir.path / "out").string()});
    INFO(run.output);
    REQUIRE(run.exit_code == 0);

    const std::string csv = read_file(dir.path / "out" / "eval.csv");
    CHECK(count_lines(csv) == 4 + 1 + 1000 * 50);

    Eigen::VectorXd point(1);
    point << xi;
    const Eigen::MatrixXd expected = evaluate(surrogate, point);

    // Parse the first data row: point 0, node 0, first time level.
    std::istringstream lines(csv);
    std::string line;
    for (int i = 0; i < 5; ++i) std::getline(lines, line);  // skip stamp + header
    std::getline(lines, line);
    double value = 0.0, t = 0.0;
    int point_id = -1, node_id = -1;
    REQUIRE(std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &point_id, &node_id, &t, &value) == 4);
    CHECK(point_id == 0);
    CHECK(node_id == 0);
    CHECK(t == Catch::Approx(0.02).margin(1e-15));
    CHECK(value == Catch::Approx(expected(0, 0)).margin(1e-15));

    // A representative later row: node 777 at the last time level.
    const std::string needle = "\n0,777," + format_seventeen(surrogate.times(49)) + ",";
    const std::size_t at = csv.find(needle);
    REQUIRE(at != std::string::npos);
    const std::size_t value_begin = at + needle.size();
    const double late = std::strtod(csv.c_str() + value_begin, nullptr);
    CHECK(late == Catch::Approx(expected(777, 49)).margin(1e-15));

    SECTION("a unit point outside the support is a configuration error") {
        CHECK(run_cli({"eval", "--surrogate", surrogate_path.string(), "--xi", "1.5"}).exit_code == 2);
    }
    SECTION("a physical point outside the parameter range is a configuration error") {
        CHECK(run_cli({"eval", "--surrogate", surrogate_path.string(), "--eta", "5000"}).exit_code == 2);
    }
    SECTION("eval without points is a configuration error") {
        CHECK(run_cli({"eval", "--surrogate", surrogate_path.string()}).exit_code == 2);
    }
}

TEST_CASE("bench sweeps tolerances against a sampling reference") {
    const TempDir dir("podbsbem_cli_bench");
    const auto out_dir = dir.path / "out";
    std::ostringstream config;
    config << "{\n"
           << "  \"problem\": \"burgers\",\n"
           << "  \"mean\": 800.0,\n"
           << "  \"cv\": 0.25,\n"
           << "  \"degree\": 2,\n"
           << "  \"elements\": 3,\n"
           << "  \"sweep\": [1e-3, 1e-8],\n"
           << "  \"pce_order\": 3,\n"
           << "  \"pce_oversampling\": 2,\n"
           << "  \"reference_scheme\": \"mc\",\n"
           << "  \"reference_count\": 500,\n"
           << "  \"seed\": 11,\n"
           << "  \"threads\": 1,\n"
           << "  \"output_dir\": \"" << out_dir.string() << "\"\n"
           << "}\n";
    const auto config_path = dir.path / "config.json";
    write_file(config_path, config.str());

    const RunResult run = run_cli({"bench", "--config", config_path.string()});
    INFO(run.output);
    REQUIRE(run.exit_code == 0);

    const std::string errors = read_file(out_dir / "errors.csv");
    CHECK(count_lines(errors) == 4 + 1 + 3);  // two sweep rows plus the spectral baseline
    CHECK(errors.find("method,parameter,size,mean_error,std_error\n") != std::string::npos);
    CHECK(errors.find("podbsbem,0.001,") != std::string::npos);
    CHECK(errors.find("podbsbem,1e-08,") != std::string::npos);
    CHECK(errors.find("pce,3,") != std::string::npos);

    // Both surrogate rows must beat 10% relative error on the mean field.
    std::istringstream lines(errors);
    std::string line;
    int surrogate_rows = 0;
    while (std::getline(lines, line)) {
        if (line.rfind("podbsbem,", 0) != 0) continue;
        ++surrogate_rows;
        double parameter = 0.0, mean_error = 0.0, std_error = 0.0;
        long size = 0;
        REQUIRE(std::sscanf(line.c_str(), "podbsbem,%lf,%ld,%lf,%lf", &parameter, &size, &mean_error,
                            &std_error) == 4);
        CHECK(size > 0);
        CHECK(mean_error < 0.1);
        CHECK(std_error < 1.0);
    }
    CHECK(surrogate_rows == 2);

    CHECK(count_lines(read_file(out_dir / "kde.csv")) == 4 + 1 + 201);
    CHECK(count_lines(read_file(out_dir / "cross_section.csv")) == 4 + 1 + 1000);
    CHECK(count_lines(read_file(out_dir / "time_history.csv")) == 4 + 1 + 50);
    const std::string timings = read_file(out_dir / "bench_timings.txt");
    CHECK(timings.find("reference mc n=500") != std::string::npos);
    CHECK(timings.find("speedup_vs_reference:") != std::string::npos);

    SECTION("an empty sweep is a configuration error") {
        const auto empty_path = dir.path / "empty.json";
        std::string empty_config = config.str();
        const std::size_t at = empty_config.find("[1e-3, 1e-8]");
        REQUIRE(at != std::string::npos);
        empty_config.replace(at, std::string("[1e-3, 1e-8]").size(), "[]");
        write_file(empty_path, empty_config);
        CHECK(run_cli({"bench", "--config", empty_path.string()}).exit_code == 2);
    }
    SECTION("bench refuses external snapshot problems") {
        CHECK(run_cli({"bench", "--problem", (dir.path / "snapshots.json").string()}).exit_code == 2);
    }
}
