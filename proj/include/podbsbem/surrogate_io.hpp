#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "podbsbem/common.hpp"
#include "podbsbem/rom.hpp"

namespace podbsbem {

static_assert(std::endian::native == std::endian::little,
              "surrogate container I/O assumes a little-endian host");

namespace detail {

inline constexpr const char* kSurrogateMagic = "podbsbem-surrogate";

struct ArrayEntry {
    std::string name;
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::int64_t offset = 0;  // bytes from payload start

    std::int64_t bytes() const { return rows * cols * static_cast<std::int64_t>(sizeof(double)); }
};

inline void write_exact(std::ostream& out, const void* data, std::streamsize bytes) {
    out.write(static_cast<const char*>(data), bytes);
    if (!out) throw io_error("surrogate write failed");
}

inline void read_exact(std::istream& in, void* data, std::streamsize bytes, const std::string& what) {
    in.read(static_cast<char*>(data), bytes);
    if (in.gcount() != bytes) throw io_error("surrogate read: truncated " + what);
}

inline nlohmann::json axes_to_json(const std::vector<Eigen::VectorXd>& axes) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& axis : axes) {
        nlohmann::json values = nlohmann::json::array();
        for (Eigen::Index i = 0; i < axis.size(); ++i) values.push_back(axis(i));
        out.push_back(std::move(values));
    }
    return out;
}

inline std::vector<Eigen::VectorXd> axes_from_json(const nlohmann::json& node) {
    std::vector<Eigen::VectorXd> axes;
    for (const auto& entry : node) {
        Eigen::VectorXd axis(static_cast<Eigen::Index>(entry.size()));
        Eigen::Index i = 0;
        for (const auto& value : entry) axis(i++) = value.get<double>();
        axes.push_back(std::move(axis));
    }
    return axes;
}

}  // namespace detail

/// Writes the surrogate container: a two-line text preamble (magic + header
/// byte count), a JSON metadata document with a declared shape table, then the
/// raw little-endian float64 column-major arrays. Byte-identical for equal
/// surrogates.
inline void save_surrogate(const std::string& path, const Surrogate& surrogate) {
    using nlohmann::json;

    std::vector<detail::ArrayEntry> table;
    std::vector<const Eigen::MatrixXd*> payload;
    Eigen::MatrixXd times = surrogate.times;
    Eigen::MatrixXd singular = surrogate.basis.singular_values;
    std::int64_t offset = 0;
    auto add = [&](const std::string& name, const Eigen::MatrixXd& matrix) {
        detail::ArrayEntry entry{name, matrix.rows(), matrix.cols(), offset};
        offset += entry.bytes();
        table.push_back(entry);
        payload.push_back(&matrix);
    };
    add("times", times);
    add("singular_values", singular);
    add("modes", surrogate.basis.modes);
    for (std::size_t l = 0; l < surrogate.temporal.size(); ++l)
        add("temporal_" + std::to_string(l), surrogate.temporal[l]);
    for (std::size_t l = 0; l < surrogate.coefficients.size(); ++l)
        add("coefficients_" + std::to_string(l), surrogate.coefficients[l]);

    json header;
    header["format"] = {{"name", detail::kSurrogateMagic},
                        {"version", kSurrogateFormatVersion},
                        {"endianness", "little"},
                        {"scalar", "float64"},
                        {"order", "column-major"}};
    header["artifact_version"] = kVersion;
    header["problem"] = {{"name", surrogate.problem}, {"grid_axes", detail::axes_to_json(surrogate.grid_axes)}};
    json inputs = json::array();
    for (const auto& parameter : surrogate.inputs.parameters)
        inputs.push_back({{"name", parameter.name},
                          {"distribution", "uniform"},
                          {"lower", parameter.lower},
                          {"upper", parameter.upper}});
    header["inputs"] = std::move(inputs);
    header["space"] = {{"degrees", surrogate.space.degrees}, {"elements", surrogate.space.elements}};
    header["hyper"] = {{"tolerance_time", surrogate.hyper.tolerance_time},
                       {"tolerance_sample", surrogate.hyper.tolerance_sample},
                       {"oversample", surrogate.hyper.oversample},
                       {"seed", surrogate.hyper.seed},
                       {"rng", surrogate.hyper.rng}};
    std::vector<std::int64_t> k_counts;
    for (const auto& temporal : surrogate.temporal) k_counts.push_back(temporal.cols());
    header["dims"] = {{"n_nodes", surrogate.n_nodes()},
                      {"n_times", surrogate.n_times()},
                      {"n_modes", surrogate.n_modes()},
                      {"n_global", surrogate.space.global_count()},
                      {"k_counts", k_counts},
                      {"numerical_rank", surrogate.basis.numerical_rank},
                      {"captured_energy", surrogate.basis.captured_energy}};
    header["rank_deficient"] = surrogate.rank_deficient;
    json arrays = json::array();
    for (const auto& entry : table)
        arrays.push_back(
            {{"name", entry.name}, {"rows", entry.rows}, {"cols", entry.cols}, {"offset", entry.offset}});
    header["arrays"] = std::move(arrays);
    header["payload_bytes"] = offset;

    const std::string text = header.dump(2);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("save_surrogate: cannot open " + path);
    out << detail::kSurrogateMagic << ' ' << kSurrogateFormatVersion << '\n' << text.size() << '\n';
    detail::write_exact(out, text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto* matrix : payload)
        detail::write_exact(out, matrix->data(),
                            static_cast<std::streamsize>(matrix->size()) * static_cast<std::streamsize>(sizeof(double)));
    out.flush();
    if (!out) throw io_error("save_surrogate: write failed for " + path);
}

inline Surrogate load_surrogate(const std::string& path) {
    using nlohmann::json;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("load_surrogate: cannot open " + path);

    std::string magic_line;
    if (!std::getline(in, magic_line)) throw io_error("load_surrogate: missing preamble in " + path);
    std::istringstream magic_stream(magic_line);
    std::string magic;
    int version = 0;
    magic_stream >> magic >> version;
    if (magic != detail::kSurrogateMagic) throw io_error("load_surrogate: not a surrogate container: " + path);
    if (version != kSurrogateFormatVersion)
        throw io_error("load_surrogate: unsupported container version " + std::to_string(version));

    std::string size_line;
    if (!std::getline(in, size_line)) throw io_error("load_surrogate: missing header length in " + path);
    const std::int64_t header_bytes = std::stoll(size_line);
    if (header_bytes <= 0) throw io_error("load_surrogate: invalid header length in " + path);
    std::string text(static_cast<std::size_t>(header_bytes), '\0');
    detail::read_exact(in, text.data(), header_bytes, "metadata document");

    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception& e) {
        throw io_error(std::string("load_surrogate: malformed metadata document: ") + e.what());
    }

    try {
        Surrogate surrogate;
        const auto& fmt = header.at("format");
        if (fmt.at("endianness") != "little" || fmt.at("scalar") != "float64" || fmt.at("order") != "column-major")
            throw io_error("load_surrogate: unsupported payload encoding");

        surrogate.problem = header.at("problem").at("name").get<std::string>();
        surrogate.grid_axes = detail::axes_from_json(header.at("problem").at("grid_axes"));
        for (const auto& entry : header.at("inputs"))
            surrogate.inputs.parameters.push_back(uniform_parameter(
                entry.at("name").get<std::string>(), entry.at("lower").get<double>(), entry.at("upper").get<double>()));
        surrogate.space = build_space(header.at("space").at("degrees").get<std::vector<int>>(),
                                      header.at("space").at("elements").get<std::vector<int>>());
        const auto& hyper = header.at("hyper");
        surrogate.hyper.tolerance_time = hyper.at("tolerance_time").get<double>();
        surrogate.hyper.tolerance_sample = hyper.at("tolerance_sample").get<double>();
        surrogate.hyper.oversample = hyper.at("oversample").get<int>();
        surrogate.hyper.seed = hyper.at("seed").get<std::uint64_t>();
        surrogate.hyper.rng = hyper.at("rng").get<std::string>();
        surrogate.rank_deficient = header.at("rank_deficient").get<bool>();

        const auto& dims = header.at("dims");
        const auto n_nodes = dims.at("n_nodes").get<Eigen::Index>();
        const auto n_times = dims.at("n_times").get<Eigen::Index>();
        const auto n_modes = dims.at("n_modes").get<Eigen::Index>();
        const auto k_counts = dims.at("k_counts").get<std::vector<std::int64_t>>();
        surrogate.basis.tolerance = surrogate.hyper.tolerance_sample;
        surrogate.basis.numerical_rank = dims.at("numerical_rank").get<Eigen::Index>();
        surrogate.basis.captured_energy = dims.at("captured_energy").get<double>();
        if (static_cast<Eigen::Index>(k_counts.size()) != n_modes)
            throw io_error("load_surrogate: k_counts length disagrees with n_modes");

        const std::int64_t payload_bytes = header.at("payload_bytes").get<std::int64_t>();
        std::vector<detail::ArrayEntry> table;
        for (const auto& entry : header.at("arrays"))
            table.push_back(detail::ArrayEntry{entry.at("name").get<std::string>(), entry.at("rows").get<std::int64_t>(),
                                               entry.at("cols").get<std::int64_t>(),
                                               entry.at("offset").get<std::int64_t>()});
        std::int64_t expected_offset = 0;
        for (const auto& entry : table) {
            if (entry.offset != expected_offset || entry.rows < 0 || entry.cols < 0)
                throw io_error("load_surrogate: inconsistent shape table");
            expected_offset += entry.bytes();
        }
        if (expected_offset != payload_bytes) throw io_error("load_surrogate: shape table does not cover the payload");

        auto read_matrix = [&](const detail::ArrayEntry& entry) {
            Eigen::MatrixXd matrix(entry.rows, entry.cols);
            detail::read_exact(in, matrix.data(), static_cast<std::streamsize>(entry.bytes()),
                               "array " + entry.name);
            return matrix;
        };
        std::size_t next = 0;
        auto take = [&](const std::string& name) {
            if (next >= table.size() || table[next].name != name)
                throw io_error("load_surrogate: shape table is missing array " + name);
            return read_matrix(table[next++]);
        };

        surrogate.times = take("times");
        surrogate.basis.singular_values = take("singular_values");
        surrogate.basis.modes = take("modes");
        surrogate.temporal.reserve(static_cast<std::size_t>(n_modes));
        for (Eigen::Index l = 0; l < n_modes; ++l) surrogate.temporal.push_back(take("temporal_" + std::to_string(l)));
        surrogate.coefficients.reserve(static_cast<std::size_t>(n_modes));
        for (Eigen::Index l = 0; l < n_modes; ++l)
            surrogate.coefficients.push_back(take("coefficients_" + std::to_string(l)));

        char extra = 0;
        if (in.read(&extra, 1) && in.gcount() == 1)
            throw io_error("load_surrogate: trailing bytes after declared payload");

        if (surrogate.basis.modes.rows() != n_nodes || surrogate.basis.modes.cols() != n_modes ||
            surrogate.times.size() != n_times)
            throw io_error("load_surrogate: array shapes disagree with declared dimensions");
        for (Eigen::Index l = 0; l < n_modes; ++l) {
            const auto& temporal = surrogate.temporal[static_cast<std::size_t>(l)];
            const auto& alpha = surrogate.coefficients[static_cast<std::size_t>(l)];
            if (temporal.rows() != n_times || temporal.cols() != k_counts[static_cast<std::size_t>(l)] ||
                alpha.rows() != surrogate.space.global_count() || alpha.cols() != temporal.cols())
                throw io_error("load_surrogate: array shapes disagree with declared dimensions");
        }
        return surrogate;
    } catch (const json::exception& e) {
        throw io_error(std::string("load_surrogate: metadata document incomplete: ") + e.what());
    }
}

}  // namespace podbsbem
