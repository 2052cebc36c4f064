#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace podbsbem {

/// Dense snapshot collection. values is n_nodes x (n_samples * n_times) with
/// sample-major column blocks: columns [s*n_times, (s+1)*n_times) hold the
/// trajectory of sample s, one column per time level.
struct SnapshotMatrix {
    Eigen::MatrixXd values;
    Eigen::Index n_nodes = 0;
    Eigen::Index n_samples = 0;
    Eigen::Index n_times = 0;

    SnapshotMatrix() = default;

    SnapshotMatrix(Eigen::Index nodes, Eigen::Index samples, Eigen::Index times)
        : values(Eigen::MatrixXd::Zero(nodes, samples * times)),
          n_nodes(nodes),
          n_samples(samples),
          n_times(times) {
        if (nodes < 1 || samples < 1 || times < 1)
            throw std::invalid_argument("SnapshotMatrix: all dimensions must be positive");
    }

    auto sample_block(Eigen::Index sample) { return values.middleCols(sample * n_times, n_times); }

    auto sample_block(Eigen::Index sample) const { return values.middleCols(sample * n_times, n_times); }
};

}  // namespace podbsbem
