#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "subsea/core/errors.hpp"
#include "subsea/core/random.hpp"
#include "subsea/nn/adam.hpp"
#include "subsea/nn/dense_network.hpp"

namespace subsea::nn {

/// Column-per-sample regression data.
struct RegressionData {
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd targets;

    Eigen::Index size() const { return inputs.cols(); }
};

struct RegressionConfig {
    int epochs = 100;
    int batch_size = 32;
    AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
    std::uint64_t seed = 0;
};

struct RegressionResult {
    DenseNetwork net;
    /// Full-training-set MSE evaluated after each epoch; entry 0 is before training.
    std::vector<double> loss_history;
};

inline double mean_squared_error(const DenseNetwork& net, const RegressionData& data) {
    const Eigen::MatrixXd diff = net.forward_batch(data.inputs) - data.targets;
    return diff.squaredNorm() / static_cast<double>(diff.size());
}

/// Mini-batch Adam on mean squared error. Sample order is reshuffled each epoch from
/// `config.seed`, so identical inputs give bit-identical histories.
inline RegressionResult train_regression(DenseNetwork net, const RegressionData& data,
                                         const RegressionConfig& config) {
    if (data.size() == 0) throw UsageError("train_regression: dataset is empty");
    if (data.targets.cols() != data.size()) throw ShapeError("train_regression: input/target row counts differ");
    if (data.inputs.rows() != net.input_size() || data.targets.rows() != net.output_size())
        throw ShapeError("train_regression: data dimensions do not match the network");
    if (config.epochs < 0 || config.batch_size <= 0) throw UsageError("train_regression: bad epoch/batch settings");

    Rng rng(config.seed);
    AdamState adam = AdamState::for_network(net, config.adam);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    RegressionResult result;
    result.loss_history.reserve(static_cast<std::size_t>(config.epochs) + 1);
    result.loss_history.push_back(mean_squared_error(net, data));

    const Eigen::Index outputs = data.targets.rows();
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const auto count = static_cast<Eigen::Index>(stop - start);
            Eigen::MatrixXd x(data.inputs.rows(), count);
            Eigen::MatrixXd t(outputs, count);
            for (Eigen::Index b = 0; b < count; ++b) {
                x.col(b) = data.inputs.col(order[start + static_cast<std::size_t>(b)]);
                t.col(b) = data.targets.col(order[start + static_cast<std::size_t>(b)]);
            }
            const Eigen::MatrixXd y = net.forward_batch(x);
            const Eigen::MatrixXd grad = (2.0 / static_cast<double>(count * outputs)) * (y - t);
            adam_step(net, backward_batch(net, x, grad), adam);
        }
        result.loss_history.push_back(mean_squared_error(net, data));
    }
    result.net = std::move(net);
    return result;
}

}  // namespace subsea::nn
