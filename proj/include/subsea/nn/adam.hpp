#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "subsea/core/errors.hpp"
#include "subsea/nn/dense_network.hpp"

namespace subsea::nn {

struct AdamConfig {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment accumulators over a flat parameter vector.
struct AdamState {
    AdamConfig config;
    Eigen::VectorXd first_moment;
    Eigen::VectorXd second_moment;
    std::int64_t step = 0;

    AdamState() = default;
    AdamState(Eigen::Index parameter_count, AdamConfig cfg)
        : config(cfg),
          first_moment(Eigen::VectorXd::Zero(parameter_count)),
          second_moment(Eigen::VectorXd::Zero(parameter_count)) {}

    static AdamState for_network(const DenseNetwork& net, AdamConfig cfg) {
        return AdamState(static_cast<Eigen::Index>(net.parameter_count()), cfg);
    }
};

/// One bias-corrected Adam update (descent on `grads`). A non-finite gradient leaves
/// both `params` and `state` untouched.
inline void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
        params.size() != state.second_moment.size())
        throw ShapeError("adam_step: parameter, gradient and moment sizes differ");
    for (Eigen::Index i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads(i)))
            throw NumericError("adam_step rejected: gradient entry " + std::to_string(i) + " is " +
                               std::to_string(grads(i)));
    }
    const auto& c = state.config;
    state.step += 1;
    state.first_moment = c.beta1 * state.first_moment + (1.0 - c.beta1) * grads;
    state.second_moment = c.beta2 * state.second_moment + (1.0 - c.beta2) * grads.cwiseAbs2();
    const double t = static_cast<double>(state.step);
    const double m_scale = 1.0 / (1.0 - std::pow(c.beta1, t));
    const double v_scale = 1.0 / (1.0 - std::pow(c.beta2, t));
    params.array() -= c.learning_rate * (state.first_moment.array() * m_scale) /
                      ((state.second_moment.array() * v_scale).sqrt() + c.epsilon);
    if (!params.allFinite()) throw NumericError("adam_step produced non-finite parameters");
}

inline void adam_step(DenseNetwork& net, const Gradients& grads, AdamState& state) {
    Eigen::VectorXd flat = flatten_parameters(net);
    adam_step(flat, flatten_gradients(net, grads), state);
    assign_parameters(net, flat);
}

}  // namespace subsea::nn
