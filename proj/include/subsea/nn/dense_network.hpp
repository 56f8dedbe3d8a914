#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "subsea/core/errors.hpp"
#include "subsea/core/random.hpp"

namespace subsea::nn {

enum class Activation { relu, identity, softmax };

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::relu:
            return "relu";
        case Activation::identity:
            return "identity";
        case Activation::softmax:
            return "softmax";
    }
    return "?";
}

inline Activation activation_from_string(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "identity") return Activation::identity;
    if (name == "softmax") return Activation::softmax;
    throw UsageError("unknown activation '" + std::string(name) + "'");
}

struct DenseLayer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd biases;   // out
    Activation activation = Activation::identity;

    Eigen::Index inputs() const { return weights.cols(); }
    Eigen::Index outputs() const { return weights.rows(); }
};

namespace detail {

inline void softmax_columns(Eigen::MatrixXd& z) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        auto col = z.col(c);
        const double peak = col.maxCoeff();
        col = (col.array() - peak).exp();
        col /= col.sum();
    }
}

inline void activate(Eigen::MatrixXd& z, Activation a) {
    switch (a) {
        case Activation::relu:
            z = z.cwiseMax(0.0);
            break;
        case Activation::identity:
            break;
        case Activation::softmax:
            softmax_columns(z);
            break;
    }
}

}  // namespace detail

/// Fully connected feed-forward network. Parameters are plain data; forward passes
/// are const and may run concurrently.
class DenseNetwork {
public:
    DenseNetwork() = default;

    explicit DenseNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { validate(); }

    /// Glorot-uniform weights, zero biases. `dims` lists every layer width including the input.
    static DenseNetwork initialized(std::span<const int> dims, Activation hidden, Activation output,
                                    Rng& rng) {
        if (dims.size() < 2) throw ShapeError("network needs at least an input and an output width");
        std::vector<DenseLayer> layers;
        for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
            const int fan_in = dims[k];
            const int fan_out = dims[k + 1];
            if (fan_in <= 0 || fan_out <= 0) throw ShapeError("layer widths must be positive");
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            DenseLayer layer;
            layer.weights.resize(fan_out, fan_in);
            // row-major fill order so the draw sequence matches the checkpoint layout
            for (int r = 0; r < fan_out; ++r)
                for (int c = 0; c < fan_in; ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
            layer.biases = Eigen::VectorXd::Zero(fan_out);
            layer.activation = (k + 2 == dims.size()) ? output : hidden;
            layers.push_back(std::move(layer));
        }
        return DenseNetwork(std::move(layers));
    }

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }

    Eigen::Index input_size() const { return layers_.empty() ? 0 : layers_.front().inputs(); }
    Eigen::Index output_size() const { return layers_.empty() ? 0 : layers_.back().outputs(); }

    std::vector<int> dims() const {
        std::vector<int> d;
        if (layers_.empty()) return d;
        d.push_back(static_cast<int>(layers_.front().inputs()));
        for (const auto& l : layers_) d.push_back(static_cast<int>(l.outputs()));
        return d;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
        return n;
    }

    Eigen::VectorXd forward(const Eigen::VectorXd& input) const {
        Eigen::MatrixXd out = forward_batch(input);
        return out.col(0);
    }

    /// Each column of `inputs` is one sample.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const {
        if (layers_.empty()) throw ShapeError("forward on an empty network");
        if (inputs.rows() != input_size())
            throw ShapeError("input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                             std::to_string(input_size()));
        Eigen::MatrixXd a = inputs;
        for (const auto& layer : layers_) {
            Eigen::MatrixXd z = layer.weights * a;
            z.colwise() += layer.biases;
            detail::activate(z, layer.activation);
            a = std::move(z);
        }
        return a;
    }

    void validate() const {
        if (layers_.empty()) throw ShapeError("network has no layers");
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            const auto& l = layers_[k];
            if (l.biases.size() != l.outputs())
                throw ShapeError("layer " + std::to_string(k) + ": bias length does not match output width");
            if (k > 0 && layers_[k - 1].outputs() != l.inputs())
                throw ShapeError("layer " + std::to_string(k) + ": input width does not chain");
            if (l.activation == Activation::softmax && k + 1 != layers_.size())
                throw ShapeError("softmax is only permitted on the final layer");
            if (!l.weights.allFinite() || !l.biases.allFinite())
                throw NumericError("layer " + std::to_string(k) + " has non-finite parameters");
        }
    }

private:
    std::vector<DenseLayer> layers_;
};

struct LayerGradient {
    Eigen::MatrixXd weights;
    Eigen::VectorXd biases;
};

using Gradients = std::vector<LayerGradient>;

inline Gradients zero_gradients(const DenseNetwork& net) {
    Gradients g;
    g.reserve(net.layers().size());
    for (const auto& l : net.layers())
        g.push_back({Eigen::MatrixXd::Zero(l.outputs(), l.inputs()), Eigen::VectorXd::Zero(l.outputs())});
    return g;
}

inline void accumulate(Gradients& into, const Gradients& g, double scale = 1.0) {
    if (into.size() != g.size()) throw ShapeError("gradient sets have different layer counts");
    for (std::size_t k = 0; k < g.size(); ++k) {
        into[k].weights += scale * g[k].weights;
        into[k].biases += scale * g[k].biases;
    }
}

/// Gradients of sum_b <loss_grads[:, b], net(inputs[:, b])> with respect to every parameter.
/// `loss_grads` is the derivative of the loss with respect to the network *output*
/// (post-activation, so post-softmax for policy networks).
inline Gradients backward_batch(const DenseNetwork& net, const Eigen::MatrixXd& inputs,
                                const Eigen::MatrixXd& loss_grads) {
    const auto& layers = net.layers();
    if (layers.empty()) throw ShapeError("backward on an empty network");
    if (inputs.rows() != net.input_size()) throw ShapeError("backward: input size mismatch");
    if (loss_grads.rows() != net.output_size() || loss_grads.cols() != inputs.cols())
        throw ShapeError("backward: loss gradient shape does not match output");

    // activations[k] is the input to layer k; activations[L] is the output
    std::vector<Eigen::MatrixXd> activations{inputs};
    std::vector<Eigen::MatrixXd> pre;
    activations.reserve(layers.size() + 1);
    pre.reserve(layers.size());
    for (const auto& layer : layers) {
        Eigen::MatrixXd z = layer.weights * activations.back();
        z.colwise() += layer.biases;
        pre.push_back(z);
        detail::activate(z, layer.activation);
        activations.push_back(std::move(z));
    }

    Gradients grads(layers.size());
    Eigen::MatrixXd delta = loss_grads;
    for (std::size_t k = layers.size(); k-- > 0;) {
        const auto& layer = layers[k];
        switch (layer.activation) {
            case Activation::relu:
                delta = delta.cwiseProduct((pre[k].array() > 0.0).cast<double>().matrix());
                break;
            case Activation::identity:
                break;
            case Activation::softmax: {
                const Eigen::MatrixXd& s = activations[k + 1];
                const Eigen::RowVectorXd dots = (s.cwiseProduct(delta)).colwise().sum();
                delta = s.cwiseProduct(delta - dots.replicate(delta.rows(), 1));
                break;
            }
        }
        grads[k].weights = delta * activations[k].transpose();
        grads[k].biases = delta.rowwise().sum();
        if (k > 0) delta = layer.weights.transpose() * delta;
    }
    return grads;
}

inline Gradients backward(const DenseNetwork& net, const Eigen::VectorXd& input, const Eigen::VectorXd& loss_grad) {
    if (loss_grad.size() != net.output_size()) throw ShapeError("backward: loss gradient length != output size");
    return backward_batch(net, input, loss_grad);
}

/// Flattened parameter view: per layer, weights row-major then biases.
inline Eigen::VectorXd flatten_parameters(const DenseNetwork& net) {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(net.parameter_count()));
    Eigen::Index at = 0;
    for (const auto& l : net.layers()) {
        for (Eigen::Index r = 0; r < l.outputs(); ++r)
            for (Eigen::Index c = 0; c < l.inputs(); ++c) flat(at++) = l.weights(r, c);
        flat.segment(at, l.biases.size()) = l.biases;
        at += l.biases.size();
    }
    return flat;
}

inline void assign_parameters(DenseNetwork& net, const Eigen::VectorXd& flat) {
    if (flat.size() != static_cast<Eigen::Index>(net.parameter_count()))
        throw ShapeError("flat parameter vector has the wrong length");
    Eigen::Index at = 0;
    for (auto& l : net.layers()) {
        for (Eigen::Index r = 0; r < l.outputs(); ++r)
            for (Eigen::Index c = 0; c < l.inputs(); ++c) l.weights(r, c) = flat(at++);
        l.biases = flat.segment(at, l.biases.size());
        at += l.biases.size();
    }
}

inline Eigen::VectorXd flatten_gradients(const DenseNetwork& net, const Gradients& g) {
    if (g.size() != net.layers().size()) throw ShapeError("gradient layer count mismatch");
    Eigen::VectorXd flat(static_cast<Eigen::Index>(net.parameter_count()));
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto& l = net.layers()[k];
        if (g[k].weights.rows() != l.outputs() || g[k].weights.cols() != l.inputs() ||
            g[k].biases.size() != l.outputs())
            throw ShapeError("gradient shape mismatch at layer " + std::to_string(k));
        for (Eigen::Index r = 0; r < l.outputs(); ++r)
            for (Eigen::Index c = 0; c < l.inputs(); ++c) flat(at++) = g[k].weights(r, c);
        flat.segment(at, l.biases.size()) = g[k].biases;
        at += l.biases.size();
    }
    return flat;
}

}  // namespace subsea::nn
