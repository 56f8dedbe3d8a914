#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subsea/core/errors.hpp"
#include "subsea/nn/dense_network.hpp"

namespace subsea::nn {

inline constexpr const char* kCheckpointFormat = "mlp-v1";

/// `{"format":"mlp-v1","dims":[...],"activations":[...],"weights":[...],"biases":[...]}`
/// with weights flattened row-major per layer.
inline nlohmann::json to_json(const DenseNetwork& net) {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["dims"] = net.dims();
    auto& acts = j["activations"] = nlohmann::json::array();
    auto& weights = j["weights"] = nlohmann::json::array();
    auto& biases = j["biases"] = nlohmann::json::array();
    for (const auto& l : net.layers()) {
        acts.push_back(std::string(to_string(l.activation)));
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weights.size()));
        for (Eigen::Index r = 0; r < l.outputs(); ++r)
            for (Eigen::Index c = 0; c < l.inputs(); ++c) w.push_back(l.weights(r, c));
        weights.push_back(std::move(w));
        biases.push_back(std::vector<double>(l.biases.data(), l.biases.data() + l.biases.size()));
    }
    return j;
}

inline DenseNetwork network_from_json(const nlohmann::json& j) {
    if (!j.contains("format") || j["format"] != kCheckpointFormat)
        throw UsageError("unsupported checkpoint format tag: " +
                         (j.contains("format") ? j["format"].dump() : std::string("<missing>")));
    const auto dims = j.at("dims").get<std::vector<int>>();
    const auto acts = j.at("activations").get<std::vector<std::string>>();
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (dims.size() < 2 || acts.size() + 1 != dims.size() || weights.size() != acts.size() ||
        biases.size() != acts.size())
        throw ShapeError("checkpoint layer lists are inconsistent with dims");

    std::vector<DenseLayer> layers;
    for (std::size_t k = 0; k < acts.size(); ++k) {
        const auto w = weights[k].get<std::vector<double>>();
        const auto b = biases[k].get<std::vector<double>>();
        const auto rows = static_cast<std::size_t>(dims[k + 1]);
        const auto cols = static_cast<std::size_t>(dims[k]);
        if (w.size() != rows * cols || b.size() != rows)
            throw ShapeError("checkpoint layer " + std::to_string(k) + " has the wrong parameter count");
        DenseLayer layer;
        layer.weights.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
                layer.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[r * cols + c];
        layer.biases = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(rows));
        layer.activation = activation_from_string(acts[k]);
        layers.push_back(std::move(layer));
    }
    return DenseNetwork(std::move(layers));
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << j.dump(1) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

}  // namespace subsea::nn
