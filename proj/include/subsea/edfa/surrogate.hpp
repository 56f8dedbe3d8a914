#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "subsea/core/errors.hpp"
#include "subsea/core/random.hpp"
#include "subsea/edfa/dataset.hpp"
#include "subsea/edfa/oracle.hpp"
#include "subsea/nn/checkpoint.hpp"
#include "subsea/nn/dense_network.hpp"
#include "subsea/nn/training.hpp"

namespace subsea::edfa {

inline constexpr int kSurrogateInputs = kChannels + 1;
inline constexpr int kSurrogateHidden = 100;

/// Standardization applied around the network. Inputs are z-scored with train-split
/// statistics; outputs are learned as residuals from the per-channel mean gain so the
/// loss stays in dB.
struct Normalization {
    Eigen::VectorXd input_mean;
    Eigen::VectorXd input_std;
    Eigen::VectorXd output_offset;
};

/// Counts surrogate calls whose total input power leaves the training envelope.
class EnvelopeMonitor {
public:
    void record(double total_dbm) {
        const auto n = count_.fetch_add(1, std::memory_order_relaxed) + 1;
        // log at 1, 10, 100, ... so long cascades do not flood the log
        if (is_power_of_ten(n))
            spdlog::warn("EDFA surrogate queried outside its training envelope (total input {:.2f} dBm, "
                         "envelope [{:.1f}, {:.1f}] dBm); {} such call(s) so far",
                         total_dbm, kMinTotalInputDbm, kMaxTotalInputDbm, n);
    }
    std::uint64_t count() const { return count_.load(std::memory_order_relaxed); }

private:
    static bool is_power_of_ten(std::uint64_t n) {
        while (n >= 10 && n % 10 == 0) n /= 10;
        return n == 1;
    }
    std::atomic<std::uint64_t> count_{0};
};

class SurrogateModel {
public:
    SurrogateModel() = default;
    SurrogateModel(nn::DenseNetwork net, Normalization norm, double train_rmse_db, double heldout_rmse_db)
        : net_(std::move(net)),
          norm_(std::move(norm)),
          train_rmse_db_(train_rmse_db),
          heldout_rmse_db_(heldout_rmse_db) {
        if (net_.input_size() != kSurrogateInputs || net_.output_size() != kChannels)
            throw ShapeError("surrogate network must map 90 inputs to 89 gains");
        if (norm_.input_mean.size() != kSurrogateInputs || norm_.input_std.size() != kSurrogateInputs ||
            norm_.output_offset.size() != kChannels)
            throw ShapeError("surrogate normalization block has the wrong length");
    }

    const nn::DenseNetwork& network() const { return net_; }
    const Normalization& normalization() const { return norm_; }
    double train_rmse_db() const { return train_rmse_db_; }
    double heldout_rmse_db() const { return heldout_rmse_db_; }
    std::uint64_t out_of_envelope_calls() const { return monitor_->count(); }

    Eigen::VectorXd encode(const ChannelArray& pin_dbm, double current_ma) const {
        Eigen::VectorXd x(kSurrogateInputs);
        x.head(kChannels) = pin_dbm.matrix();
        x(kChannels) = current_ma;
        return (x - norm_.input_mean).cwiseQuotient(norm_.input_std);
    }

    GainSpectrum gain(const ChannelArray& pin_dbm, double current_ma) const {
        const double total = total_dbm(pin_dbm);
        if (!(total >= kMinTotalInputDbm && total <= kMaxTotalInputDbm)) monitor_->record(total);
        const Eigen::VectorXd y = net_.forward(encode(pin_dbm, current_ma)) + norm_.output_offset;
        return y.array();
    }

private:
    nn::DenseNetwork net_;
    Normalization norm_;
    double train_rmse_db_ = 0.0;
    double heldout_rmse_db_ = 0.0;
    // shared so copies of a model report one envelope history
    std::shared_ptr<EnvelopeMonitor> monitor_ = std::make_shared<EnvelopeMonitor>();
};

inline GainSpectrum predict_gain(const SurrogateModel& model, const EdfaInput& in) {
    return model.gain(in.power_dbm, in.current_ma);
}

/// Root mean square error in dB over every channel of every row.
template <GainModel M>
double rmse_db(const M& model, const std::vector<GainRow>& rows) {
    if (rows.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : rows) sum += (model.gain(r.input.power_dbm, r.input.current_ma) - r.gain).square().sum();
    return std::sqrt(sum / (static_cast<double>(rows.size()) * kChannels));
}

struct SurrogateTrainConfig {
    double train_fraction = 0.8;
    int epochs = 300;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

struct SurrogateTrainResult {
    SurrogateModel model;
    double train_rmse_db = 0.0;
    double heldout_rmse_db = 0.0;
    std::vector<double> loss_history;
    std::vector<GainRow> train_rows;
    std::vector<GainRow> heldout_rows;
};

/// Trains the 90-100-89 relu surrogate on a seeded train/held-out split.
inline SurrogateTrainResult train_surrogate(const GainDataset& data, const SurrogateTrainConfig& config) {
    if (data.size() < 100) throw UsageError("train_surrogate: need at least 100 rows, got " + std::to_string(data.size()));
    if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0))
        throw UsageError("train_surrogate: train fraction must be in (0, 1)");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng split_rng(derive_seed(config.seed, "split"));
    split_rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::llround(config.train_fraction * static_cast<double>(data.size())));

    SurrogateTrainResult result;
    for (std::size_t k = 0; k < order.size(); ++k)
        (k < n_train ? result.train_rows : result.heldout_rows).push_back(data.rows[order[k]]);

    const auto n = static_cast<Eigen::Index>(result.train_rows.size());
    Eigen::MatrixXd raw(kSurrogateInputs, n);
    Eigen::MatrixXd targets(kChannels, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const auto& row = result.train_rows[static_cast<std::size_t>(c)];
        raw.col(c).head(kChannels) = row.input.power_dbm.matrix();
        raw(kChannels, c) = row.input.current_ma;
        targets.col(c) = row.gain.matrix();
    }

    Normalization norm;
    norm.input_mean = raw.rowwise().mean();
    const Eigen::MatrixXd centred = raw.colwise() - norm.input_mean;
    norm.input_std = (centred.array().square().rowwise().sum() / static_cast<double>(n)).sqrt().matrix();
    // the mean of identical values can be off by an ulp, so "constant" is relative
    const Eigen::ArrayXd scale = norm.input_mean.array().abs().max(1.0);
    const auto constant = norm.input_std.array() <= 1e-12 * scale;
    if (constant.all())
        throw UsageError("train_surrogate: degenerate dataset, every input feature has zero variance");
    // constant features pass through unscaled
    norm.input_std = constant.select(1.0, norm.input_std.array()).matrix();
    norm.output_offset = targets.rowwise().mean();

    nn::RegressionData train;
    train.inputs = centred.array().colwise() / norm.input_std.array();
    train.targets = targets.colwise() - norm.output_offset;

    Rng init_rng(derive_seed(config.seed, "init"));
    const int dims[] = {kSurrogateInputs, kSurrogateHidden, kChannels};
    auto net = nn::DenseNetwork::initialized(dims, nn::Activation::relu, nn::Activation::identity, init_rng);

    nn::RegressionConfig rc;
    rc.epochs = config.epochs;
    rc.batch_size = config.batch_size;
    rc.adam.learning_rate = config.learning_rate;
    rc.seed = derive_seed(config.seed, "batches");
    auto trained = nn::train_regression(std::move(net), train, rc);
    result.loss_history = std::move(trained.loss_history);

    SurrogateModel provisional(trained.net, norm, 0.0, 0.0);
    result.train_rmse_db = rmse_db(provisional, result.train_rows);
    result.heldout_rmse_db = rmse_db(provisional, result.heldout_rows);
    result.model = SurrogateModel(std::move(trained.net), std::move(norm), result.train_rmse_db, result.heldout_rmse_db);
    return result;
}

inline nlohmann::json to_json(const SurrogateModel& model) {
    auto j = nn::to_json(model.network());
    const auto& n = model.normalization();
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    j["kind"] = "edfa-surrogate";
    j["normalization"] = {{"input_mean", vec(n.input_mean)},
                          {"input_std", vec(n.input_std)},
                          {"output_offset", vec(n.output_offset)},
                          {"envelope_total_dbm", {kMinTotalInputDbm, kMaxTotalInputDbm}}};
    j["metrics"] = {{"train_rmse_db", model.train_rmse_db()}, {"heldout_rmse_db", model.heldout_rmse_db()}};
    return j;
}

inline SurrogateModel surrogate_from_json(const nlohmann::json& j) {
    auto net = nn::network_from_json(j);
    if (!j.contains("normalization")) throw UsageError("surrogate checkpoint lacks a normalization block");
    const auto& nb = j["normalization"];
    auto vec = [](const nlohmann::json& a) {
        const auto v = a.get<std::vector<double>>();
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    Normalization norm{vec(nb.at("input_mean")), vec(nb.at("input_std")), vec(nb.at("output_offset"))};
    double train = 0.0, heldout = 0.0;
    if (j.contains("metrics")) {
        train = j["metrics"].value("train_rmse_db", 0.0);
        heldout = j["metrics"].value("heldout_rmse_db", 0.0);
    }
    return SurrogateModel(std::move(net), std::move(norm), train, heldout);
}

inline void save_surrogate(const std::filesystem::path& path, const SurrogateModel& model) {
    nn::write_json_file(path, to_json(model));
}

inline SurrogateModel load_surrogate(const std::filesystem::path& path) {
    return surrogate_from_json(nn::read_json_file(path));
}

}  // namespace subsea::edfa
