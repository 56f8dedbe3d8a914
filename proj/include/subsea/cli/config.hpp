#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subsea/core/errors.hpp"
#include "subsea/core/random.hpp"
#include "subsea/edfa/dataset.hpp"
#include "subsea/edfa/surrogate.hpp"
#include "subsea/link/link.hpp"
#include "subsea/nn/checkpoint.hpp"
#include "subsea/optimizer/environment.hpp"
#include "subsea/perf/perf.hpp"

namespace subsea::cli {

namespace fs = std::filesystem;

/// Everything a run depends on. Paths left empty resolve inside `out_dir`.
struct RunConfig {
    std::uint64_t seed = 1;

    struct Paths {
        fs::path out_dir = "out";
        fs::path dataset;
        fs::path surrogate;
        fs::path calibration;
    } paths;

    int dataset_rows = edfa::kDefaultDatasetRows;
    edfa::SurrogateTrainConfig surrogate{0.8, 100, 32, 1e-3, 0};

    link::LinkParams link;
    std::vector<int> f_list{2, 3, 4, 5, 6, 7, 8, 9, 10};

    std::optional<double> nf_db;  // empty: calibrate
    double target_capacity_tbps = 31.3;
    perf::NliParams nli;

    optimizer::EpisodeConfig rl;

    fs::path dataset_path() const { return paths.dataset.empty() ? paths.out_dir / "dataset.csv" : paths.dataset; }
    fs::path surrogate_path() const {
        return paths.surrogate.empty() ? paths.out_dir / "surrogate.json" : paths.surrogate;
    }
    fs::path calibration_path() const {
        return paths.calibration.empty() ? paths.out_dir / "calibration.json" : paths.calibration;
    }
    fs::path f_dir(int f) const { return paths.out_dir / ("f" + std::to_string(f)); }
    fs::path sweep_path() const { return paths.out_dir / "sweep.csv"; }

    std::uint64_t stage_seed(std::string_view stage) const { return derive_seed(seed, stage); }
    std::uint64_t optimize_seed(int f) const {
        return derive_seed(stage_seed("optimize"), static_cast<std::uint64_t>(f));
    }
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["paths"] = {{"out_dir", c.paths.out_dir.string()},
                  {"dataset", c.paths.dataset.string()},
                  {"surrogate", c.paths.surrogate.string()},
                  {"calibration", c.paths.calibration.string()}};
    j["dataset"] = {{"rows", c.dataset_rows}};
    j["surrogate"] = {{"train_fraction", c.surrogate.train_fraction},
                      {"epochs", c.surrogate.epochs},
                      {"batch_size", c.surrogate.batch_size},
                      {"learning_rate", c.surrogate.learning_rate}};
    j["link"] = {{"target_km", c.link.target_km},
                 {"span_km_gffless", c.link.span_km_gffless},
                 {"span_km_conventional", c.link.span_km_conventional},
                 {"alpha_db_per_km", c.link.alpha_db_per_km},
                 {"current_ma", c.link.current_ma},
                 {"f", c.f_list}};
    j["physics"] = {{"nf_db", c.nf_db ? nlohmann::json(*c.nf_db) : nlohmann::json("calibrate")},
                    {"target_capacity_tbps", c.target_capacity_tbps},
                    {"gamma_per_w_km", c.nli.gamma_per_w_km},
                    {"beta2_ps2_per_km", c.nli.beta2_ps2_per_km},
                    {"nli_alpha_db_per_km", c.nli.alpha_db_per_km}};
    j["rl"] = {{"episodes", c.rl.episodes},
               {"max_steps", c.rl.max_steps},
               {"learning_rate", c.rl.learning_rate},
               {"discount", c.rl.discount}};
    return j;
}

namespace detail {

// Copies j[key] into `out` when present; rejects keys the section does not know.
class Section {
public:
    Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw UsageError("config section '" + name_ + "' must be an object");
    }

    template <class T>
    Section& read(const char* key, T& out) {
        known_.insert(key);
        if (j_.contains(key)) {
            try {
                out = j_.at(key).get<T>();
            } catch (const nlohmann::json::exception& e) {
                throw UsageError("config key '" + name_ + "." + key + "': " + e.what());
            }
        }
        return *this;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!known_.count(k)) throw UsageError("unknown config key '" + name_ + "." + k + "'");
    }

    const nlohmann::json& json() const { return j_; }

private:
    const nlohmann::json& j_;
    std::string name_;
    std::set<std::string> known_;
};

inline const nlohmann::json& section_or_empty(const nlohmann::json& j, const char* key) {
    static const nlohmann::json empty = nlohmann::json::object();
    return j.contains(key) ? j.at(key) : empty;
}

}  // namespace detail

inline void validate(const RunConfig& c) {
    if (c.dataset_rows < 1) throw UsageError("dataset.rows must be at least 1");
    if (c.surrogate.epochs < 0 || c.surrogate.batch_size < 1) throw UsageError("surrogate epochs/batch_size invalid");
    if (!(c.surrogate.train_fraction > 0.0 && c.surrogate.train_fraction < 1.0))
        throw UsageError("surrogate.train_fraction must lie in (0, 1)");
    if (c.f_list.empty()) throw UsageError("link.f must list at least one GFF frequency");
    for (int f : c.f_list)
        if (f < 1) throw UsageError("GFF frequency must be at least 1, got " + std::to_string(f));
    if (c.nf_db && !(*c.nf_db > 0.0)) throw UsageError("physics.nf_db must be positive");
    if (c.rl.episodes < 1 || c.rl.max_steps < 1) throw UsageError("rl.episodes and rl.max_steps must be at least 1");
    if (!(c.rl.learning_rate > 0.0)) throw UsageError("rl.learning_rate must be positive");
}

/// Default-fills from `j`. Unknown keys are rejected so typos do not silently fall back.
inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        static const std::set<std::string> top{"seed", "paths", "dataset", "surrogate", "link", "physics", "rl"};
        if (!top.count(k)) throw UsageError("unknown config key '" + k + "'");
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();

    std::string out_dir = c.paths.out_dir.string(), dataset, surrogate, calibration;
    detail::Section(detail::section_or_empty(j, "paths"), "paths")
        .read("out_dir", out_dir)
        .read("dataset", dataset)
        .read("surrogate", surrogate)
        .read("calibration", calibration)
        .finish();
    c.paths = {out_dir, dataset, surrogate, calibration};

    detail::Section(detail::section_or_empty(j, "dataset"), "dataset").read("rows", c.dataset_rows).finish();
    detail::Section(detail::section_or_empty(j, "surrogate"), "surrogate")
        .read("train_fraction", c.surrogate.train_fraction)
        .read("epochs", c.surrogate.epochs)
        .read("batch_size", c.surrogate.batch_size)
        .read("learning_rate", c.surrogate.learning_rate)
        .finish();
    detail::Section(detail::section_or_empty(j, "link"), "link")
        .read("target_km", c.link.target_km)
        .read("span_km_gffless", c.link.span_km_gffless)
        .read("span_km_conventional", c.link.span_km_conventional)
        .read("alpha_db_per_km", c.link.alpha_db_per_km)
        .read("current_ma", c.link.current_ma)
        .read("f", c.f_list)
        .finish();

    const auto& phys = detail::section_or_empty(j, "physics");
    nlohmann::json nf = "calibrate";
    detail::Section(phys, "physics")
        .read("nf_db", nf)
        .read("target_capacity_tbps", c.target_capacity_tbps)
        .read("gamma_per_w_km", c.nli.gamma_per_w_km)
        .read("beta2_ps2_per_km", c.nli.beta2_ps2_per_km)
        .read("nli_alpha_db_per_km", c.nli.alpha_db_per_km)
        .finish();
    if (nf.is_number())
        c.nf_db = nf.get<double>();
    else if (nf != "calibrate")
        throw UsageError("physics.nf_db must be a number or \"calibrate\"");

    detail::Section(detail::section_or_empty(j, "rl"), "rl")
        .read("episodes", c.rl.episodes)
        .read("max_steps", c.rl.max_steps)
        .read("learning_rate", c.rl.learning_rate)
        .read("discount", c.rl.discount)
        .finish();
    validate(c);
    return c;
}

inline RunConfig load_config(const fs::path& path) {
    return config_from_json(nn::read_json_file(path));
}

/// Hash of everything that affects results. Paths are excluded so the same run in a
/// different directory hashes the same.
inline std::string config_hash(const RunConfig& c) {
    auto j = to_json(c);
    j.erase("paths");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

}  // namespace subsea::cli
