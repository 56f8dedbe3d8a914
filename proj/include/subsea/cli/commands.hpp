#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "subsea/cli/config.hpp"
#include "subsea/core/errors.hpp"
#include "subsea/edfa/dataset.hpp"
#include "subsea/edfa/grid.hpp"
#include "subsea/edfa/surrogate.hpp"
#include "subsea/link/link.hpp"
#include "subsea/optimizer/reinforce.hpp"
#include "subsea/perf/perf.hpp"

namespace subsea::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kCompute = 2, kIo = 3 };

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e)) return kIo;
    if (dynamic_cast<const std::invalid_argument*>(&e)) return kUsage;  // UsageError, ShapeError
    if (dynamic_cast<const nlohmann::json::exception*>(&e)) return kIo;
    return kCompute;
}

struct Context {
    RunConfig config;
    std::string hash;
    std::ostream* out = &std::cout;  // null when quiet

    explicit Context(RunConfig c, std::ostream* o = &std::cout) : config(std::move(c)), hash(config_hash(config)), out(o) {}

    template <class... Args>
    void say(fmt::format_string<Args...> f, Args&&... args) const {
        if (out) *out << fmt::format(f, std::forward<Args>(args)...) << '\n' << std::flush;
    }
};

inline std::string hash_comment(const Context& ctx) { return "config_hash=" + ctx.hash; }

/// Files written by one stage. Everything goes to `<path>.partial` first and is renamed
/// by commit(); a stage that throws leaves its `.partial` files behind for inspection.
class StageOutputs {
public:
    void write_text(const fs::path& path, const std::string& content) {
        const fs::path tmp = partial(path);
        std::error_code ec;
        if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw IoError("cannot open '" + tmp.string() + "' for writing");
        f << content;
        f.close();
        if (!f) throw IoError("failed writing '" + tmp.string() + "'");
        pending_.push_back(path);
    }

    void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

    void commit() {
        for (const auto& p : pending_) {
            std::error_code ec;
            fs::rename(partial(p), p, ec);
            if (ec) throw IoError("cannot move '" + partial(p).string() + "' into place: " + ec.message());
        }
        pending_.clear();
    }

    static fs::path partial(const fs::path& p) { return fs::path(p.string() + ".partial"); }

private:
    std::vector<fs::path> pending_;
};

/// Every stage drops the resolved config next to its outputs.
inline void record_config(StageOutputs& outs, const Context& ctx) {
    auto j = to_json(ctx.config);
    j["config_hash"] = ctx.hash;
    outs.write_json(ctx.config.paths.out_dir / "config.json", j);
}

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------- spectrum and log files

inline std::string spectrum_csv(const link::LaunchProfile& p, const std::string& comment,
                                const ChannelGrid& grid = default_grid()) {
    std::ostringstream s;
    s << "# " << comment << "\nchannel,freq_thz,power_dbm\n";
    for (int i = 0; i < kChannels; ++i)
        s << i << ',' << format_double(grid.frequency_hz(i) / 1e12) << ',' << format_double(p.power_dbm(i)) << '\n';
    return s.str();
}

inline link::LaunchProfile read_spectrum_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open spectrum '" + path.string() + "'");
    link::LaunchProfile p;
    std::string line;
    bool header = false;
    int n = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "channel,freq_thz,power_dbm") throw IoError("unexpected spectrum header in '" + path.string() + "'");
            header = true;
            continue;
        }
        int ch = -1;
        double freq = 0.0, dbm = 0.0;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf", &ch, &freq, &dbm) != 3 || ch != n || n >= kChannels)
            throw IoError("malformed spectrum row " + std::to_string(n) + " in '" + path.string() + "'");
        p.power_dbm(n++) = dbm;
    }
    if (n != kChannels) throw IoError("spectrum '" + path.string() + "' has " + std::to_string(n) + " rows, expected 89");
    return p;
}

inline std::string training_log_csv(const optimizer::TrainingResult& r, const std::string& comment) {
    std::ostringstream s;
    s << "# " << comment << "\nepisode,return,best_capacity_tbps\n";
    for (const auto& c : r.curve)
        s << c.episode << ',' << format_double(c.episode_return) << ',' << format_double(c.best_capacity_tbps) << '\n';
    return s.str();
}

// ---------------------------------------------------------------- gen-data

struct GenDataResult {
    fs::path path;
    edfa::ConstraintSummary summary;
};

inline GenDataResult cmd_gen_data(const Context& ctx, std::optional<int> count = std::nullopt) {
    const int rows = count.value_or(ctx.config.dataset_rows);
    if (rows < 1) throw UsageError("--count must be at least 1");
    const auto data = edfa::generate_dataset(static_cast<std::size_t>(rows), ctx.config.stage_seed("dataset"));
    std::ostringstream s;
    edfa::write_dataset_csv(s, data, hash_comment(ctx));
    StageOutputs outs;
    record_config(outs, ctx);
    outs.write_text(ctx.config.dataset_path(), s.str());
    outs.commit();
    GenDataResult r{ctx.config.dataset_path(), edfa::check_constraints(data)};
    const auto& c = r.summary;
    ctx.say("dataset: {} rows -> {}", c.rows, r.path.string());
    ctx.say("constraints: total input {:.3f}..{:.3f} dBm, max ripple {:.3f} dB, violations {} total / {} ripple / {} current",
            c.min_total_dbm, c.max_total_dbm, c.max_ripple_db, c.total_power_violations, c.ripple_violations,
            c.current_violations);
    return r;
}

// ---------------------------------------------------------------- train-edfa

struct TrainEdfaResult {
    fs::path path;
    double train_rmse_db = 0.0;
    double heldout_rmse_db = 0.0;
};

inline TrainEdfaResult cmd_train_edfa(const Context& ctx) {
    const auto data = edfa::read_dataset_csv(ctx.config.dataset_path());
    auto tc = ctx.config.surrogate;
    tc.seed = ctx.config.stage_seed("surrogate");
    const auto trained = edfa::train_surrogate(data, tc);
    auto j = edfa::to_json(trained.model);
    j["config_hash"] = ctx.hash;
    StageOutputs outs;
    record_config(outs, ctx);
    outs.write_json(ctx.config.surrogate_path(), j);
    outs.commit();
    ctx.say("surrogate: {} train / {} held-out rows, RMSE {:.4f} dB train, {:.4f} dB held-out -> {}",
            trained.train_rows.size(), trained.heldout_rows.size(), trained.train_rmse_db, trained.heldout_rmse_db,
            ctx.config.surrogate_path().string());
    return {ctx.config.surrogate_path(), trained.train_rmse_db, trained.heldout_rmse_db};
}

inline edfa::SurrogateModel load_model(const Context& ctx) {
    const auto path = ctx.config.surrogate_path();
    if (!fs::exists(path)) throw IoError("surrogate checkpoint '" + path.string() + "' not found; run train-edfa first");
    return edfa::load_surrogate(path);
}

// ---------------------------------------------------------------- calibrate

struct CalibrationRecord {
    double nf_db = 0.0;
    double capacity_tbps = 0.0;         // at nf_db, the value the search stopped on
    double closure_capacity_tbps = 0.0; // fresh explicit-cascade evaluation at nf_db
    double target_tbps = 0.0;
    int iterations = 0;
    bool fixed = false;                 // nf taken from the config, not searched
};

inline nlohmann::json to_json(const CalibrationRecord& r, const std::string& hash) {
    return {{"nf_db", r.nf_db},
            {"capacity_tbps", r.capacity_tbps},
            {"closure_capacity_tbps", r.closure_capacity_tbps},
            {"target_tbps", r.target_tbps},
            {"iterations", r.iterations},
            {"mode", r.fixed ? "fixed" : "calibrated"},
            {"config_hash", hash}};
}

inline double conventional_capacity(const edfa::SurrogateModel& model, const link::LinkParams& params,
                                    const perf::NliParams& nli) {
    return perf::evaluate_link(link::LaunchProfile::flat(operating_point::kReferenceTopDbm), link::design_link(1, params),
                               model, params, nli, link::PropagationMode::explicit_cascade)
        .capacity_tbps;
}

inline CalibrationRecord cmd_calibrate(const Context& ctx) {
    const auto model = load_model(ctx);
    const auto& cfg = ctx.config;
    CalibrationRecord r;
    r.target_tbps = cfg.target_capacity_tbps;
    link::LinkParams params = cfg.link;
    if (cfg.nf_db) {
        r.fixed = true;
        r.nf_db = *cfg.nf_db;
        params.nf_db = r.nf_db;
        r.capacity_tbps = conventional_capacity(model, params, cfg.nli);
    } else {
        const auto c = perf::calibrate_conventional(model, params, cfg.nli, cfg.target_capacity_tbps);
        r.nf_db = c.nf_db;
        r.capacity_tbps = c.capacity_tbps;
        r.iterations = c.iterations;
        params.nf_db = r.nf_db;
    }
    r.closure_capacity_tbps = conventional_capacity(model, params, cfg.nli);
    StageOutputs outs;
    record_config(outs, ctx);
    outs.write_json(cfg.calibration_path(), to_json(r, ctx.hash));
    outs.commit();
    ctx.say("calibration: nf {:.4f} dB -> conventional capacity {:.3f} Tb/s (target {:.1f}, {} iterations, closure {:.3f})",
            r.nf_db, r.capacity_tbps, r.target_tbps, r.iterations, r.closure_capacity_tbps);
    return r;
}

/// Noise figure for downstream stages: the calibration record if present, else a fixed
/// value from the config.
inline double resolve_nf(const Context& ctx) {
    const auto path = ctx.config.calibration_path();
    if (fs::exists(path)) return nn::read_json_file(path).at("nf_db").get<double>();
    if (ctx.config.nf_db) return *ctx.config.nf_db;
    throw IoError("calibration record '" + path.string() + "' not found; run calibrate first");
}

// ---------------------------------------------------------------- optimize

struct OptimizeRecord {
    int f = 0;
    int amplifiers = 0;
    int gffs = 0;
    bool feasible = false;  // at least one feasible spectrum was visited
    double best_capacity_tbps = std::numeric_limits<double>::quiet_NaN();
    long evaluations = 0;
};

inline std::vector<OptimizeRecord> cmd_optimize(const Context& ctx) {
    const auto model = load_model(ctx);
    const auto& cfg = ctx.config;
    link::LinkParams params = cfg.link;
    params.nf_db = resolve_nf(ctx);
    StageOutputs outs;
    record_config(outs, ctx);
    std::vector<OptimizeRecord> records;
    for (int f : cfg.f_list) {
        const auto design = link::design_link(f, params);
        optimizer::LinkEnvironment env(design, model, params, cfg.nli);
        auto rl = cfg.rl;
        rl.seed = cfg.optimize_seed(f);
        const auto result = optimizer::train(env, rl);

        OptimizeRecord rec{f, design.amplifiers, design.gffs, std::isfinite(result.best_capacity_tbps),
                           std::numeric_limits<double>::quiet_NaN(), result.evaluations};
        if (rec.feasible) rec.best_capacity_tbps = result.best_capacity_tbps;
        const auto dir = cfg.f_dir(f);
        outs.write_text(dir / "training_log.csv", training_log_csv(result, hash_comment(ctx)));
        auto pj = optimizer::to_json(result.policy);
        pj["config_hash"] = ctx.hash;
        outs.write_json(dir / "policy.json", pj);
        if (rec.feasible) outs.write_text(dir / "spectrum.csv", spectrum_csv(result.best_spectrum, hash_comment(ctx)));
        outs.write_json(dir / "optimize.json", {{"gff_frequency", f},
                                                {"amplifiers", rec.amplifiers},
                                                {"gffs", rec.gffs},
                                                {"feasible", rec.feasible},
                                                {"best_capacity_tbps", rec.feasible ? nlohmann::json(rec.best_capacity_tbps)
                                                                                    : nlohmann::json(nullptr)},
                                                {"evaluations", rec.evaluations},
                                                {"seed", rl.seed},
                                                {"config_hash", ctx.hash}});
        if (rec.feasible)
            ctx.say("optimize f={}: {} amplifiers, {} GFFs, best {:.3f} Tb/s after {} evaluations", f, rec.amplifiers,
                    rec.gffs, rec.best_capacity_tbps, rec.evaluations);
        else
            ctx.say("optimize f={}: {} amplifiers, {} GFFs, no feasible launch spectrum found", f, rec.amplifiers,
                    rec.gffs);
        records.push_back(rec);
    }
    outs.commit();
    return records;
}

// ---------------------------------------------------------------- report / sweep

struct SweepRow {
    int f = 0;
    int amplifiers = 0;
    int gffs = 0;
    double flat_capacity_tbps = std::numeric_limits<double>::quiet_NaN();
    double optimized_capacity_tbps = std::numeric_limits<double>::quiet_NaN();
    double conventional_capacity_tbps = 0.0;
    int conventional_gffs = 0;

    double gain_vs_conventional_pct() const {
        return (optimized_capacity_tbps / conventional_capacity_tbps - 1.0) * 100.0;
    }
    double gff_reduction_pct() const {
        return (1.0 - static_cast<double>(gffs) / static_cast<double>(conventional_gffs)) * 100.0;
    }
};

inline std::string sweep_header() {
    return "f,amplifiers,gffs,flat_capacity_tbps,optimized_capacity_tbps,conventional_capacity_tbps,"
           "conventional_gffs,gain_vs_conventional_pct,gff_reduction_pct";
}

inline std::string sweep_csv(std::vector<SweepRow> rows, const std::string& comment) {
    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.f < b.f; });
    std::ostringstream s;
    s << "# " << comment << '\n' << sweep_header() << '\n';
    for (const auto& r : rows)
        s << r.f << ',' << r.amplifiers << ',' << r.gffs << ',' << format_double(r.flat_capacity_tbps) << ','
          << format_double(r.optimized_capacity_tbps) << ',' << format_double(r.conventional_capacity_tbps) << ','
          << r.conventional_gffs << ',' << format_double(r.gain_vs_conventional_pct()) << ','
          << format_double(r.gff_reduction_pct()) << '\n';
    return s.str();
}

inline std::vector<SweepRow> read_sweep_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open sweep '" + path.string() + "'");
    std::vector<SweepRow> rows;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != sweep_header()) throw IoError("unexpected sweep header in '" + path.string() + "'");
            header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (cells.size() != 9) throw IoError("malformed sweep row '" + line + "'");
        auto num = [](const std::string& v) { return v == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(v); };
        SweepRow r;
        r.f = std::stoi(cells[0]);
        r.amplifiers = std::stoi(cells[1]);
        r.gffs = std::stoi(cells[2]);
        r.flat_capacity_tbps = num(cells[3]);
        r.optimized_capacity_tbps = num(cells[4]);
        r.conventional_capacity_tbps = num(cells[5]);
        r.conventional_gffs = std::stoi(cells[6]);
        rows.push_back(r);
    }
    return rows;
}

namespace detail {

template <class F>
std::optional<perf::SnrReport> feasible_report(F&& evaluate) {
    try {
        return evaluate();
    } catch (const InfeasibleError& e) {
        spdlog::debug("{}", e.what());
        return std::nullopt;
    }
}

inline nlohmann::json report_or_null(const std::optional<perf::SnrReport>& r) {
    return r ? perf::to_json(*r) : nlohmann::json(nullptr);
}

}  // namespace detail

/// Reference figures printed next to the f = 7 results.
inline constexpr double kReferenceGffReductionPct = 86.0;
inline constexpr double kReferenceCapacityGainPct = 3.5 / 31.3 * 100.0;

inline std::string summary_line(const SweepRow& r) {
    return fmt::format("f={}: {} amplifiers, {} GFFs, GFF reduction {:.1f}% (reference {:.0f}%), capacity gain {:+.1f}% vs "
                       "conventional {:.3f} Tb/s (reference {:.1f}%)",
                       r.f, r.amplifiers, r.gffs, r.gff_reduction_pct(), kReferenceGffReductionPct,
                       r.gain_vs_conventional_pct(), r.conventional_capacity_tbps, kReferenceCapacityGainPct);
}

inline std::vector<SweepRow> cmd_report(const Context& ctx) {
    const auto model = load_model(ctx);
    const auto& cfg = ctx.config;
    link::LinkParams params = cfg.link;
    params.nf_db = resolve_nf(ctx);

    const auto conv_design = link::design_link(1, params);
    const auto conv = perf::evaluate_link(link::LaunchProfile::flat(operating_point::kReferenceTopDbm), conv_design, model,
                                          params, cfg.nli, link::PropagationMode::explicit_cascade);
    perf::check_linear_regime(conv);

    StageOutputs outs;
    record_config(outs, ctx);
    std::vector<SweepRow> rows;
    for (int f : cfg.f_list) {
        const auto dir = cfg.f_dir(f);
        const auto opt_path = dir / "optimize.json";
        if (!fs::exists(opt_path)) throw IoError("'" + opt_path.string() + "' not found; run optimize first");
        const auto opt = nn::read_json_file(opt_path);
        const auto design = link::design_link(f, params);

        const auto flat = detail::feasible_report([&] {
            return perf::evaluate_link(link::LaunchProfile::flat(operating_point::kReferenceTopDbm), design, model,
                                       params, cfg.nli, link::PropagationMode::explicit_cascade);
        });
        std::optional<perf::SnrReport> best;
        if (opt.at("feasible").get<bool>()) {
            const auto spectrum = read_spectrum_csv(dir / "spectrum.csv");
            best = detail::feasible_report(
                [&] { return optimizer::evaluate_optimized(spectrum, design, model, params, cfg.nli); });
        }

        SweepRow row;
        row.f = f;
        row.amplifiers = design.amplifiers;
        row.gffs = design.gffs;
        if (flat) row.flat_capacity_tbps = flat->capacity_tbps;
        if (best) row.optimized_capacity_tbps = best->capacity_tbps;
        row.conventional_capacity_tbps = conv.capacity_tbps;
        row.conventional_gffs = conv_design.gffs;
        rows.push_back(row);

        auto lj = link::to_json(params, f);
        lj["amplifiers"] = design.amplifiers;
        lj["gffs"] = design.gffs;
        lj["distance_km"] = design.distance_km;
        lj["config_hash"] = ctx.hash;
        outs.write_json(dir / "link.json", lj);
        nlohmann::json rj = {{"config_hash", ctx.hash},
                             {"flat", detail::report_or_null(flat)},
                             {"optimized", detail::report_or_null(best)}};
        if (best) rj["optimized_launch_excursion_db"] = best->launch_excursion_db();
        outs.write_json(dir / "report.json", rj);
        ctx.say("report f={}: flat {} Tb/s, optimized {} Tb/s", f,
                flat ? fmt::format("{:.3f}", flat->capacity_tbps) : std::string("infeasible"),
                best ? fmt::format("{:.3f}", best->capacity_tbps) : std::string("n/a"));
    }
    outs.write_text(cfg.sweep_path(), sweep_csv(rows, hash_comment(ctx)));
    outs.commit();
    for (const auto& r : rows)
        if (r.f == 7) ctx.say("{}", summary_line(r));
    return rows;
}

inline std::vector<SweepRow> cmd_sweep(const Context& ctx) {
    cmd_optimize(ctx);
    return cmd_report(ctx);
}

// ---------------------------------------------------------------- pipeline

inline const std::vector<std::string>& pipeline_stages() {
    static const std::vector<std::string> stages{"gen", "train", "calibrate", "optimize", "report"};
    return stages;
}

/// Runs every stage in order, echoing each stage name. A failure is logged with the stage
/// name and rethrown unchanged so the exit code still reflects its kind.
inline std::vector<SweepRow> cmd_pipeline(const Context& ctx) {
    std::vector<SweepRow> rows;
    const std::map<std::string, std::function<void()>> run{
        {"gen", [&] { cmd_gen_data(ctx); }},
        {"train", [&] { cmd_train_edfa(ctx); }},
        {"calibrate", [&] { cmd_calibrate(ctx); }},
        {"optimize", [&] { cmd_optimize(ctx); }},
        {"report", [&] { rows = cmd_report(ctx); }},
    };
    const auto& stages = pipeline_stages();
    for (std::size_t i = 0; i < stages.size(); ++i) {
        ctx.say("stage {}/{}: {}", i + 1, stages.size(), stages[i]);
        try {
            run.at(stages[i])();
        } catch (const std::exception& e) {
            spdlog::error("stage '{}' failed: {}", stages[i], e.what());
            throw;
        }
    }
    return rows;
}

}  // namespace subsea::cli
