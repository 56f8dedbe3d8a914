#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "subsea/core/errors.hpp"
#include "subsea/edfa/grid.hpp"
#include "subsea/link/link.hpp"

namespace subsea::perf {

/// Fibre constants for the closed-form incoherent NLI estimate. The WDM bandwidth comes
/// from the channel grid.
struct NliParams {
    double gamma_per_w_km = 1.3;
    double beta2_ps2_per_km = -21.7;
    double alpha_db_per_km = 0.1595;

    static constexpr double bandwidth_hz() { return ChannelGrid::total_bandwidth_hz(); }
};

/// NLI power in one channel bandwidth, accumulated incoherently over `n_spans`:
///   G_NLI = (8/27) g^2 G^3 Leff^2 asinh(pi^2/2 |b2| La B^2) / (pi |b2| La)
/// with G the central channel's launch PSD. Applied uniformly to every channel.
inline double nli_power_central(const link::LaunchProfile& launch, const NliParams& params, int n_spans,
                                double span_km) {
    if (n_spans < 0) throw UsageError("span count must be non-negative");
    if (n_spans == 0) return 0.0;
    const double alpha_field = params.alpha_db_per_km * std::log(10.0) / 20.0;  // Np/km
    const double l_eff = -std::expm1(-2.0 * alpha_field * span_km) / (2.0 * alpha_field);
    const double l_asym = 1.0 / (2.0 * alpha_field);
    const double beta2 = std::abs(params.beta2_ps2_per_km) * 1e-24;  // s^2/km
    const double b = NliParams::bandwidth_hz();
    const double psd = dbm_to_watt(launch.power_dbm(ChannelGrid::central_channel())) / kChannelSpacingHz;
    const double g_nli = (8.0 / 27.0) * params.gamma_per_w_km * params.gamma_per_w_km * psd * psd * psd * l_eff *
                         l_eff * std::asinh(std::numbers::pi * std::numbers::pi / 2.0 * beta2 * l_asym * b * b) /
                         (std::numbers::pi * beta2 * l_asym);
    return n_spans * g_nli * kChannelSpacingHz;
}

struct Snr {
    ChannelArray linear;
    ChannelArray db;
};

inline Snr snr_per_channel(const link::ChannelState& end_state, double nli_w) {
    const ChannelArray noise = end_state.ase_w + nli_w;
    if ((noise <= 0.0).any()) throw NumericError("SNR undefined: zero noise power on at least one channel");
    Snr s;
    s.linear = end_state.signal_w / noise;
    s.db = 10.0 * s.linear.log10();
    return s;
}

/// Dual-polarization Shannon capacity in Tb/s: sum_i 2 * 50 GHz * log2(1 + SNR_i).
inline double capacity_tbps(const ChannelArray& snr_linear) {
    if ((snr_linear < 0.0).any()) throw UsageError("capacity: negative linear SNR");
    return (2.0 * kChannelSpacingHz * (1.0 + snr_linear).log() / std::numbers::ln2).sum() / 1e12;
}

/// Per-channel evaluation of one launch profile on one link.
struct SnrReport {
    int gff_frequency = 0;
    int amplifiers = 0;
    int gffs = 0;
    double distance_km = 0.0;
    double nf_db = 0.0;
    double nli_w = 0.0;
    double mean_gain_db = 0.0;
    double capacity_tbps = 0.0;
    ChannelArray launch_dbm;
    ChannelArray signal_w;
    ChannelArray ase_w;
    ChannelArray snr_db;

    /// NLI share of the channel-averaged total noise.
    double nli_fraction() const { return nli_w / (ase_w.mean() + nli_w); }

    double launch_excursion_db() const { return peak_to_peak(launch_dbm); }

    /// Recomputes SNR and capacity from the stored powers.
    bool consistent(double tolerance = 1e-9) const {
        const ChannelArray snr = signal_w / (ase_w + nli_w);
        const double c = perf::capacity_tbps(snr);
        return std::abs(c - capacity_tbps) <= tolerance * std::max(1.0, capacity_tbps) &&
               ((10.0 * snr.log10() - snr_db).abs() <= 1e-9).all();
    }
};

inline int nli_span_count(const link::LinkDesign& d) { return d.spans; }

template <edfa::GainModel M>
SnrReport evaluate_link(const link::LaunchProfile& launch, const link::LinkDesign& design, const M& model,
                        const link::LinkParams& params, const NliParams& nli_params,
                        link::PropagationMode mode = link::PropagationMode::extrapolated) {
    const auto end = link::propagate_full(launch, design, model, params, mode);
    const double nli = nli_power_central(launch, nli_params, nli_span_count(design), design.span_km);
    const Snr snr = snr_per_channel(end.state, nli);
    SnrReport r;
    r.gff_frequency = design.gff_frequency;
    r.amplifiers = design.amplifiers;
    r.gffs = design.gffs;
    r.distance_km = design.distance_km;
    r.nf_db = params.nf_db;
    r.nli_w = nli;
    r.mean_gain_db = end.mean_gain_db;
    r.capacity_tbps = capacity_tbps(snr.linear);
    r.launch_dbm = launch.power_dbm;
    r.signal_w = end.state.signal_w;
    r.ase_w = end.state.ase_w;
    r.snr_db = snr.db;
    return r;
}

inline nlohmann::json to_json(const SnrReport& r, const ChannelGrid& grid = default_grid()) {
    nlohmann::json j;
    j["metadata"] = {{"gff_frequency", r.gff_frequency},
                     {"amplifiers", r.amplifiers},
                     {"gffs", r.gffs},
                     {"distance_km", r.distance_km},
                     {"nf_db", r.nf_db},
                     {"nli_w", r.nli_w},
                     {"nli_fraction", r.nli_fraction()},
                     {"mean_gain_db", r.mean_gain_db},
                     {"launch_top_dbm", total_dbm(r.launch_dbm)},
                     {"launch_min_dbm", r.launch_dbm.minCoeff()},
                     {"launch_max_dbm", r.launch_dbm.maxCoeff()},
                     {"capacity_tbps", r.capacity_tbps}};
    auto& rows = j["channels"] = nlohmann::json::array();
    for (int i = 0; i < kChannels; ++i) {
        rows.push_back({{"channel", i},
                        {"freq_thz", grid.frequency_hz(i) / 1e12},
                        {"signal_dbm", watt_to_dbm(r.signal_w(i))},
                        {"ase_dbm", watt_to_dbm(r.ase_w(i))},
                        {"snr_db", r.snr_db(i)}});
    }
    return j;
}

struct CalibrationResult {
    double nf_db = 0.0;
    double capacity_tbps = 0.0;
    double target_tbps = 0.0;
    int iterations = 0;
};

/// Bisection on nf in [lo, hi] until capacity(nf) is within `tolerance` of the target.
/// `capacity_at_nf` must be strictly decreasing.
inline CalibrationResult calibrate_noise_figure(const std::function<double(double)>& capacity_at_nf,
                                                double target_tbps = 31.3, double lo_db = 3.0, double hi_db = 10.0,
                                                double tolerance_tbps = 0.05, int max_iterations = 30) {
    const double c_lo = capacity_at_nf(lo_db);
    const double c_hi = capacity_at_nf(hi_db);
    if (!(target_tbps <= c_lo && target_tbps >= c_hi))
        throw CalibrationError("target " + std::to_string(target_tbps) + " Tb/s outside bracket: " +
                               std::to_string(c_lo) + " Tb/s at nf " + std::to_string(lo_db) + " dB, " +
                               std::to_string(c_hi) + " Tb/s at nf " + std::to_string(hi_db) + " dB");
    CalibrationResult r;
    r.target_tbps = target_tbps;
    double lo = lo_db, hi = hi_db;
    for (int it = 1; it <= max_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double c = capacity_at_nf(mid);
        r.nf_db = mid;
        r.capacity_tbps = c;
        r.iterations = it;
        if (std::abs(c - target_tbps) <= tolerance_tbps) return r;
        (c > target_tbps ? lo : hi) = mid;
    }
    throw CalibrationError("bisection did not reach " + std::to_string(tolerance_tbps) + " Tb/s in " +
                           std::to_string(max_iterations) + " iterations");
}

/// Calibrates against the conventional (f = 1) line with a flat launch at the reference TOP.
template <edfa::GainModel M>
CalibrationResult calibrate_conventional(const M& model, link::LinkParams params, const NliParams& nli,
                                         double target_tbps = 31.3) {
    const auto design = link::design_link(1, params);
    const auto launch = link::LaunchProfile::flat(operating_point::kReferenceTopDbm);
    return calibrate_noise_figure(
        [&](double nf) {
            params.nf_db = nf;
            return evaluate_link(launch, design, model, params, nli).capacity_tbps;
        },
        target_tbps);
}

/// Logs and returns the NLI share of total noise; flags the linear-regime bound.
inline double check_linear_regime(const SnrReport& report, double limit = 0.10) {
    const double f = report.nli_fraction();
    if (f < limit)
        spdlog::info("NLI is {:.2f}% of total noise (bound {:.0f}%)", 100.0 * f, 100.0 * limit);
    else
        spdlog::warn("NLI is {:.2f}% of total noise, above the {:.0f}% linear-regime bound", 100.0 * f, 100.0 * limit);
    return f;
}

}  // namespace subsea::perf
