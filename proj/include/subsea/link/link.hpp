#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subsea/core/errors.hpp"
#include "subsea/edfa/grid.hpp"
#include "subsea/edfa/oracle.hpp"
#include "subsea/nn/checkpoint.hpp"

namespace subsea::link {

/// Physical and topological constants of a line. Serialized as the link description file.
struct LinkParams {
    double target_km = 13'400.0;
    double span_km_gffless = 62.7;
    double span_km_conventional = 53.7;
    double alpha_db_per_km = 0.1595;
    double nf_db = 5.0;
    double current_ma = operating_point::kCurrentMa;
    /// Offset between the launch plane and the amplifier-input plane.
    double reference_gain_db = operating_point::kNominalGainDb;
};

struct FibreSpec {
    double alpha_db_per_km = 0.1595;
    double length_km = 0.0;

    double loss_db() const { return alpha_db_per_km * length_km; }
    double transmission() const { return std::pow(10.0, -loss_db() / 10.0); }
};

/// Topology for a given GFF frequency f (amplifiers per gain-flattening filter).
struct LinkDesign {
    int gff_frequency = 1;
    int patterns = 0;           // M
    int amplifiers = 0;
    int gffs = 0;
    int spans = 0;
    int spans_per_pattern = 0;
    double span_km = 0.0;
    double distance_km = 0.0;
    double target_km = 0.0;

    bool conventional() const { return gff_frequency == 1; }
};

/// f = 1: one 53.7 km span and one GFF per amplifier, M = ceil(target / 53.7).
/// f >= 2: patterns of f amplifiers, f - 1 spans of 62.7 km, one fibre-less GFF,
/// M = ceil(target / ((f - 1) * 62.7)).
inline LinkDesign design_link(int f, const LinkParams& params = {}) {
    if (f < 1) throw UsageError("GFF frequency must be at least 1, got " + std::to_string(f));
    if (!(params.target_km > 0.0)) throw UsageError("target distance must be positive");
    LinkDesign d;
    d.gff_frequency = f;
    d.target_km = params.target_km;
    if (f == 1) {
        d.span_km = params.span_km_conventional;
        d.spans_per_pattern = 1;
        d.patterns = static_cast<int>(std::ceil(params.target_km / d.span_km));
        d.amplifiers = d.patterns;
    } else {
        d.span_km = params.span_km_gffless;
        d.spans_per_pattern = f - 1;
        d.patterns = static_cast<int>(std::ceil(params.target_km / ((f - 1) * d.span_km)));
        d.amplifiers = d.patterns * f;
    }
    d.gffs = d.patterns;
    d.spans = d.patterns * d.spans_per_pattern;
    d.distance_km = d.spans * d.span_km;
    return d;
}

/// Per-channel signal and ASE (W, ASE in one 50 GHz channel bandwidth).
struct ChannelState {
    ChannelArray signal_w = ChannelArray::Zero();
    ChannelArray ase_w = ChannelArray::Zero();
    double distance_km = 0.0;
    int amplifiers = 0;

    ChannelArray total_w() const { return signal_w + ase_w; }
};

struct LaunchProfile {
    ChannelArray power_dbm = ChannelArray::Constant(operating_point::kReferenceTopDbm -
                                                    10.0 * std::log10(static_cast<double>(kChannels)));

    static LaunchProfile flat(double top_dbm) {
        LaunchProfile p;
        p.power_dbm = ChannelArray::Constant(top_dbm - 10.0 * std::log10(static_cast<double>(kChannels)));
        return p;
    }
    double top_dbm() const { return total_dbm(power_dbm); }
    ChannelArray power_w() const { return dbm_to_watt(power_dbm); }
};

inline ChannelState propagate_span(ChannelState state, const FibreSpec& fibre) {
    if (fibre.length_km < 0.0) throw UsageError("span length must be non-negative");
    const double t = fibre.transmission();
    state.signal_w *= t;
    state.ase_w *= t;
    state.distance_km += fibre.length_km;
    return state;
}

/// ASE added by one amplifier in a channel: n_sp h f (G - 1) B with n_sp = NF / 2.
inline ChannelArray added_ase_w(const ChannelArray& gain_linear, double nf_db, const ChannelGrid& grid = default_grid()) {
    const double nsp = std::pow(10.0, nf_db / 10.0) / 2.0;
    return nsp * kPlanck * grid.frequencies_hz() * (gain_linear - 1.0) * kChannelSpacingHz;
}

/// Amplifies signal and ASE with the gain the model assigns to the *total* per-channel
/// input, then injects fresh ASE. `gain_db_out`, if given, receives the gain used.
template <edfa::GainModel M>
ChannelState apply_edfa(ChannelState state, const M& model, double nf_db,
                        double current_ma = operating_point::kCurrentMa, ChannelArray* gain_db_out = nullptr) {
    const ChannelArray gain_db = model.gain(watt_to_dbm(state.total_w()), current_ma);
    if (!gain_db.isFinite().all()) throw NumericError("amplifier model returned a non-finite gain");
    const ChannelArray g = Eigen::pow(10.0, gain_db / 10.0);
    state.signal_w *= g;
    state.ase_w = state.ase_w * g + added_ase_w(g, nf_db);
    state.amplifiers += 1;
    if (gain_db_out) *gain_db_out = gain_db;
    return state;
}

/// Attenuation-only equalizer: scales signal and ASE together so every channel's total
/// equals `target_w`. Totals up to `tolerance` (relative) below target are accepted and
/// brought up to it; anything lower means the filter would need gain.
inline ChannelState apply_gff(ChannelState state, const ChannelArray& target_w, double tolerance = 1e-9) {
    const ChannelArray total = state.total_w();
    const ChannelArray ratio = target_w / total;
    Eigen::Index worst = 0;
    const double worst_ratio = ratio.maxCoeff(&worst);
    if (!(worst_ratio <= 1.0 + tolerance))
        throw InfeasibleError(static_cast<int>(worst), 10.0 * std::log10(worst_ratio));
    state.signal_w *= ratio;
    state.ase_w *= ratio;
    return state;
}

struct PatternResult {
    ChannelState state;
    /// Mean over the pattern's amplifiers of each amplifier's channel-averaged gain (dB).
    double mean_gain_db = 0.0;
};

namespace detail {

template <edfa::GainModel M>
PatternResult run_pattern(ChannelState state, const ChannelArray& target_w, const LinkDesign& design, const M& model,
                          const LinkParams& params) {
    const FibreSpec fibre{params.alpha_db_per_km, design.span_km};
    double gain_sum = 0.0;
    ChannelArray gain_db;
    auto amplify = [&] {
        state = apply_edfa(std::move(state), model, params.nf_db, params.current_ma, &gain_db);
        gain_sum += gain_db.mean();
    };
    if (design.conventional()) {
        amplify();
        state = propagate_span(std::move(state), fibre);
    } else {
        for (int k = 0; k < design.gff_frequency - 1; ++k) {
            amplify();
            state = propagate_span(std::move(state), fibre);
        }
        amplify();
    }
    state = apply_gff(std::move(state), target_w);
    return {std::move(state), gain_sum / design.gff_frequency};
}

inline ChannelState rescale(ChannelState state, double factor) {
    state.signal_w *= factor;
    state.ase_w *= factor;
    return state;
}

}  // namespace detail

/// One pattern: [EDFA, span] x (f - 1), EDFA, GFF (f = 1: EDFA, span, GFF).
///
/// The cascade runs at the amplifier-input plane, one reference gain below the launch
/// plane; the GFF restores that plane's copy of the launch profile. The returned state
/// is referred back to the launch plane, so its totals equal the launch profile.
template <edfa::GainModel M>
PatternResult propagate_pattern(const LaunchProfile& launch, const LinkDesign& design, const M& model,
                                const LinkParams& params) {
    const double to_input_plane = std::pow(10.0, -params.reference_gain_db / 10.0);
    const ChannelArray target = launch.power_w() * to_input_plane;
    ChannelState start;
    start.signal_w = target;
    auto result = detail::run_pattern(std::move(start), target, design, model, params);
    result.state = detail::rescale(std::move(result.state), 1.0 / to_input_plane);
    return result;
}

enum class PropagationMode { explicit_cascade, extrapolated };

/// End-of-link state. Explicit mode cascades all M patterns. Extrapolated mode runs one
/// pattern and applies the closed form: every pattern sees the same input totals, so each
/// transmits the same signal fraction T_i and signal_M = P_i T_i^M, ASE_M = P_i - signal_M.
template <edfa::GainModel M>
PatternResult propagate_full(const LaunchProfile& launch, const LinkDesign& design, const M& model,
                             const LinkParams& params, PropagationMode mode = PropagationMode::extrapolated) {
    if (design.patterns < 1) throw UsageError("link design has no patterns");
    const double to_input_plane = std::pow(10.0, -params.reference_gain_db / 10.0);
    const ChannelArray target = launch.power_w() * to_input_plane;
    ChannelState state;
    state.signal_w = target;

    if (mode == PropagationMode::explicit_cascade) {
        double gain_sum = 0.0;
        for (int m = 0; m < design.patterns; ++m) {
            auto r = detail::run_pattern(std::move(state), target, design, model, params);
            state = std::move(r.state);
            gain_sum += r.mean_gain_db;
        }
        return {detail::rescale(std::move(state), 1.0 / to_input_plane), gain_sum / design.patterns};
    }

    auto one = detail::run_pattern(std::move(state), target, design, model, params);
    const double m = design.patterns;
    // 1 - T^M computed as -expm1(M log1p(-ASE_1 / P)) to stay accurate when T is near 1
    const ChannelArray noise_fraction = one.state.ase_w / target;
    ChannelArray ase_fraction;
    for (int i = 0; i < kChannels; ++i) ase_fraction(i) = -std::expm1(m * std::log1p(-noise_fraction(i)));
    ChannelState end;
    end.ase_w = target * ase_fraction;
    end.signal_w = target - end.ase_w;
    end.distance_km = one.state.distance_km * m;
    end.amplifiers = one.state.amplifiers * design.patterns;
    return {detail::rescale(std::move(end), 1.0 / to_input_plane), one.mean_gain_db};
}

inline nlohmann::json to_json(const LinkParams& p, int gff_frequency) {
    return {{"gff_frequency", gff_frequency},
            {"target_km", p.target_km},
            {"span_km_gffless", p.span_km_gffless},
            {"span_km_conventional", p.span_km_conventional},
            {"alpha_db_per_km", p.alpha_db_per_km},
            {"nf_db", p.nf_db}};
}

struct LinkDescription {
    int gff_frequency = 1;
    LinkParams params;
};

inline LinkDescription link_description_from_json(const nlohmann::json& j) {
    LinkDescription d;
    d.gff_frequency = j.at("gff_frequency").get<int>();
    d.params.target_km = j.at("target_km").get<double>();
    d.params.span_km_gffless = j.at("span_km_gffless").get<double>();
    d.params.span_km_conventional = j.at("span_km_conventional").get<double>();
    d.params.alpha_db_per_km = j.at("alpha_db_per_km").get<double>();
    d.params.nf_db = j.at("nf_db").get<double>();
    return d;
}

inline void save_link_description(const std::filesystem::path& path, const LinkParams& p, int gff_frequency) {
    nn::write_json_file(path, to_json(p, gff_frequency));
}

inline LinkDescription load_link_description(const std::filesystem::path& path) {
    return link_description_from_json(nn::read_json_file(path));
}

}  // namespace subsea::link
