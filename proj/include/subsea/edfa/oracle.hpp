#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numbers>
#include <string>

#include "subsea/core/errors.hpp"
#include "subsea/core/random.hpp"
#include "subsea/edfa/grid.hpp"

namespace subsea::edfa {

inline constexpr double kMinCurrentMa = 100.0;
inline constexpr double kMaxCurrentMa = 800.0;

struct EdfaInput {
    ChannelArray power_dbm;
    double current_ma = operating_point::kCurrentMa;
};

using GainSpectrum = ChannelArray;

/// Anything that maps per-channel input powers (dBm) and pump current to per-channel gain (dB).
template <class M>
concept GainModel = requires(const M& m, const ChannelArray& pin_dbm, double current_ma) {
    { m.gain(pin_dbm, current_ma) } -> std::convertible_to<ChannelArray>;
};

/// Flat input spectrum whose total is the amplifier input that produces the reference
/// TOP at nominal gain (7 dBm total, about -12.49 dBm per channel).
inline ChannelArray reference_input_dbm() {
    const double per_channel = operating_point::kReferenceTopDbm - operating_point::kNominalGainDb -
                               10.0 * std::log10(static_cast<double>(kChannels));
    return ChannelArray::Constant(per_channel);
}

/// Deterministic synthetic amplifier used as ground truth for dataset labels.
///
/// G_i = [B(l_i) + R(l_i) + G_cal] * k(I) - 0.25 * max(0, P_tot - 3 dBm), with a
/// two-peak erbium-like base profile B, a 7.3 nm ripple R and pump scaling
/// k(I) = 0.7 + 0.3 sqrt(I / 500 mA). G_cal puts the mean gain at exactly 10 dB
/// for `reference_input_dbm()` at 500 mA.
class GainOracle {
public:
    static constexpr double kCompressionSlope = 0.25;
    static constexpr double kCompressionKneeDbm = 3.0;

    explicit GainOracle(const ChannelGrid& grid = default_grid()) {
        for (int i = 0; i < kChannels; ++i) {
            const double lambda = grid.wavelength_nm(i);
            const double base = 9.0 + 2.2 * std::exp(-std::pow((lambda - 1531.0) / 3.0, 2)) +
                                1.2 * std::exp(-std::pow((lambda - 1558.0) / 8.0, 2));
            const double ripple = 0.4 * std::sin(2.0 * std::numbers::pi * (lambda - 1530.0) / 7.3);
            profile_db_(i) = base + ripple;
        }
        // mean gain is affine in G_cal with slope k(500 mA) = 1
        const ChannelArray ref = reference_input_dbm();
        const double compression = compression_db(total_dbm(ref));
        calibration_db_ = (operating_point::kNominalGainDb + compression) / pump_scale(operating_point::kCurrentMa) -
                          profile_db_.mean();
    }

    static double pump_scale(double current_ma) { return 0.7 + 0.3 * std::sqrt(current_ma / 500.0); }

    static double compression_db(double total_input_dbm) {
        return kCompressionSlope * std::max(0.0, total_input_dbm - kCompressionKneeDbm);
    }

    double calibration_db() const { return calibration_db_; }
    const ChannelArray& profile_db() const { return profile_db_; }

    GainSpectrum gain(const ChannelArray& pin_dbm, double current_ma) const {
        if (!(current_ma >= kMinCurrentMa && current_ma <= kMaxCurrentMa))
            throw UsageError("drive current " + std::to_string(current_ma) + " mA outside [100, 800] mA");
        if (!pin_dbm.isFinite().all()) throw UsageError("oracle input powers must be finite");
        return (profile_db_ + calibration_db_) * pump_scale(current_ma) - compression_db(total_dbm(pin_dbm));
    }

    GainSpectrum gain(const EdfaInput& in) const { return gain(in.power_dbm, in.current_ma); }

private:
    ChannelArray profile_db_;
    double calibration_db_ = 0.0;
};

inline GainSpectrum oracle_gain(const EdfaInput& in) {
    static const GainOracle oracle;
    return oracle.gain(in);
}

/// Spectrally flat gain regardless of input; test stub and noiseless reference.
struct FlatGain {
    double gain_db = operating_point::kNominalGainDb;
    ChannelArray gain(const ChannelArray&, double) const { return ChannelArray::Constant(gain_db); }
};

/// Smooth random spectral shape: three sinusoids of 1, 2 and 3 cycles across the band
/// with random phases, rescaled to the requested peak-to-peak ripple and zero mean.
inline ChannelArray smooth_random_shape(Rng& rng, double ripple_db, const ChannelGrid& grid = default_grid()) {
    const double span_nm = grid.wavelength_nm(kChannels - 1) - grid.wavelength_nm(0);
    double phase[3];
    for (double& p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
    ChannelArray shape;
    for (int i = 0; i < kChannels; ++i) {
        const double x = (grid.wavelength_nm(i) - grid.wavelength_nm(0)) / span_nm;
        shape(i) = 0.0;
        for (int k = 0; k < 3; ++k) shape(i) += std::sin(2.0 * std::numbers::pi * (k + 1) * x + phase[k]);
    }
    shape -= shape.mean();
    const double ptp = peak_to_peak(shape);
    if (ptp > 0.0) shape *= ripple_db / ptp;
    return shape;
}

/// Shifts a dBm spectrum uniformly so its total power equals `target_total_dbm`.
inline ChannelArray with_total_dbm(const ChannelArray& dbm, double target_total_dbm) {
    return dbm + (target_total_dbm - total_dbm(dbm));
}

}  // namespace subsea::edfa
