#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace subsea {

inline constexpr int kChannels = 89;
inline constexpr double kChannelSpacingHz = 50e9;
inline constexpr double kSpeedOfLight = 299'792'458.0;
inline constexpr double kPlanck = 6.626e-34;
inline constexpr double kFirstChannelWavelengthM = 1530e-9;

/// Per-channel quantity on the 89-channel grid (powers, gains, SNRs).
using ChannelArray = Eigen::Array<double, kChannels, 1>;

/// Amplifier operating point. The launch (TOP) plane is the fibre input; amplifier
/// inputs sit one nominal gain below it.
namespace operating_point {
inline constexpr double kNominalGainDb = 10.0;
inline constexpr double kReferenceTopDbm = 17.0;
inline constexpr double kCurrentMa = 500.0;
inline constexpr double kTopMinDbm = 16.0;
inline constexpr double kTopMaxDbm = 18.0;
}  // namespace operating_point

inline double dbm_to_watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w / 1e-3); }
inline ChannelArray dbm_to_watt(const ChannelArray& dbm) { return 1e-3 * Eigen::pow(10.0, dbm / 10.0); }
inline ChannelArray watt_to_dbm(const ChannelArray& w) { return 10.0 * (w / 1e-3).log10(); }

/// Total power in dBm of a per-channel dBm spectrum.
inline double total_dbm(const ChannelArray& dbm) { return watt_to_dbm(dbm_to_watt(dbm).sum()); }

inline double peak_to_peak(const ChannelArray& x) { return x.maxCoeff() - x.minCoeff(); }

/// 50 GHz comb starting at 1530 nm, frequencies decreasing with channel index.
class ChannelGrid {
public:
    ChannelGrid() {
        const double f0 = kSpeedOfLight / kFirstChannelWavelengthM;
        for (int i = 0; i < kChannels; ++i) {
            frequencies_hz_(i) = f0 - i * kChannelSpacingHz;
            wavelengths_nm_(i) = kSpeedOfLight / frequencies_hz_(i) * 1e9;
        }
    }

    static constexpr int size() { return kChannels; }
    static constexpr double spacing_hz() { return kChannelSpacingHz; }
    static constexpr int central_channel() { return kChannels / 2; }
    static constexpr double total_bandwidth_hz() { return kChannels * kChannelSpacingHz; }

    const ChannelArray& frequencies_hz() const { return frequencies_hz_; }
    const ChannelArray& wavelengths_nm() const { return wavelengths_nm_; }
    double frequency_hz(int i) const { return frequencies_hz_(i); }
    double wavelength_nm(int i) const { return wavelengths_nm_(i); }

private:
    ChannelArray frequencies_hz_;
    ChannelArray wavelengths_nm_;
};

inline const ChannelGrid& default_grid() {
    static const ChannelGrid grid;
    return grid;
}

}  // namespace subsea
