#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "subsea/core/errors.hpp"
#include "subsea/core/random.hpp"
#include "subsea/edfa/grid.hpp"
#include "subsea/edfa/oracle.hpp"
#include "subsea/link/link.hpp"

namespace subsea::optimizer {

/// Seven contiguous ~5 nm sub-bands; action k pre-emphasizes the bands set in its 7-bit mask.
struct ActionSpace {
    static constexpr std::array<int, 7> kBandSizes{13, 13, 13, 13, 13, 12, 12};
    static constexpr int kBands = static_cast<int>(kBandSizes.size());
    static constexpr int kActions = 1 << kBands;
    static constexpr double kStepDb = 0.5;

    static constexpr int band_start(int band) {
        int start = 0;
        for (int b = 0; b < band; ++b) start += kBandSizes[static_cast<std::size_t>(b)];
        return start;
    }

    static constexpr int band_of(int channel) {
        for (int b = 0; b < kBands; ++b)
            if (channel < band_start(b + 1)) return b;
        return -1;
    }

    static constexpr bool masks(int action, int band) { return ((action >> band) & 1) != 0; }
};

static_assert(ActionSpace::band_start(ActionSpace::kBands) == kChannels, "sub-bands must partition the grid");
static_assert(ActionSpace::kActions == 128);

/// Adds 0.5 dB to the masked sub-bands, then shifts the whole spectrum by one uniform
/// offset so the total launch power is unchanged.
inline link::LaunchProfile apply_action(const link::LaunchProfile& p, int action) {
    if (action < 0 || action >= ActionSpace::kActions)
        throw UsageError("action " + std::to_string(action) + " outside [0, 127]");
    if (action == 0) return p;
    link::LaunchProfile out = p;
    for (int b = 0; b < ActionSpace::kBands; ++b) {
        if (!ActionSpace::masks(action, b)) continue;
        out.power_dbm.segment(ActionSpace::band_start(b), ActionSpace::kBandSizes[static_cast<std::size_t>(b)]) +=
            ActionSpace::kStepDb;
    }
    const double before_w = dbm_to_watt(p.power_dbm).sum();
    const double after_w = dbm_to_watt(out.power_dbm).sum();
    out.power_dbm -= 10.0 * std::log10(after_w / before_w);
    return out;
}

struct SpectrumBounds {
    double top_min_dbm = operating_point::kTopMinDbm;
    double top_max_dbm = operating_point::kTopMaxDbm;
    double max_ripple_db = 6.0;
};

/// Smooth random launch spectrum with a uniformly drawn TOP and ripple.
inline link::LaunchProfile random_spectrum(std::uint64_t seed, const SpectrumBounds& bounds = {}) {
    Rng rng(seed);
    const double top = rng.uniform(bounds.top_min_dbm, bounds.top_max_dbm);
    const double ripple = rng.uniform(0.0, bounds.max_ripple_db);
    link::LaunchProfile p;
    p.power_dbm = edfa::with_total_dbm(edfa::smooth_random_shape(rng, ripple), top);
    return p;
}

}  // namespace subsea::optimizer
