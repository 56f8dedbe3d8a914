#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "subsea/edfa/oracle.hpp"
#include "subsea/link/link.hpp"

using namespace subsea;
using namespace subsea::link;

namespace {

// Gain stub with 0 dB on one channel and 10 dB elsewhere.
struct OneUnityChannel {
    int channel = 30;
    ChannelArray gain(const ChannelArray&, double) const {
        ChannelArray g = ChannelArray::Constant(10.0);
        g(channel) = 0.0;
        return g;
    }
};

double max_rel(const ChannelArray& a, const ChannelArray& b) { return ((a - b) / b.abs()).abs().maxCoeff(); }

const edfa::GainOracle& oracle() {
    static const edfa::GainOracle o;
    return o;
}

}  // namespace

TEST(DesignLink, PublishedTopologies) {
    const auto d1 = design_link(1);
    EXPECT_EQ(d1.amplifiers, 250);
    EXPECT_EQ(d1.gffs, 250);
    EXPECT_NEAR(d1.distance_km, 13'425.0, 1e-6);
    const auto d7 = design_link(7);
    EXPECT_EQ(d7.patterns, 36);
    EXPECT_EQ(d7.amplifiers, 252);
    EXPECT_EQ(d7.gffs, 36);
    EXPECT_NEAR(d7.distance_km, 13'543.2, 1e-6);
    const auto d2 = design_link(2);
    EXPECT_EQ(d2.patterns, 214);
    EXPECT_EQ(d2.amplifiers, 428);
}

TEST(DesignLink, CountsForEveryFrequencyUpToTwenty) {
    for (int f = 1; f <= 20; ++f) {
        const auto d = design_link(f);
        const double per_pattern = f == 1 ? 53.7 : (f - 1) * 62.7;
        const int m = static_cast<int>(std::ceil(13'400.0 / per_pattern));
        EXPECT_EQ(d.patterns, m) << "f=" << f;
        EXPECT_EQ(d.amplifiers, f == 1 ? m : m * f) << "f=" << f;
        EXPECT_EQ(d.gffs, m) << "f=" << f;
        EXPECT_GE(d.distance_km, 13'400.0) << "f=" << f;
        EXPECT_LT(d.distance_km - per_pattern, 13'400.0) << "f=" << f;
    }
}

TEST(DesignLink, RejectsFrequencyBelowOne) {
    EXPECT_THROW(design_link(0), UsageError);
    EXPECT_THROW(design_link(-3), UsageError);
}

TEST(Span, LossesFollowAttenuation) {
    const FibreSpec gffless{0.1595, 62.7};
    EXPECT_NEAR(gffless.loss_db(), 10.00065, 1e-9);
    ChannelState s;
    s.signal_w = ChannelArray::Constant(2e-3);
    s.ase_w = ChannelArray::Constant(1e-6);
    const auto out = propagate_span(s, gffless);
    const double t = std::pow(10.0, -0.1595 * 62.7 / 10.0);
    EXPECT_LT(max_rel(out.signal_w, s.signal_w * t), 1e-14);
    EXPECT_LT(max_rel(out.ase_w, s.ase_w * t), 1e-14);
    EXPECT_NEAR(t, 0.1, 2e-5);
    EXPECT_DOUBLE_EQ(out.distance_km, 62.7);
    EXPECT_NEAR((FibreSpec{0.1595, 53.7}.loss_db()), 8.565, 5e-4);
}

TEST(Span, ZeroLengthLeavesStateUnchanged) {
    ChannelState s;
    s.signal_w = ChannelArray::Constant(1e-3);
    s.ase_w = ChannelArray::Constant(3e-7);
    const auto out = propagate_span(s, {0.1595, 0.0});
    EXPECT_TRUE((out.signal_w == s.signal_w).all());
    EXPECT_TRUE((out.ase_w == s.ase_w).all());
}

TEST(Edfa, NoiselessFlatGainScalesBothByTen) {
    ChannelState s;
    s.signal_w = ChannelArray::Constant(1e-4);
    s.ase_w = ChannelArray::Constant(2e-8);
    const auto out = apply_edfa(s, edfa::FlatGain{10.0}, -std::numeric_limits<double>::infinity());
    EXPECT_LT(max_rel(out.signal_w, s.signal_w * 10.0), 1e-14);
    EXPECT_LT(max_rel(out.ase_w, s.ase_w * 10.0), 1e-14);
    EXPECT_EQ(out.amplifiers, 1);
}

TEST(Edfa, AddedAseFollowsNoiseFormula) {
    // (10^(nf/10) / 2) h f (G - 1) df at G = 10, nf = 5 dB, f = 193.5 THz
    const double expected = (std::pow(10.0, 0.5) / 2.0) * 6.626e-34 * 193.5e12 * 9.0 * 50e9;
    EXPECT_NEAR(expected, 9.122e-8, 1e-10);
    const auto& grid = default_grid();
    ChannelState s;
    s.signal_w = ChannelArray::Constant(1e-4);
    const auto out = apply_edfa(s, edfa::FlatGain{10.0}, 5.0);
    for (int i = 0; i < kChannels; ++i) {
        const double want = (std::pow(10.0, 0.5) / 2.0) * 6.626e-34 * grid.frequency_hz(i) * 9.0 * 50e9;
        EXPECT_NEAR(out.ase_w(i) / want, 1.0, 1e-12);
    }
}

TEST(Edfa, UnityGainChannelGetsNoAse) {
    ChannelState s;
    s.signal_w = ChannelArray::Constant(1e-4);
    const auto out = apply_edfa(s, OneUnityChannel{}, 5.0);
    EXPECT_EQ(out.ase_w(30), 0.0);
    EXPECT_GT(out.ase_w(31), 0.0);
}

TEST(Gff, StateAtTargetIsUnchanged) {
    ChannelState s;
    s.signal_w = LaunchProfile::flat(17.0).power_w() * 0.9;
    s.ase_w = LaunchProfile::flat(17.0).power_w() * 0.1;
    const auto out = apply_gff(s, s.total_w());
    EXPECT_TRUE((out.signal_w == s.signal_w).all());
    EXPECT_TRUE((out.ase_w == s.ase_w).all());
}

TEST(Gff, IsIdempotent) {
    Rng rng(5);
    ChannelState s;
    s.signal_w = dbm_to_watt(edfa::smooth_random_shape(rng, 4.0) + 8.0);
    s.ase_w = s.signal_w * 0.02;
    const ChannelArray target = LaunchProfile::flat(17.0).power_w();
    const auto once = apply_gff(s, target);
    const auto twice = apply_gff(once, target);
    EXPECT_LT(max_rel(twice.signal_w, once.signal_w), 1e-15);
    EXPECT_LT(max_rel(twice.ase_w, once.ase_w), 1e-15);
    EXPECT_LT(max_rel(once.total_w(), target), 1e-15);
}

TEST(Gff, NamesWorstChannelWhenAmplificationNeeded) {
    ChannelState s;
    s.signal_w = ChannelArray::Constant(1e-3);
    s.signal_w(12) = 0.25e-3;  // 6.02 dB short
    s.signal_w(40) = 0.5e-3;
    try {
        apply_gff(s, ChannelArray::Constant(1e-3));
        FAIL() << "expected InfeasibleError";
    } catch (const InfeasibleError& e) {
        EXPECT_EQ(e.channel(), 12);
        EXPECT_NEAR(e.shortfall_db(), 10.0 * std::log10(4.0), 1e-12);
    }
}

TEST(Gff, TwoAmplifierPatternLeavesOneAmplifierOfHeadroom) {
    LinkParams p;
    const auto launch = LaunchProfile::flat(17.0);
    const ChannelArray target = launch.power_w() * 0.1;  // amplifier-input plane
    ChannelState s;
    s.signal_w = target;
    s = apply_edfa(s, oracle(), p.nf_db);
    s = propagate_span(s, {p.alpha_db_per_km, 62.7});
    s = apply_edfa(s, oracle(), p.nf_db);
    const ChannelArray headroom_db = 10.0 * (s.total_w() / target).log10();
    EXPECT_TRUE((headroom_db >= 0.0).all());
    EXPECT_NEAR(headroom_db.mean(), 10.0, 1.0);
}

TEST(Pattern, NoiselessStubReproducesLaunch) {
    LinkParams p;
    p.nf_db = -std::numeric_limits<double>::infinity();
    const auto launch = LaunchProfile::flat(17.0);
    for (int f : {1, 2, 5}) {
        const auto r = propagate_pattern(launch, design_link(f, p), edfa::FlatGain{10.0}, p);
        EXPECT_LT(max_rel(r.state.signal_w, launch.power_w()), 1e-12) << "f=" << f;
        EXPECT_TRUE((r.state.ase_w == 0.0).all());
    }
}

TEST(Pattern, NoiseOccupiesTheGapBelowLaunch) {
    LinkParams p;
    Rng rng(2);
    LaunchProfile launch;
    launch.power_dbm = edfa::with_total_dbm(edfa::smooth_random_shape(rng, 2.0), 17.0);
    for (int f : {2, 3, 4}) {
        const auto r = propagate_pattern(launch, design_link(f, p), oracle(), p);
        EXPECT_TRUE((r.state.signal_w < launch.power_w()).all()) << "f=" << f;
        EXPECT_LT(max_rel(r.state.total_w(), launch.power_w()), 1e-12) << "f=" << f;
        EXPECT_EQ(r.state.amplifiers, f);
    }
}

TEST(Propagate, ExtrapolationMatchesExplicitCascadeAtThreePatterns) {
    LinkParams p;
    p.target_km = 300.0;
    const auto d = design_link(3, p);
    ASSERT_EQ(d.patterns, 3);
    Rng rng(9);
    LaunchProfile launch;
    launch.power_dbm = edfa::with_total_dbm(edfa::smooth_random_shape(rng, 3.0), 16.5);
    const auto ex = propagate_full(launch, d, oracle(), p, PropagationMode::explicit_cascade);
    const auto ap = propagate_full(launch, d, oracle(), p, PropagationMode::extrapolated);
    EXPECT_LT(max_rel(ap.state.ase_w, ex.state.ase_w), 1e-9);
    EXPECT_LT(max_rel(ap.state.signal_w, ex.state.signal_w), 1e-9);
    EXPECT_EQ(ap.state.amplifiers, ex.state.amplifiers);
    EXPECT_NEAR(ap.mean_gain_db, ex.mean_gain_db, 1e-9);
}

TEST(Propagate, SinglePatternModesAgree) {
    LinkParams p;
    p.target_km = 60.0;
    const auto d = design_link(2, p);
    ASSERT_EQ(d.patterns, 1);
    const auto launch = LaunchProfile::flat(17.0);
    const auto ex = propagate_full(launch, d, oracle(), p, PropagationMode::explicit_cascade);
    const auto ap = propagate_full(launch, d, oracle(), p, PropagationMode::extrapolated);
    EXPECT_LT(max_rel(ap.state.ase_w, ex.state.ase_w), 1e-12);
}

TEST(Propagate, AseNonDecreasingAlongTheCascade) {
    LinkParams p;
    const auto launch = LaunchProfile::flat(17.0);
    ChannelArray previous = ChannelArray::Zero();
    for (int m = 1; m <= 40; ++m) {
        p.target_km = m * 2 * 62.7 - 1.0;
        const auto d = design_link(3, p);
        ASSERT_EQ(d.patterns, m);
        const auto r = propagate_full(launch, d, oracle(), p, PropagationMode::explicit_cascade);
        EXPECT_TRUE((r.state.ase_w >= previous).all()) << "m=" << m;
        previous = r.state.ase_w;
    }
}

TEST(Propagate, ConventionalAseGrowsLinearly) {
    LinkParams p;
    p.nf_db = 4.75;
    const auto launch = LaunchProfile::flat(17.0);
    const auto full = design_link(1, p);
    p.target_km = 125 * 53.7 - 1.0;
    const auto half = design_link(1, p);
    ASSERT_EQ(full.amplifiers, 250);
    ASSERT_EQ(half.amplifiers, 125);
    const auto a = propagate_full(launch, full, oracle(), p, PropagationMode::explicit_cascade);
    const auto b = propagate_full(launch, half, oracle(), p, PropagationMode::explicit_cascade);
    const ChannelArray ratio = a.state.ase_w / b.state.ase_w;
    EXPECT_LT((ratio - 2.0).abs().maxCoeff() / 2.0, 0.01);
}

TEST(LinkDescription, RoundTrips) {
    LinkParams p;
    p.nf_db = 4.8;
    const auto back = link_description_from_json(nlohmann::json::parse(to_json(p, 7).dump()));
    EXPECT_EQ(back.gff_frequency, 7);
    EXPECT_EQ(back.params.nf_db, 4.8);
    EXPECT_EQ(back.params.span_km_gffless, 62.7);
    EXPECT_EQ(back.params.alpha_db_per_km, 0.1595);
}
