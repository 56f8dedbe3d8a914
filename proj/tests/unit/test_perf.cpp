#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "subsea/edfa/oracle.hpp"
#include "subsea/perf/perf.hpp"

using namespace subsea;
using namespace subsea::perf;

namespace {

const edfa::GainOracle& oracle() {
    static const edfa::GainOracle o;
    return o;
}

link::LaunchProfile flat_per_channel(double dbm) {
    link::LaunchProfile p;
    p.power_dbm = ChannelArray::Constant(dbm);
    return p;
}

}  // namespace

TEST(Nli, ZeroSpansGiveZero) { EXPECT_EQ(nli_power_central(flat_per_channel(-2.5), {}, 0, 53.7), 0.0); }

TEST(Nli, CubicInCentralChannelPower) {
    auto p = flat_per_channel(-2.5);
    const double base = nli_power_central(p, {}, 250, 53.7);
    p.power_dbm(44) += 10.0 * std::log10(2.0);
    EXPECT_NEAR(nli_power_central(p, {}, 250, 53.7) / base, 8.0, 1e-12);
}

TEST(Nli, OnlyTheCentralChannelMatters) {
    auto p = flat_per_channel(-2.5);
    const double base = nli_power_central(p, {}, 10, 62.7);
    p.power_dbm(0) += 5.0;
    p.power_dbm(88) -= 5.0;
    EXPECT_EQ(nli_power_central(p, {}, 10, 62.7), base);
}

TEST(Nli, ReferenceValueIsFrozen) {
    // -2.5 dBm/ch, 250 x 53.7 km, default constants; first evaluation frozen here
    const double frozen = 3.0722908467298467e-05;
    EXPECT_NEAR(nli_power_central(flat_per_channel(-2.5), {}, 250, 53.7) / frozen, 1.0, 1e-12);

    // the same closed form written out separately
    const double a_np = 0.1595 * std::log(10.0) / 20.0;
    const double leff = (1.0 - std::exp(-2.0 * a_np * 53.7)) / (2.0 * a_np);
    const double la = 1.0 / (2.0 * a_np);
    const double b2 = 21.7e-24;
    const double btot = 89 * 50e9;
    const double g = 1e-3 * std::pow(10.0, -0.25) / 50e9;
    const double gnli = 8.0 / 27.0 * 1.3 * 1.3 * g * g * g * leff * leff *
                        std::asinh(std::numbers::pi * std::numbers::pi / 2.0 * b2 * la * btot * btot) /
                        (std::numbers::pi * b2 * la);
    EXPECT_NEAR(250 * gnli * 50e9 / frozen, 1.0, 1e-12);
}

TEST(Snr, TenDbWhenAseIsATenthOfSignal) {
    link::ChannelState s;
    s.signal_w = ChannelArray::Constant(1e-3);
    s.ase_w = s.signal_w / 10.0;
    const auto snr = snr_per_channel(s, 0.0);
    EXPECT_LT((snr.db - 10.0).abs().maxCoeff(), 1e-12);
}

TEST(Snr, ZeroNoiseIsAnError) {
    link::ChannelState s;
    s.signal_w = ChannelArray::Constant(1e-3);
    EXPECT_THROW(snr_per_channel(s, 0.0), NumericError);
}

TEST(Snr, DoublingPatternsAndNliHalvesSnr) {
    link::LinkParams p;
    p.nf_db = 4.75;
    p.target_km = 10 * 62.7;
    const auto launch = link::LaunchProfile::flat(17.0);
    const auto d = link::design_link(2, p);
    auto d2 = d;
    d2.patterns *= 2;
    const auto a = link::propagate_full(launch, d, oracle(), p);
    const auto b = link::propagate_full(launch, d2, oracle(), p);
    const double nli = 1e-7;
    const auto sa = snr_per_channel(a.state, nli);
    const auto sb = snr_per_channel(b.state, 2.0 * nli);
    EXPECT_LT(((sa.linear / sb.linear) - 2.0).abs().maxCoeff() / 2.0, 0.01);
}

TEST(Snr, SparseFilteringMakesSnrWavelengthDependent) {
    link::LinkParams p;
    p.nf_db = 4.75;
    const auto r = evaluate_link(link::LaunchProfile::flat(17.0), link::design_link(4, p), oracle(), p, {});
    EXPECT_GT(peak_to_peak(r.snr_db), 0.0);
    EXPECT_TRUE(r.consistent());
}

TEST(Capacity, ZeroSnrGivesZero) { EXPECT_EQ(capacity_tbps(ChannelArray::Zero()), 0.0); }

TEST(Capacity, OneChannelAtUnitSnrIsOneHundredGbps) {
    ChannelArray s = ChannelArray::Zero();
    s(17) = 1.0;
    EXPECT_NEAR(capacity_tbps(s), 0.1, 1e-15);
}

TEST(Capacity, ConventionalFigureNeedsAboutTenPointTwoDb) {
    const double bits = 31.3e12 / (89 * 2 * 50e9);
    EXPECT_NEAR(bits, 3.517, 5e-4);
    const double snr = std::pow(2.0, bits) - 1.0;
    EXPECT_NEAR(10.0 * std::log10(snr), 10.2, 0.05);
    EXPECT_NEAR(capacity_tbps(ChannelArray::Constant(snr)), 31.3, 1e-9);
}

TEST(Capacity, StrictlyIncreasingInEachChannel) {
    ChannelArray s = ChannelArray::Constant(8.0);
    const double base = capacity_tbps(s);
    for (int i = 0; i < kChannels; i += 11) {
        ChannelArray t = s;
        t(i) *= 1.001;
        EXPECT_GT(capacity_tbps(t), base);
    }
}

TEST(Calibration, FixedPointReturnsKnownNf) {
    link::LinkParams p;
    const auto d = link::design_link(1, p);
    const auto launch = link::LaunchProfile::flat(17.0);
    auto cap = [&](double nf) {
        p.nf_db = nf;
        return evaluate_link(launch, d, oracle(), p, {}).capacity_tbps;
    };
    const double target = cap(5.0);
    const auto r = calibrate_noise_figure(cap, target);
    EXPECT_LE(std::abs(r.capacity_tbps - target), 0.05);
    EXPECT_NEAR(r.nf_db, 5.0, 0.1);
    EXPECT_LE(r.iterations, 30);
}

TEST(Calibration, TerminatesWithinThirtyIterationsOnASteepCurve) {
    // capacity falls by 100 Tb/s per dB, so the tolerance needs a fine bracket
    auto cap = [](double nf) { return 31.3 - 100.0 * (nf - 6.123456); };
    const auto r = calibrate_noise_figure(cap, 31.3);
    EXPECT_LE(r.iterations, 30);
    EXPECT_LE(std::abs(r.capacity_tbps - 31.3), 0.05);
}

TEST(Calibration, ClosesTheLoopOnConventionalLine) {
    link::LinkParams p;
    const auto r = calibrate_conventional(oracle(), p, {}, 31.3);
    EXPECT_GE(r.nf_db, 3.0);
    EXPECT_LE(r.nf_db, 10.0);
    p.nf_db = r.nf_db;
    const auto again = evaluate_link(link::LaunchProfile::flat(17.0), link::design_link(1, p), oracle(), p, {},
                                     link::PropagationMode::explicit_cascade);
    EXPECT_NEAR(again.capacity_tbps, 31.3, 0.05);
    EXPECT_NEAR(again.capacity_tbps, r.capacity_tbps, 1e-9);
}

TEST(Calibration, UnreachableTargetReportsBracket) {
    auto cap = [](double nf) { return 40.0 - nf; };
    try {
        calibrate_noise_figure(cap, 100.0);
        FAIL() << "expected CalibrationError";
    } catch (const CalibrationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("37.0"), std::string::npos) << msg;
        EXPECT_NE(msg.find("30.0"), std::string::npos) << msg;
    }
}

TEST(Report, JsonCarriesMetadataAndEveryChannel) {
    link::LinkParams p;
    const auto r = evaluate_link(link::LaunchProfile::flat(17.0), link::design_link(7, p), oracle(), p, {});
    const auto j = to_json(r);
    EXPECT_EQ(j.at("metadata").at("amplifiers"), 252);
    EXPECT_EQ(j.at("metadata").at("gffs"), 36);
    ASSERT_EQ(j.at("channels").size(), 89u);
    EXPECT_DOUBLE_EQ(j.at("channels")[44].at("snr_db").get<double>(), r.snr_db(44));
    EXPECT_TRUE(r.consistent());
}
