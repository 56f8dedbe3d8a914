#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "subsea/edfa/dataset.hpp"
#include "subsea/edfa/oracle.hpp"
#include "subsea/edfa/surrogate.hpp"
#include "subsea/optimizer/reinforce.hpp"

using namespace subsea;
using namespace subsea::optimizer;

namespace {

const edfa::GainOracle& oracle() {
    static const edfa::GainOracle o;
    return o;
}

link::LinkParams calibrated_params() {
    static const double nf = perf::calibrate_conventional(oracle(), {}, {}).nf_db;
    link::LinkParams p;
    p.nf_db = nf;
    return p;
}

// Scripted environments for the control-flow paths.
struct ConstantEnv {
    Evaluation evaluate(const link::LaunchProfile&) const { return {30.0, 10.0, true}; }
};

struct GainDriftEnv {  // mean gain follows the first channel's power
    Evaluation evaluate(const link::LaunchProfile& p) const {
        return {30.0 + p.power_dbm(0), 10.0 + 2.0 * (p.power_dbm(0) - p.power_dbm.mean()), true};
    }
};

struct InfeasibleAfterBoostEnv {
    Evaluation evaluate(const link::LaunchProfile& p) const {
        if (p.power_dbm(0) > p.power_dbm(88) + 0.1) return {};
        return {30.0, 10.0, true};
    }
};

double top_rel_change(const link::LaunchProfile& a, const link::LaunchProfile& b) {
    const double wa = a.power_w().sum(), wb = b.power_w().sum();
    return std::abs(wa - wb) / wb;
}

}  // namespace

TEST(Actions, BandsPartitionTheGrid) {
    int covered = 0;
    for (int b = 0; b < ActionSpace::kBands; ++b) {
        EXPECT_EQ(ActionSpace::band_start(b), covered);
        covered += ActionSpace::kBandSizes[static_cast<std::size_t>(b)];
    }
    EXPECT_EQ(covered, 89);
    EXPECT_EQ(ActionSpace::band_of(0), 0);
    EXPECT_EQ(ActionSpace::band_of(64), 4);
    EXPECT_EQ(ActionSpace::band_of(65), 5);
    EXPECT_EQ(ActionSpace::band_of(88), 6);
}

TEST(Actions, NoOpAndFullMaskLeaveSpectrumUnchanged) {
    const auto p = random_spectrum(7);
    EXPECT_TRUE((apply_action(p, 0).power_dbm == p.power_dbm).all());
    EXPECT_LT((apply_action(p, 127).power_dbm - p.power_dbm).abs().maxCoeff(), 1e-12);
}

TEST(Actions, SingleBandOnFlatSpectrum) {
    const auto p = link::LaunchProfile::flat(17.0);
    const auto q = apply_action(p, 1);
    // renormalization offset from the mW sums: 13 channels up 0.5 dB, 76 unchanged
    const double offset = 10.0 * std::log10((13.0 * std::pow(10.0, 0.05) + 76.0) / 89.0);
    for (int i = 0; i < 13; ++i) EXPECT_NEAR(q.power_dbm(i) - p.power_dbm(i), 0.5 - offset, 1e-12);
    for (int i = 13; i < 89; ++i) EXPECT_NEAR(q.power_dbm(i) - p.power_dbm(i), -offset, 1e-12);
    EXPECT_NEAR(q.power_dbm(0) - q.power_dbm(88), 0.5, 1e-12);
    EXPECT_LT(top_rel_change(q, p), 1e-12);
}

TEST(Actions, EveryActionConservesTopAndStaysInEnvelope) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto p = random_spectrum(s);
        for (int a = 0; a < ActionSpace::kActions; ++a) {
            const auto q = apply_action(p, a);
            ASSERT_TRUE(q.power_dbm.isFinite().all());
            ASSERT_LT(top_rel_change(q, p), 1e-12) << "seed " << s << " action " << a;
            // the amplifiers see the launch profile one nominal gain lower
            const double input_total = q.top_dbm() - operating_point::kNominalGainDb;
            ASSERT_GE(input_total, edfa::kMinTotalInputDbm);
            ASSERT_LE(input_total, edfa::kMaxTotalInputDbm);
        }
    }
}

TEST(Actions, OutOfRangeIsUsageError) {
    const auto p = random_spectrum(1);
    EXPECT_THROW(apply_action(p, -1), UsageError);
    EXPECT_THROW(apply_action(p, 128), UsageError);
}

TEST(RandomSpectrum, WithinBoundsAndReproducible) {
    double lo = 1e9, hi = -1e9;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const auto p = random_spectrum(s);
        const double top = p.top_dbm();
        ASSERT_GE(top, 16.0 - 1e-12);
        ASSERT_LE(top, 18.0 + 1e-12);
        ASSERT_LE(peak_to_peak(p.power_dbm), 6.0 + 1e-12);
        lo = std::min(lo, top);
        hi = std::max(hi, top);
    }
    EXPECT_LE(lo, 16.05);
    EXPECT_GE(hi, 17.95);
    EXPECT_TRUE((random_spectrum(42).power_dbm == random_spectrum(42).power_dbm).all());
}

TEST(Step, NoOpActionHasZeroReward) {
    const auto p = calibrated_params();
    const LinkEnvironment env(link::design_link(2, p), oracle(), p);
    const auto s = step(env, random_spectrum(3), 0, EpisodeConfig{});
    EXPECT_EQ(s.reward, 0.0);
    EXPECT_FALSE(s.done);
}

TEST(Step, EvaluationIsPure) {
    const auto p = calibrated_params();
    const LinkEnvironment env(link::design_link(3, p), oracle(), p);
    const auto start = random_spectrum(11);
    EXPECT_EQ(step(env, start, 37, {}).reward, step(env, start, 37, {}).reward);
}

TEST(Step, GainBreachEndsEpisode) {
    const GainDriftEnv env;
    auto p = link::LaunchProfile::flat(17.0);
    int steps = 0;
    StepResult s;
    do {
        s = step(env, p, 1, EpisodeConfig{});
        p = s.next;
        ++steps;
    } while (!s.done && steps < 100);
    EXPECT_TRUE(s.done);
    EXPECT_TRUE(s.evaluation.feasible);
    EXPECT_GT(std::abs(s.evaluation.mean_gain_db - 10.0), 0.5);
    EXPECT_LT(steps, 100);
}

TEST(Step, InfeasibleResultCostsPenaltyAndEnds) {
    const InfeasibleAfterBoostEnv env;
    const auto s = step(env, link::LaunchProfile::flat(17.0), 1, EpisodeConfig{});
    EXPECT_TRUE(s.done);
    EXPECT_FALSE(s.evaluation.feasible);
    EXPECT_EQ(s.reward, -1.0);
}

TEST(Step, BoostingWeakestBandBeatsBoostingStrongest) {
    const auto p = calibrated_params();
    const auto design = link::design_link(7, p);
    const LinkEnvironment env(design, oracle(), p);
    bool found = false;
    for (std::uint64_t s = 0; s < 10 && !found; ++s) {
        auto start = random_spectrum(s, {16.0, 18.0, 2.0});
        const auto r = perf::evaluate_link(start, design, oracle(), p, {});
        double worst = 1e9, best = -1e9;
        int weak = 0, strong = 0;
        for (int b = 0; b < ActionSpace::kBands; ++b) {
            const double m = r.snr_db.segment(ActionSpace::band_start(b),
                                              ActionSpace::kBandSizes[static_cast<std::size_t>(b)]).mean();
            if (m < worst) worst = m, weak = b;
            if (m > best) best = m, strong = b;
        }
        const double toward = step(env, start, 1 << weak, {}).reward;
        const double away = step(env, start, 1 << strong, {}).reward;
        found = toward > away;
    }
    EXPECT_TRUE(found);
}

TEST(Policy, FreshPolicyIsUniform) {
    const auto policy = Policy::create(5);
    const auto probs = policy.probabilities(random_spectrum(2));
    EXPECT_NEAR(probs.sum(), 1.0, 1e-12);
    EXPECT_LT((probs.array() - 1.0 / 128.0).abs().maxCoeff(), 1e-15);
}

TEST(Policy, SampledFrequenciesMatchUniformWithinThreeSigma) {
    const auto policy = Policy::create(5);
    const auto probs = policy.probabilities(random_spectrum(2));
    Rng rng(314);
    std::vector<int> counts(128, 0);
    const int n = 10'000;
    for (int k = 0; k < n; ++k) ++counts[static_cast<std::size_t>(sample_action(probs, rng))];
    const double mean = n / 128.0;
    const double sigma = std::sqrt(n * (1.0 / 128.0) * (127.0 / 128.0));
    for (int a = 0; a < 128; ++a) EXPECT_LE(std::abs(counts[static_cast<std::size_t>(a)] - mean), 3.0 * sigma) << a;
}

TEST(Policy, LogProbabilityOfSampleMatchesForwardPass) {
    auto policy = Policy::create(9);
    // move away from uniform so the check is not trivial
    Rng rng(1);
    auto params = nn::flatten_parameters(policy.net);
    for (Eigen::Index i = 0; i < params.size(); ++i) params(i) += rng.uniform(-0.05, 0.05);
    nn::assign_parameters(policy.net, params);
    const auto spectrum = random_spectrum(4);
    const auto probs = policy.probabilities(spectrum);
    const Eigen::VectorXd logits =
        policy.net.layers()[1].weights *
            (policy.net.layers()[0].weights * Policy::features(spectrum) + policy.net.layers()[0].biases).cwiseMax(0.0) +
        policy.net.layers()[1].biases;
    const double lse = std::log((logits.array() - logits.maxCoeff()).exp().sum()) + logits.maxCoeff();
    for (int a : {0, 17, 127}) EXPECT_NEAR(std::log(probs(a)), logits(a) - lse, 1e-12);
}

TEST(Policy, CheckpointRoundTrip) {
    const auto policy = Policy::create(12);
    const auto back = policy_from_json(nlohmann::json::parse(to_json(policy).dump()));
    EXPECT_EQ(nn::flatten_parameters(back.net), nn::flatten_parameters(policy.net));
    auto wrong = to_json(policy);
    wrong["kind"] = "edfa-surrogate";
    EXPECT_THROW(policy_from_json(wrong), UsageError);
}

TEST(Episode, DeterministicAndCapped) {
    const auto p = calibrated_params();
    const LinkEnvironment env(link::design_link(2, p), oracle(), p);
    const auto policy = Policy::create(3);
    const auto a = run_episode(policy, env, {}, 77);
    const auto b = run_episode(policy, env, {}, 77);
    ASSERT_EQ(a.steps.size(), b.steps.size());
    EXPECT_LE(a.steps.size(), 300u);
    for (std::size_t t = 0; t < a.steps.size(); ++t) {
        EXPECT_EQ(a.steps[t].action, b.steps[t].action);
        EXPECT_EQ(a.steps[t].reward, b.steps[t].reward);
    }
    double best = a.initial_capacity_tbps;
    for (const auto& s : a.steps) best = std::max(best, s.capacity_tbps);
    EXPECT_EQ(a.best_capacity_tbps, best);
}

TEST(Train, ZeroRewardLeavesParametersUnchanged) {
    EpisodeConfig cfg;
    cfg.episodes = 5;
    cfg.max_steps = 20;
    cfg.seed = 8;
    const auto before = nn::flatten_parameters(Policy::create(derive_seed(cfg.seed, "policy-init")).net);
    const auto r = train(ConstantEnv{}, cfg);
    EXPECT_EQ(nn::flatten_parameters(r.policy.net), before);
}

TEST(Train, RewardsToGoSumTail) {
    EpisodeTrace t;
    for (double r : {1.0, -2.0, 0.5}) t.steps.push_back({{}, 1, r, 0.0});
    EXPECT_EQ(rewards_to_go(t, 1.0), (std::vector<double>{-0.5, -1.5, 0.5}));
}

// The RL environment as used in practice: trained surrogate, noise figure calibrated on it.
class TrainedOnTwoAmplifierLink : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        edfa::SurrogateTrainConfig sc;
        sc.seed = 31;
        sc.epochs = 100;
        model_ = new edfa::SurrogateModel(edfa::train_surrogate(edfa::generate_dataset(6516, 30), sc).model);
        params_.nf_db = perf::calibrate_conventional(*model_, params_, {}).nf_db;
        design_ = link::design_link(2, params_);
        const LinkEnvironment env(design_, *model_, params_);
        EpisodeConfig cfg;
        cfg.seed = 2024;
        result_ = new TrainingResult(train(env, cfg));
        repeat_ = new TrainingResult(train(env, cfg));
    }
    static void TearDownTestSuite() {
        delete result_;
        delete repeat_;
        delete model_;
    }
    static edfa::SurrogateModel* model_;
    static link::LinkParams params_;
    static link::LinkDesign design_;
    static TrainingResult* result_;
    static TrainingResult* repeat_;
};
edfa::SurrogateModel* TrainedOnTwoAmplifierLink::model_ = nullptr;
link::LinkParams TrainedOnTwoAmplifierLink::params_;
link::LinkDesign TrainedOnTwoAmplifierLink::design_;
TrainingResult* TrainedOnTwoAmplifierLink::result_ = nullptr;
TrainingResult* TrainedOnTwoAmplifierLink::repeat_ = nullptr;

TEST_F(TrainedOnTwoAmplifierLink, LearningCurveImproves) {
    const auto& c = result_->curve;
    ASSERT_EQ(c.size(), 100u);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 10; ++i) {
        first += c[static_cast<std::size_t>(i)].episode_return;
        last += c[c.size() - 1 - static_cast<std::size_t>(i)].episode_return;
    }
    EXPECT_GE(last / 10.0, first / 10.0);
}

TEST_F(TrainedOnTwoAmplifierLink, BestSoFarIsMonotone) {
    const auto& c = result_->curve;
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GE(c[i].best_capacity_tbps, c[i - 1].best_capacity_tbps);
    EXPECT_EQ(c.back().best_capacity_tbps, result_->best_capacity_tbps);
}

TEST_F(TrainedOnTwoAmplifierLink, RunIsDeterministic) {
    EXPECT_EQ(result_->best_capacity_tbps, repeat_->best_capacity_tbps);
    EXPECT_EQ(nn::flatten_parameters(result_->policy.net), nn::flatten_parameters(repeat_->policy.net));
    EXPECT_TRUE((result_->best_spectrum.power_dbm == repeat_->best_spectrum.power_dbm).all());
}

TEST_F(TrainedOnTwoAmplifierLink, OptimizedBeatsFlatLaunch) {
    const auto best = evaluate_optimized(result_->best_spectrum, design_, *model_, params_);
    const auto flat = evaluate_optimized(link::LaunchProfile::flat(17.0), design_, *model_, params_);
    EXPECT_GT(best.capacity_tbps, flat.capacity_tbps);
    EXPECT_GT(best.launch_excursion_db(), 0.0);
}

TEST_F(TrainedOnTwoAmplifierLink, ExplicitAndExtrapolatedAgree) {
    const auto ex = evaluate_optimized(result_->best_spectrum, design_, *model_, params_);
    const auto ap = perf::evaluate_link(result_->best_spectrum, design_, *model_, params_, {},
                                        link::PropagationMode::extrapolated);
    EXPECT_NEAR(ex.capacity_tbps, ap.capacity_tbps, 0.01);
    EXPECT_NEAR(ap.capacity_tbps, result_->best_capacity_tbps, 1e-9);
}

TEST(EvaluateOptimized, FlatConventionalReproducesCalibration) {
    const auto p = calibrated_params();
    const auto r = evaluate_optimized(link::LaunchProfile::flat(17.0), link::design_link(1, p), oracle(), p);
    EXPECT_NEAR(r.capacity_tbps, 31.3, 0.05);
}

TEST(RandomSearch, UsesExactlyTheBudget) {
    const auto p = calibrated_params();
    const LinkEnvironment env(link::design_link(2, p), oracle(), p);
    EpisodeConfig cfg;
    cfg.seed = 5;
    const auto r = random_search(env, cfg, 1000);
    EXPECT_EQ(r.steps, 1000);
    EXPECT_GE(r.episodes, 4);
    EXPECT_TRUE(std::isfinite(r.best_capacity_tbps));
}
