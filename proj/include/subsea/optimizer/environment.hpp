#pragma once

#include <cmath>
#include <concepts>
#include <limits>

#include "subsea/core/errors.hpp"
#include "subsea/edfa/oracle.hpp"
#include "subsea/link/link.hpp"
#include "subsea/optimizer/actions.hpp"
#include "subsea/perf/perf.hpp"

namespace subsea::optimizer {

struct EpisodeConfig {
    int episodes = 100;
    int max_steps = 300;
    double discount = 1.0;
    double top_min_dbm = operating_point::kTopMinDbm;
    double top_max_dbm = operating_point::kTopMaxDbm;
    double gain_target_db = operating_point::kNominalGainDb;
    double gain_tolerance_db = 0.5;
    double learning_rate = 3e-4;
    double infeasible_penalty_tbps = 1.0;
    std::uint64_t seed = 0;

    SpectrumBounds spectrum_bounds() const { return {top_min_dbm, top_max_dbm, 6.0}; }
};

struct Evaluation {
    double capacity_tbps = 0.0;
    double mean_gain_db = std::numeric_limits<double>::quiet_NaN();
    bool feasible = false;
};

/// Scores a launch profile. Implementations must be pure: equal inputs, equal outputs.
template <class E>
concept Environment = requires(const E& env, const link::LaunchProfile& p) {
    { env.evaluate(p) } -> std::same_as<Evaluation>;
};

/// Capacity of the full line (extrapolated propagation) for a launch profile.
template <edfa::GainModel M>
class LinkEnvironment {
public:
    LinkEnvironment(link::LinkDesign design, const M& model, link::LinkParams params, perf::NliParams nli = {})
        : design_(design), model_(&model), params_(params), nli_(nli) {}

    Evaluation evaluate(const link::LaunchProfile& p) const {
        try {
            const auto r = perf::evaluate_link(p, design_, *model_, params_, nli_, link::PropagationMode::extrapolated);
            return {r.capacity_tbps, r.mean_gain_db, true};
        } catch (const InfeasibleError&) {
            return {};
        }
    }

    const link::LinkDesign& design() const { return design_; }
    const link::LinkParams& params() const { return params_; }
    const perf::NliParams& nli() const { return nli_; }
    const M& model() const { return *model_; }

private:
    link::LinkDesign design_;
    const M* model_;
    link::LinkParams params_;
    perf::NliParams nli_;
};

struct StepResult {
    link::LaunchProfile next;
    Evaluation evaluation;
    double reward = 0.0;
    bool done = false;
};

inline bool gain_within_bounds(const Evaluation& e, const EpisodeConfig& cfg) {
    return std::abs(e.mean_gain_db - cfg.gain_target_db) <= cfg.gain_tolerance_db;
}

/// Applies `action` to `p` whose evaluation is already known. Reward is the capacity
/// change in Tb/s; an infeasible result costs a fixed penalty and ends the episode, as
/// does leaving the mean-gain band. The step-count cap is the caller's.
template <Environment E>
StepResult step(const E& env, const link::LaunchProfile& p, const Evaluation& current, int action,
                const EpisodeConfig& cfg) {
    StepResult s;
    s.next = apply_action(p, action);
    s.evaluation = (action == 0) ? current : env.evaluate(s.next);
    if (!s.evaluation.feasible) {
        s.reward = -cfg.infeasible_penalty_tbps;
        s.done = true;
        return s;
    }
    s.reward = s.evaluation.capacity_tbps - current.capacity_tbps;
    s.done = !gain_within_bounds(s.evaluation, cfg);
    return s;
}

template <Environment E>
StepResult step(const E& env, const link::LaunchProfile& p, int action, const EpisodeConfig& cfg) {
    return step(env, p, env.evaluate(p), action, cfg);
}

}  // namespace subsea::optimizer
