#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "subsea/core/errors.hpp"
#include "subsea/core/random.hpp"
#include "subsea/nn/adam.hpp"
#include "subsea/nn/checkpoint.hpp"
#include "subsea/nn/dense_network.hpp"
#include "subsea/optimizer/actions.hpp"
#include "subsea/optimizer/environment.hpp"

namespace subsea::optimizer {

inline constexpr int kPolicyHidden = 128;

/// Softmax policy over the 128 pre-emphasis actions, 89-128-128.
struct Policy {
    nn::DenseNetwork net;
    nn::AdamState adam;

    static Policy create(std::uint64_t seed, double learning_rate = 3e-4) {
        Rng rng(seed);
        const int dims[] = {kChannels, kPolicyHidden, ActionSpace::kActions};
        Policy p;
        p.net = nn::DenseNetwork::initialized(dims, nn::Activation::relu, nn::Activation::softmax, rng);
        // zero output weights: the untrained policy is exactly uniform over actions
        p.net.layers().back().weights.setZero();
        p.adam = nn::AdamState::for_network(p.net, {learning_rate, 0.9, 0.999, 1e-8});
        return p;
    }

    /// Launch spectrum in dBm with its mean removed.
    static Eigen::VectorXd features(const link::LaunchProfile& p) {
        return (p.power_dbm - p.power_dbm.mean()).matrix();
    }

    Eigen::VectorXd probabilities(const link::LaunchProfile& p) const { return net.forward(features(p)); }
};

/// Inverse-CDF draw from a probability vector.
inline int sample_action(const Eigen::VectorXd& probs, Rng& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (Eigen::Index a = 0; a < probs.size(); ++a) {
        cum += probs(a);
        if (u < cum) return static_cast<int>(a);
    }
    return static_cast<int>(probs.size() - 1);
}

enum class EpisodeEnd { step_limit, gain_constraint, infeasible };

struct TraceStep {
    link::LaunchProfile spectrum;  // state the action was taken in
    int action = 0;
    double reward = 0.0;
    double capacity_tbps = 0.0;    // capacity after the action
};

struct EpisodeTrace {
    std::vector<TraceStep> steps;
    double initial_capacity_tbps = 0.0;
    double episode_return = 0.0;
    /// Best over every feasible spectrum visited, including the starting one.
    double best_capacity_tbps = -std::numeric_limits<double>::infinity();
    link::LaunchProfile best_spectrum;
    EpisodeEnd end = EpisodeEnd::step_limit;
};

namespace detail {

template <Environment E, class ChooseAction>
EpisodeTrace rollout(const E& env, const EpisodeConfig& cfg, const link::LaunchProfile& start, ChooseAction&& choose,
                     int step_budget) {
    EpisodeTrace trace;
    link::LaunchProfile p = start;
    Evaluation current = env.evaluate(p);
    trace.initial_capacity_tbps = current.capacity_tbps;
    if (!current.feasible) {
        trace.end = EpisodeEnd::infeasible;
        return trace;
    }
    trace.best_capacity_tbps = current.capacity_tbps;
    trace.best_spectrum = p;
    const int limit = std::min(cfg.max_steps, step_budget);
    for (int t = 0; t < limit; ++t) {
        const int action = choose(p);
        StepResult s = step(env, p, current, action, cfg);
        trace.steps.push_back({p, action, s.reward, s.evaluation.capacity_tbps});
        trace.episode_return += s.reward;
        if (s.evaluation.feasible && s.evaluation.capacity_tbps > trace.best_capacity_tbps) {
            trace.best_capacity_tbps = s.evaluation.capacity_tbps;
            trace.best_spectrum = s.next;
        }
        if (s.done) {
            trace.end = s.evaluation.feasible ? EpisodeEnd::gain_constraint : EpisodeEnd::infeasible;
            return trace;
        }
        p = std::move(s.next);
        current = s.evaluation;
    }
    trace.end = EpisodeEnd::step_limit;
    return trace;
}

}  // namespace detail

inline std::uint64_t episode_start_seed(std::uint64_t run_seed, int episode) {
    return derive_seed(derive_seed(run_seed, static_cast<std::uint64_t>(episode)), "start");
}

/// One episode from a random starting spectrum, actions sampled from the policy.
template <Environment E>
EpisodeTrace run_episode(const Policy& policy, const E& env, const EpisodeConfig& cfg, std::uint64_t seed,
                         std::optional<link::LaunchProfile> start = std::nullopt) {
    Rng rng(derive_seed(seed, "actions"));
    const auto initial = start ? *start : random_spectrum(derive_seed(seed, "start"), cfg.spectrum_bounds());
    return detail::rollout(
        env, cfg, initial, [&](const link::LaunchProfile& p) { return sample_action(policy.probabilities(p), rng); },
        cfg.max_steps);
}

struct CurvePoint {
    int episode = 0;
    double episode_return = 0.0;
    double best_capacity_tbps = 0.0;
};

struct TrainingResult {
    Policy policy;
    link::LaunchProfile best_spectrum;
    double best_capacity_tbps = -std::numeric_limits<double>::infinity();
    std::vector<CurvePoint> curve;
    long evaluations = 0;
};

/// Reward-to-go G_t = sum_k discount^(k-t) r_k.
inline std::vector<double> rewards_to_go(const EpisodeTrace& trace, double discount) {
    std::vector<double> g(trace.steps.size());
    double acc = 0.0;
    for (std::size_t t = trace.steps.size(); t-- > 0;) {
        acc = trace.steps[t].reward + discount * acc;
        g[t] = acc;
    }
    return g;
}

/// Descent gradient of -sum_t (G_t - baseline) log pi(a_t | s_t).
inline nn::Gradients policy_gradient(const Policy& policy, const EpisodeTrace& trace, double baseline,
                                     double discount) {
    if (trace.steps.empty()) return nn::zero_gradients(policy.net);
    const auto returns = rewards_to_go(trace, discount);
    const auto n = static_cast<Eigen::Index>(trace.steps.size());
    Eigen::MatrixXd inputs(kChannels, n);
    for (Eigen::Index t = 0; t < n; ++t) inputs.col(t) = Policy::features(trace.steps[static_cast<std::size_t>(t)].spectrum);
    const Eigen::MatrixXd probs = policy.net.forward_batch(inputs);
    // d(-A log pi_a)/d pi = -A / pi_a on entry a
    Eigen::MatrixXd loss_grads = Eigen::MatrixXd::Zero(ActionSpace::kActions, n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const auto& s = trace.steps[static_cast<std::size_t>(t)];
        const double advantage = returns[static_cast<std::size_t>(t)] - baseline;
        loss_grads(s.action, t) = -advantage / probs(s.action, t);
    }
    return nn::backward_batch(policy.net, inputs, loss_grads);
}

/// REINFORCE with a running-mean-of-returns baseline and one Adam update per episode.
/// Returns the best spectrum visited over the whole run.
template <Environment E>
TrainingResult train(const E& env, const EpisodeConfig& cfg) {
    TrainingResult result;
    result.policy = Policy::create(derive_seed(cfg.seed, "policy-init"), cfg.learning_rate);
    double baseline = 0.0;
    for (int e = 0; e < cfg.episodes; ++e) {
        const std::uint64_t episode_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(e));
        const EpisodeTrace trace = run_episode(result.policy, env, cfg, episode_seed);
        result.evaluations += 1 + static_cast<long>(trace.steps.size());

        const auto grads = policy_gradient(result.policy, trace, baseline, cfg.discount);
        nn::adam_step(result.policy.net, grads, result.policy.adam);
        baseline += (trace.episode_return - baseline) / static_cast<double>(e + 1);

        if (trace.best_capacity_tbps > result.best_capacity_tbps) {
            result.best_capacity_tbps = trace.best_capacity_tbps;
            result.best_spectrum = trace.best_spectrum;
        }
        result.curve.push_back({e, trace.episode_return, result.best_capacity_tbps});
    }
    return result;
}

struct SearchResult {
    link::LaunchProfile best_spectrum;
    double best_capacity_tbps = -std::numeric_limits<double>::infinity();
    long steps = 0;
    int episodes = 0;
};

/// Uniform-random actions from the same kind of random starts, run until `step_budget`
/// actions have been evaluated. Baseline for judging the trained policy.
template <Environment E>
SearchResult random_search(const E& env, const EpisodeConfig& cfg, long step_budget) {
    SearchResult result;
    Rng rng(derive_seed(cfg.seed, "random-search"));
    int e = 0;
    while (result.steps < step_budget) {
        const std::uint64_t episode_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(e));
        const auto start = random_spectrum(derive_seed(episode_seed, "start"), cfg.spectrum_bounds());
        const auto trace = detail::rollout(
            env, cfg, start, [&](const link::LaunchProfile&) { return static_cast<int>(rng.index(ActionSpace::kActions)); },
            static_cast<int>(std::min<long>(cfg.max_steps, step_budget - result.steps)));
        // an infeasible start consumes one evaluation
        result.steps += std::max<long>(1, static_cast<long>(trace.steps.size()));
        ++e;
        if (trace.best_capacity_tbps > result.best_capacity_tbps) {
            result.best_capacity_tbps = trace.best_capacity_tbps;
            result.best_spectrum = trace.best_spectrum;
        }
    }
    result.episodes = e;
    return result;
}

/// Full explicit-cascade evaluation of an optimized spectrum.
template <edfa::GainModel M>
perf::SnrReport evaluate_optimized(const link::LaunchProfile& best, const link::LinkDesign& design, const M& model,
                                   const link::LinkParams& params, const perf::NliParams& nli = {}) {
    return perf::evaluate_link(best, design, model, params, nli, link::PropagationMode::explicit_cascade);
}

inline nlohmann::json to_json(const Policy& policy) {
    auto j = nn::to_json(policy.net);
    j["kind"] = "policy";
    j["adam_step"] = policy.adam.step;
    return j;
}

inline Policy policy_from_json(const nlohmann::json& j, double learning_rate = 3e-4) {
    if (j.value("kind", std::string{}) != "policy") throw UsageError("checkpoint is not a policy");
    Policy p;
    p.net = nn::network_from_json(j);
    if (p.net.input_size() != kChannels || p.net.output_size() != ActionSpace::kActions)
        throw ShapeError("policy checkpoint must map 89 inputs to 128 actions");
    p.adam = nn::AdamState::for_network(p.net, {learning_rate, 0.9, 0.999, 1e-8});
    return p;
}

}  // namespace subsea::optimizer
