// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#include "dropref/reward_trainer.hpp"

#include "dropref/digest.hpp"

#include <cassert>
#include <chrono>
#include <cmath>
#include <limits>

namespace dropref {

double RewardTrainConfig::resolved_eta() const {
    if (eta > 0.0) return eta;
    // step for projected SGD with gradient bound 2 and domain radius F
    return radius_F / (2.0 * std::sqrt(static_cast<double>(iterations)));
}

void RewardTrainConfig::validate() const {
    if (iterations < 1) throw ConfigError("reward trainer: iterations must be >= 1");
    if (minibatch < 1) throw ConfigError("reward trainer: minibatch must be >= 1");
    if (radius_F <= 0.0) throw ConfigError("reward trainer: F must be > 0");
    if (rho < 0.0) throw ConfigError("reward trainer: rho must be >= 0");
    if (q_floor < 0.0 || q_floor >= 1.0)
        throw ConfigError("reward trainer: q_floor must lie in [0,1)");
}

std::string RewardTrainConfig::digest() const {
    Digest d;
    d.str("reward-train-config");
    d.i64(iterations).i64(minibatch).f64(eta).f64(rho);
    d.i64(static_cast<std::int64_t>(divergence));
    d.f64(radius_F).u64(seed).f64(q_floor);
    d.i64(static_cast<std::int64_t>(output));
    return d.hex();
}

std::vector<int> sample_minibatch(Rng& rng, std::size_t dataset_size, int n) {
    std::vector<int> batch(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        batch[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(dataset_size));
    return batch;
}

RewardStep reward_step(const RewardParams& params, const FeatureEnv& env,
                       const PreferenceDataset& dataset, const std::vector<int>& batch,
                       const DivergenceSpec& spec, double q_floor) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    VecX losses(n);
    for (Eigen::Index i = 0; i < n; ++i)
        losses[i] = reward_loss(params, env, dataset.examples[static_cast<std::size_t>(batch[i])]);

    RewardStep step;
    step.weights = solve_weights(losses, spec, Sense::Max, q_floor);
    step.uniform_loss = losses.mean();
    step.grad = VecX::Zero(env.d_reward);
    for (Eigen::Index i = 0; i < n; ++i)
        step.grad += step.weights.weights[i] *
                     reward_loss_grad(params, env, dataset.examples[static_cast<std::size_t>(batch[i])]);
    return step;
}

std::pair<RewardParams, TrainReport> train_robust_reward(const RewardTrainConfig& cfg,
                                                         const FeatureEnv& env,
                                                         const PreferenceDataset& dataset) {
    cfg.validate();
    env.validate();
    if (dataset.examples.empty()) throw ConfigError("reward trainer: empty dataset");
    require_matching_digest(env, dataset);

    const double eta = cfg.resolved_eta();
    const DivergenceSpec spec{cfg.divergence, cfg.rho};
    Rng batch_rng(derive_seed(cfg.seed, RngPhase::MinibatchSampling));

    RewardParams params{VecX::Zero(env.d_reward), cfg.radius_F};
    VecX iterate_sum = VecX::Zero(env.d_reward);
    VecX best = params.omega;
    double best_loss = std::numeric_limits<double>::infinity();

    TrainReport report;
    report.config_digest = cfg.digest();
    report.build_id = build_id();
    report.rows.reserve(static_cast<std::size_t>(cfg.iterations));

    for (int t = 1; t <= cfg.iterations; ++t) {
        const auto started = std::chrono::steady_clock::now();
        assert(params.omega.norm() <= cfg.radius_F + 1e-12);

        iterate_sum += params.omega;
        const std::vector<int> batch = sample_minibatch(batch_rng, dataset.examples.size(), cfg.minibatch);
        const RewardStep step = reward_step(params, env, dataset, batch, spec, cfg.q_floor);

        if (step.weights.objective < best_loss) {
            best_loss = step.weights.objective;
            best = params.omega;
        }

        params.omega = project_to_ball(params.omega - eta * step.grad, cfg.radius_F);

        TrainRow row;
        row.iter = t;
        row.robust_minibatch_loss = step.weights.objective;
        row.uniform_minibatch_loss = step.uniform_loss;
        row.grad_norm = step.grad.norm();
        row.mass_moved = step.weights.mass_moved;
        row.potential = std::numeric_limits<double>::quiet_NaN();
        row.min_eig_above_cutoff = std::numeric_limits<double>::quiet_NaN();
        row.compat_loss = std::numeric_limits<double>::quiet_NaN();
        row.wallclock_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                .count();
        report.rows.push_back(row);
    }

    switch (cfg.output) {
    case OutputMode::Average:
        params.omega = iterate_sum / static_cast<double>(cfg.iterations);
        break;
    case OutputMode::Last:
        break;
    case OutputMode::BestRobustMinibatchLoss:
        params.omega = best;
        break;
    }
    // the average of ball iterates stays in the ball; guard regardless
    params.omega = project_to_ball(std::move(params.omega), cfg.radius_F);
    return {std::move(params), std::move(report)};
}

} // namespace dropref
