// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#include "dropref/dpo_trainer.hpp"

#include "dropref/digest.hpp"

#include <cassert>
#include <chrono>
#include <cmath>
#include <limits>

namespace dropref {

double DpoTrainConfig::resolved_eta() const {
    if (eta > 0.0) return eta;
    return 2.0 / std::sqrt(static_cast<double>(iterations));
}

void DpoTrainConfig::validate() const {
    if (iterations < 1) throw ConfigError("dpo trainer: iterations must be >= 1");
    if (minibatch < 1) throw ConfigError("dpo trainer: minibatch must be >= 1");
    if (beta <= 0.0) throw ConfigError("dpo trainer: beta must be > 0");
    if (radius_B <= 0.0) throw ConfigError("dpo trainer: B must be > 0");
    if (rho < 0.0) throw ConfigError("dpo trainer: rho must be >= 0");
    if (q_floor < 0.0 || q_floor >= 1.0) throw ConfigError("dpo trainer: q_floor must lie in [0,1)");
}

std::string DpoTrainConfig::digest() const {
    Digest d;
    d.str("dpo-train-config");
    d.i64(iterations).i64(minibatch).f64(eta).f64(rho);
    d.i64(static_cast<std::int64_t>(divergence));
    d.f64(beta).f64(radius_B).u64(seed).f64(q_floor);
    d.i64(static_cast<std::int64_t>(output));
    return d.hex();
}

DpoStep dpo_step(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                 const PreferenceDataset& dataset, const std::vector<int>& batch,
                 const DivergenceSpec& spec, double q_floor) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    VecX losses(n);
    for (Eigen::Index i = 0; i < n; ++i)
        losses[i] = dpo_loss(params, env, kl, dataset.examples[static_cast<std::size_t>(batch[i])]);

    DpoStep step;
    step.weights = solve_weights(losses, spec, Sense::Max, q_floor);
    step.uniform_loss = losses.mean();
    step.grad = VecX::Zero(env.d_policy);
    for (Eigen::Index i = 0; i < n; ++i)
        step.grad += step.weights.weights[i] *
                     dpo_loss_grad(params, env, kl, dataset.examples[static_cast<std::size_t>(batch[i])]);
    return step;
}

std::pair<PolicyParams, TrainReport> train_robust_dpo(const DpoTrainConfig& cfg,
                                                      const FeatureEnv& env,
                                                      const PreferenceDataset& dataset) {
    cfg.validate();
    env.validate();
    if (dataset.examples.empty()) throw ConfigError("dpo trainer: empty dataset");
    require_matching_digest(env, dataset);

    const double eta = cfg.resolved_eta();
    const DivergenceSpec spec{cfg.divergence, cfg.rho};
    const KLConfig kl{cfg.beta};
    Rng batch_rng(derive_seed(cfg.seed, RngPhase::MinibatchSampling));

    PolicyParams params{VecX::Zero(env.d_policy), cfg.radius_B};
    VecX iterate_sum = VecX::Zero(env.d_policy);
    VecX best = params.theta;
    double best_loss = std::numeric_limits<double>::infinity();

    TrainReport report;
    report.config_digest = cfg.digest();
    report.build_id = build_id();
    report.rows.reserve(static_cast<std::size_t>(cfg.iterations));

    for (int t = 1; t <= cfg.iterations; ++t) {
        const auto started = std::chrono::steady_clock::now();
        assert(params.theta.norm() <= cfg.radius_B + 1e-12);

        iterate_sum += params.theta;
        const std::vector<int> batch = sample_minibatch(batch_rng, dataset.examples.size(), cfg.minibatch);
        const DpoStep step = dpo_step(params, env, kl, dataset, batch, spec, cfg.q_floor);

        if (step.weights.objective < best_loss) {
            best_loss = step.weights.objective;
            best = params.theta;
        }

        params.theta = project_to_ball(params.theta - eta * step.grad, cfg.radius_B);

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
        params.theta = iterate_sum / static_cast<double>(cfg.iterations);
        break;
    case OutputMode::Last:
        break;
    case OutputMode::BestRobustMinibatchLoss:
        params.theta = best;
        break;
    }
    params.theta = project_to_ball(std::move(params.theta), cfg.radius_B);
    return {std::move(params), std::move(report)};
}

} // namespace dropref
