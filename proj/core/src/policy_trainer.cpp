// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#include "dropref/policy_trainer.hpp"

#include "dropref/digest.hpp"
#include "dropref/reward_trainer.hpp"

#include <Eigen/Eigenvalues>

#include <cassert>
#include <chrono>
#include <cmath>
#include <sstream>

namespace dropref {

double PolicyTrainConfig::resolved_shift(const RewardParams& reward) const {
    return std::isnan(reward_shift) ? reward.radius_F : reward_shift;
}

void PolicyTrainConfig::validate() const {
    if (iterations < 1) throw ConfigError("policy trainer: iterations must be >= 1");
    if (minibatch < 1) throw ConfigError("policy trainer: minibatch must be >= 1");
    if (beta <= 0.0) throw ConfigError("policy trainer: beta must be > 0");
    if (radius_B <= 0.0) throw ConfigError("policy trainer: B must be > 0");
    if (rho < 0.0) throw ConfigError("policy trainer: rho must be >= 0");
    if (q_floor < 0.0 || q_floor >= 1.0)
        throw ConfigError("policy trainer: q_floor must lie in [0,1)");
    if (pinv_rel_tol <= 0.0) throw ConfigError("policy trainer: pinv_rel_tol must be > 0");
    if (warmup_batches < 1) throw ConfigError("policy trainer: warmup_batches must be >= 1");
}

std::string PolicyTrainConfig::digest() const {
    Digest d;
    d.str("policy-train-config");
    d.i64(iterations).i64(minibatch).f64(eta).f64(rho);
    d.i64(static_cast<std::int64_t>(divergence));
    d.f64(beta).f64(radius_B).u64(seed);
    d.i64(static_cast<std::int64_t>(mode));
    d.f64(q_floor).f64(pinv_rel_tol).f64(reward_shift).i64(warmup_batches);
    return d.hex();
}

std::map<std::string, double> PolicyDiagnostics::as_map() const {
    return {
        {"resolved_eta", resolved_eta},
        {"reward_shift_used", reward_shift_used},
        {"q_min", q_min},
        {"q_min_positive", q_min_positive},
        {"sigma_min", sigma_min},
        {"eps_apx_min", eps_apx_min},
        {"concentrability_max", concentrability_max},
    };
}

namespace {

/// Smallest positive weight in a solution, or +inf when none exists.
double min_positive_weight(const VecX& q) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < q.size(); ++i)
        if (q[i] > 0.0 && q[i] < best) best = q[i];
    return best;
}

std::vector<int> batch_prompts(const PreferenceDataset& dataset, const std::vector<int>& batch) {
    std::vector<int> prompts(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
        prompts[i] = dataset.examples[static_cast<std::size_t>(batch[i])].prompt;
    return prompts;
}

} // namespace

PolicyStep policy_step_with_values(const PolicyParams& params, const FeatureEnv& env,
                                   const std::vector<int>& prompts, const VecX& values,
                                   const RewardParams& reward, const KLConfig& kl,
                                   const DivergenceSpec& spec, double q_floor,
                                   double pinv_rel_tol, double reward_shift) {
    PolicyStep step;
    step.weights = solve_weights(values, spec, Sense::Min, q_floor);

    step.grad = VecX::Zero(env.d_policy);
    for (std::size_t i = 0; i < prompts.size(); ++i)
        step.grad += step.weights.weights[static_cast<Eigen::Index>(i)] *
                     kl_value_grad(params, env, kl, reward, prompts[i], reward_shift);

    step.fisher = weighted_fisher(params, env, prompts, step.weights.weights);

    Eigen::SelfAdjointEigenSolver<MatX> eigen(step.fisher);
    if (eigen.info() != Eigen::Success)
        throw NumericalError("policy step: Fisher eigendecomposition failed");
    const double lambda_max = eigen.eigenvalues().maxCoeff();
    if (lambda_max <= 0.0) {
        step.degenerate = step.grad.norm() > 0.0;
        step.direction = VecX::Zero(env.d_policy);
        step.min_eig_above_cutoff = 0.0;
    } else {
        const double cutoff = pinv_rel_tol * lambda_max;
        double min_above = lambda_max;
        for (Eigen::Index i = 0; i < eigen.eigenvalues().size(); ++i) {
            const double ev = eigen.eigenvalues()[i];
            if (ev > cutoff && ev < min_above) min_above = ev;
        }
        step.min_eig_above_cutoff = min_above;
        step.direction = pinv_psd(step.fisher, pinv_rel_tol) * step.grad;
    }

    step.compat = compatible_loss(step.direction, params, env, prompts, step.weights.weights, kl,
                                  reward, reward_shift);
    return step;
}

PolicyStep policy_step_exact(const PolicyParams& params, const FeatureEnv& env,
                             const std::vector<int>& prompts, const RewardParams& reward,
                             const KLConfig& kl, const DivergenceSpec& spec, double q_floor,
                             double pinv_rel_tol, double reward_shift) {
    VecX values(static_cast<Eigen::Index>(prompts.size()));
    for (std::size_t i = 0; i < prompts.size(); ++i)
        values[static_cast<Eigen::Index>(i)] =
            kl_value(params, env, kl, reward, prompts[i], reward_shift);
    return policy_step_with_values(params, env, prompts, values, reward, kl, spec, q_floor,
                                   pinv_rel_tol, reward_shift);
}

double potential(const PolicyParams& params, const PolicyParams& opt, const FeatureEnv& env) {
    double phi = 0.0;
    for (int x = 0; x < env.num_prompts; ++x) {
        const VecX log_opt = log_policy_row(opt, env, x);
        const VecX log_cur = log_policy_row(params, env, x);
        double kl = 0.0;
        for (int y = 0; y < env.num_completions; ++y)
            kl += std::exp(log_opt[y]) * (log_opt[y] - log_cur[y]);
        phi += env.source_dist[x] * kl;
    }
    return phi;
}

PolicyTrainResult train_robust_policy(const PolicyTrainConfig& cfg, const FeatureEnv& env,
                                      const PreferenceDataset& dataset,
                                      const RewardParams& reward,
                                      const PolicyParams* oracle_optimum) {
    cfg.validate();
    env.validate();
    reward.validate();
    if (dataset.examples.empty()) throw ConfigError("policy trainer: empty dataset");
    require_matching_digest(env, dataset);

    const KLConfig kl{cfg.beta};
    const DivergenceSpec spec{cfg.divergence, cfg.rho};
    const double shift = cfg.resolved_shift(reward);

    PolicyParams params{VecX::Zero(env.d_policy), cfg.radius_B};

    // Auto step size: probe the smallest positive worst-case weight at
    // the initial policy, then eta = min{1/(2 beta q_min_hat), 0.1}.
    // The probe uses its own stream so it leaves the training
    // trajectory untouched.
    double eta = cfg.eta;
    double q_min_hat = std::numeric_limits<double>::infinity();
    if (eta <= 0.0) {
        Rng warmup_rng(derive_seed(cfg.seed, RngPhase::WarmupSampling));
        for (int b = 0; b < cfg.warmup_batches; ++b) {
            const std::vector<int> batch =
                sample_minibatch(warmup_rng, dataset.examples.size(), cfg.minibatch);
            const std::vector<int> prompts = batch_prompts(dataset, batch);
            VecX values(static_cast<Eigen::Index>(prompts.size()));
            if (cfg.mode == PolicyMode::ExactExpectation) {
                for (std::size_t i = 0; i < prompts.size(); ++i)
                    values[static_cast<Eigen::Index>(i)] =
                        kl_value(params, env, kl, reward, prompts[i], shift);
            } else {
                for (std::size_t i = 0; i < prompts.size(); ++i) {
                    const int x = prompts[i];
                    const VecX probs = log_policy_row(params, env, x).array().exp().matrix();
                    const int y = static_cast<int>(warmup_rng.categorical(probs));
                    values[static_cast<Eigen::Index>(i)] =
                        completion_values(params, env, kl, reward, x, shift)[y];
                }
            }
            const WeightSolution sol = solve_weights(values, spec, Sense::Min, cfg.q_floor);
            q_min_hat = std::min(q_min_hat, min_positive_weight(sol.weights));
        }
        eta = std::min(1.0 / (2.0 * cfg.beta * q_min_hat), 0.1);
    }

    Rng batch_rng(derive_seed(cfg.seed, RngPhase::MinibatchSampling));
    Rng completion_rng(derive_seed(cfg.seed, RngPhase::CompletionSampling));

    TrainReport report;
    report.config_digest = cfg.digest();
    report.build_id = build_id();
    report.rows.reserve(static_cast<std::size_t>(cfg.iterations));

    PolicyDiagnostics diag;
    diag.resolved_eta = eta;
    diag.reward_shift_used = shift;

    for (int t = 1; t <= cfg.iterations; ++t) {
        const auto started = std::chrono::steady_clock::now();
        assert(params.theta.norm() <= cfg.radius_B + 1e-12);

        const std::vector<int> batch =
            sample_minibatch(batch_rng, dataset.examples.size(), cfg.minibatch);
        const std::vector<int> prompts = batch_prompts(dataset, batch);

        PolicyStep step;
        if (cfg.mode == PolicyMode::ExactExpectation) {
            step = policy_step_exact(params, env, prompts, reward, kl, spec, cfg.q_floor,
                                     cfg.pinv_rel_tol, shift);
        } else {
            VecX values(static_cast<Eigen::Index>(prompts.size()));
            for (std::size_t i = 0; i < prompts.size(); ++i) {
                const int x = prompts[i];
                const VecX probs = log_policy_row(params, env, x).array().exp().matrix();
                const int y = static_cast<int>(completion_rng.categorical(probs));
                values[static_cast<Eigen::Index>(i)] =
                    completion_values(params, env, kl, reward, x, shift)[y];
            }
            step = policy_step_with_values(params, env, prompts, values, reward, kl, spec,
                                           cfg.q_floor, cfg.pinv_rel_tol, shift);
        }
        if (step.degenerate) {
            std::ostringstream msg;
            msg << "policy trainer: degenerate geometry at iteration " << t
                << " (weighted Fisher has no positive spectrum but the gradient is nonzero)";
            throw NumericalError(msg.str());
        }

        // uniform-weight objective over the same atoms, for comparison
        double uniform_value = 0.0;
        for (std::size_t i = 0; i < prompts.size(); ++i)
            uniform_value += kl_value(params, env, kl, reward, prompts[i], shift);
        uniform_value /= static_cast<double>(prompts.size());

        diag.q_min = std::isnan(diag.q_min)
                         ? step.weights.weights.minCoeff()
                         : std::min(diag.q_min, step.weights.weights.minCoeff());
        const double positive = min_positive_weight(step.weights.weights);
        diag.q_min_positive = std::isnan(diag.q_min_positive)
                                  ? positive
                                  : std::min(diag.q_min_positive, positive);
        if (step.min_eig_above_cutoff > 0.0)
            diag.sigma_min = std::isnan(diag.sigma_min)
                                 ? step.min_eig_above_cutoff
                                 : std::min(diag.sigma_min, step.min_eig_above_cutoff);
        diag.eps_apx_min =
            std::isnan(diag.eps_apx_min) ? step.compat : std::min(diag.eps_apx_min, step.compat);

        double phi = std::numeric_limits<double>::quiet_NaN();
        if (oracle_optimum != nullptr) {
            phi = potential(params, *oracle_optimum, env);
            double concentrability = 0.0;
            for (std::size_t i = 0; i < prompts.size(); ++i) {
                const int x = prompts[i];
                const VecX log_cur = log_policy_row(params, env, x);
                const VecX log_opt = log_policy_row(*oracle_optimum, env, x);
                double ratio_sq = 0.0;
                for (int y = 0; y < env.num_completions; ++y)
                    ratio_sq += std::exp(2.0 * log_opt[y] - log_cur[y]);
                concentrability += step.weights.weights[static_cast<Eigen::Index>(i)] * ratio_sq;
            }
            diag.concentrability_max = std::isnan(diag.concentrability_max)
                                           ? concentrability
                                           : std::max(diag.concentrability_max, concentrability);
        }

        params.theta = project_to_ball(params.theta + eta * step.direction, cfg.radius_B);

        TrainRow row;
        row.iter = t;
        row.robust_minibatch_loss = step.weights.objective;
        row.uniform_minibatch_loss = uniform_value;
        row.grad_norm = step.grad.norm();
        row.mass_moved = step.weights.mass_moved;
        row.potential = phi;
        row.min_eig_above_cutoff = step.min_eig_above_cutoff;
        row.compat_loss = step.compat;
        row.wallclock_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                .count();
        report.rows.push_back(row);
    }

    return {std::move(params), std::move(report), diag};
}

} // namespace dropref
