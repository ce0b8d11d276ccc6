// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#include "dropref/eval.hpp"

#include "dropref/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace dropref {

namespace {

constexpr int kExactEnumerationLimit = 64;
constexpr int kSampledPairsPerPrompt = 4096;

/// Expected pair loss per prompt for a loss evaluated on ordered
/// (winner, loser) pairs, with labels drawn from the true BT model.
PerPromptLosses expected_pair_loss(const FeatureEnv& env, std::uint64_t seed,
                                   const std::function<double(const PreferenceExample&)>& loss) {
    PerPromptLosses out;
    out.values.resize(env.num_prompts);

    if (env.num_completions <= kExactEnumerationLimit) {
        const double pair_count =
            0.5 * env.num_completions * (env.num_completions - 1);
        for (int x = 0; x < env.num_prompts; ++x) {
            double acc = 0.0;
            for (int a = 0; a < env.num_completions; ++a) {
                for (int b = a + 1; b < env.num_completions; ++b) {
                    const double p_ab =
                        bt_preference_prob(env.true_reward(x, a), env.true_reward(x, b));
                    acc += p_ab * loss({x, a, b}) + (1.0 - p_ab) * loss({x, b, a});
                }
            }
            out.values[x] = acc / pair_count;
        }
        return out;
    }

    // |Y| too large to enumerate pairs: stratified sampling per prompt
    Rng rng(derive_seed(seed, RngPhase::BiasTrials));
    const auto completions = static_cast<std::uint64_t>(env.num_completions);
    for (int x = 0; x < env.num_prompts; ++x) {
        double sum = 0.0, sum_sq = 0.0;
        for (int k = 0; k < kSampledPairsPerPrompt; ++k) {
            const int a = static_cast<int>(rng.uniform_int(completions));
            int b = static_cast<int>(rng.uniform_int(completions - 1));
            if (b >= a) ++b;
            const double p_a = bt_preference_prob(env.true_reward(x, a), env.true_reward(x, b));
            const double value =
                rng.uniform01() < p_a ? loss({x, a, b}) : loss({x, b, a});
            sum += value;
            sum_sq += value * value;
        }
        const double mean = sum / kSampledPairsPerPrompt;
        const double var =
            std::max(0.0, sum_sq / kSampledPairsPerPrompt - mean * mean);
        out.values[x] = mean;
        out.max_se = std::max(out.max_se, std::sqrt(var / kSampledPairsPerPrompt));
    }
    return out;
}

} // namespace

EvalReport robust_population_loss(const VecX& loss_per_prompt, const VecX& source_dist,
                                  double rho, Divergence kind, Sense sense) {
    EvalReport report;
    report.rho = rho;
    report.standard_loss = source_dist.dot(loss_per_prompt);
    auto [dist, objective] = shift_distribution(source_dist, loss_per_prompt, rho, kind, sense);
    report.worst_dist = std::move(dist);
    report.robust_loss = objective;
    return report;
}

PerPromptLosses reward_loss_per_prompt(const RewardParams& params, const FeatureEnv& env,
                                       std::uint64_t seed) {
    return expected_pair_loss(env, seed, [&](const PreferenceExample& ex) {
        return reward_loss(params, env, ex);
    });
}

PerPromptLosses dpo_loss_per_prompt(const PolicyParams& params, const FeatureEnv& env,
                                    const KLConfig& kl, std::uint64_t seed) {
    return expected_pair_loss(env, seed, [&](const PreferenceExample& ex) {
        return dpo_loss(params, env, kl, ex);
    });
}

VecX policy_value_per_prompt(const PolicyParams& params, const FeatureEnv& env,
                             const KLConfig& kl, const RewardParams& reward,
                             double reward_shift) {
    VecX values(env.num_prompts);
    for (int x = 0; x < env.num_prompts; ++x)
        values[x] = kl_value(params, env, kl, reward, x, reward_shift);
    return values;
}

TripleAtoms enumerate_triples(const FeatureEnv& env) {
    TripleAtoms atoms;
    const int pairs = env.num_completions * (env.num_completions - 1);
    atoms.examples.reserve(static_cast<std::size_t>(env.num_prompts) * pairs);
    const double pair_prob = 2.0 / (static_cast<double>(env.num_completions) *
                                    (env.num_completions - 1));
    std::vector<double> probs;
    probs.reserve(atoms.examples.capacity());
    for (int x = 0; x < env.num_prompts; ++x) {
        for (int a = 0; a < env.num_completions; ++a) {
            for (int b = 0; b < env.num_completions; ++b) {
                if (a == b) continue;
                const double label =
                    bt_preference_prob(env.true_reward(x, a), env.true_reward(x, b));
                atoms.examples.push_back({x, a, b});
                probs.push_back(env.source_dist[x] * pair_prob * label);
            }
        }
    }
    atoms.probs = Eigen::Map<const VecX>(probs.data(), static_cast<Eigen::Index>(probs.size()));
    return atoms;
}

BiasCheckResult bias_check(const RewardParams& params, const FeatureEnv& env, int n, double rho,
                           int trials, std::uint64_t seed) {
    if (n < 1) throw ConfigError("bias_check: minibatch size must be >= 1");
    if (trials < 2) throw ConfigError("bias_check: need at least 2 trials");
    if (rho < 0.0) throw ConfigError("bias_check: rho must be >= 0");
    params.validate();
    env.validate();

    const TripleAtoms atoms = enumerate_triples(env);
    VecX atom_losses(atoms.probs.size());
    for (Eigen::Index i = 0; i < atoms.probs.size(); ++i)
        atom_losses[i] = reward_loss(params, env, atoms.examples[static_cast<std::size_t>(i)]);

    BiasCheckResult result;
    result.n = n;
    result.rho = rho;
    result.trials = trials;
    result.population_robust =
        shift_distribution(atoms.probs, atom_losses, rho, Divergence::TV, Sense::Max).second;

    // cumulative distribution over atoms for inversion sampling
    VecX cdf(atoms.probs.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < atoms.probs.size(); ++i) {
        acc += atoms.probs[i];
        cdf[i] = acc;
    }

    Rng rng(derive_seed(seed, RngPhase::BiasTrials));
    double sum = 0.0, sum_sq = 0.0;
    VecX batch_losses(n);
    for (int trial = 0; trial < trials; ++trial) {
        for (int i = 0; i < n; ++i) {
            const double u = rng.uniform01() * acc;
            const auto* it = std::lower_bound(cdf.data(), cdf.data() + cdf.size(), u);
            Eigen::Index idx = it - cdf.data();
            if (idx >= cdf.size()) idx = cdf.size() - 1;
            batch_losses[i] = atom_losses[idx];
        }
        const double robust = worst_case_weights_tv(batch_losses, rho, Sense::Max).objective;
        sum += robust;
        sum_sq += robust * robust;
    }
    result.minibatch_mean = sum / trials;
    const double var = std::max(0.0, sum_sq / trials - result.minibatch_mean * result.minibatch_mean);
    result.minibatch_se = std::sqrt(var / trials);

    const double loss_bound = 4.0 * params.radius_F;
    result.bound = 3.0 * loss_bound * (1.0 + 2.0 * rho) *
                   std::sqrt((4.0 + std::log(static_cast<double>(n))) / n);
    return result;
}

namespace {

/// Exact population robust objective and its Danskin (sub)gradient at
/// the worst-case distribution.
struct RobustObjective {
    std::function<double(const VecX&)> value;
    std::function<VecX(const VecX&)> grad;
    double radius = 1.0;
    Sense sense = Sense::Max; ///< Max = minimize a robust loss, Min = maximize a robust value
};

/// Projected gradient method with backtracking, run to first-order
/// residual < 1e-8 (residual measured through the projected unit step).
VecX projected_descent(const RobustObjective& objective, VecX point, int max_iters) {
    const double sign = objective.sense == Sense::Max ? 1.0 : -1.0;
    double step = 0.25 * objective.radius;
    double current = sign * objective.value(point);
    for (int k = 0; k < max_iters; ++k) {
        const VecX gradient = sign * objective.grad(point);
        const VecX probe = project_to_ball(point - gradient, objective.radius);
        if ((point - probe).norm() < 1e-8) break;

        bool moved = false;
        for (int halving = 0; halving < 60; ++halving) {
            VecX candidate = project_to_ball(point - step * gradient, objective.radius);
            const double value = sign * objective.value(candidate);
            if (value < current) {
                point = std::move(candidate);
                current = value;
                step = std::min(step * 1.25, 4.0 * objective.radius);
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break; // step underflow: no descent direction left
    }
    return point;
}

OracleResult best_of_starts(const RobustObjective& objective, Eigen::Index dim,
                            std::uint64_t seed) {
    constexpr int kStarts = 32;
    constexpr int kMaxIters = 20000;
    const double sign = objective.sense == Sense::Max ? 1.0 : -1.0;

    Rng rng(derive_seed(seed, RngPhase::OracleStarts));
    OracleResult best;
    best.objective = std::numeric_limits<double>::infinity();
    for (int s = 0; s < kStarts; ++s) {
        VecX start(dim);
        if (s == 0) {
            start.setZero();
        } else {
            for (Eigen::Index j = 0; j < dim; ++j) start[j] = rng.normal();
            const double norm = start.norm();
            if (norm > 0.0)
                start *= objective.radius *
                         std::pow(rng.uniform01(), 1.0 / static_cast<double>(dim)) / norm;
        }
        VecX solution = projected_descent(objective, std::move(start), kMaxIters);
        const double value = sign * objective.value(solution);
        if (value < best.objective) {
            best.objective = value;
            best.params = std::move(solution);
        }
    }
    best.objective = sign * best.objective;
    return best;
}

/// Dense lattice search over the ball at resolution 0.01, d <= 3.
OracleResult grid_search(const RobustObjective& objective, Eigen::Index dim) {
    constexpr double kResolution = 0.01;
    const double sign = objective.sense == Sense::Max ? 1.0 : -1.0;
    const long steps = static_cast<long>(std::llround(objective.radius / kResolution));

    OracleResult best;
    best.objective = std::numeric_limits<double>::infinity();
    VecX point(dim);
    const auto consider = [&]() {
        if (point.norm() > objective.radius + 1e-12) return;
        const double value = sign * objective.value(point);
        if (value < best.objective) {
            best.objective = value;
            best.params = point;
        }
    };

    if (dim == 1) {
        for (long a = -steps; a <= steps; ++a) {
            point[0] = a * kResolution;
            consider();
        }
    } else if (dim == 2) {
        for (long a = -steps; a <= steps; ++a)
            for (long b = -steps; b <= steps; ++b) {
                point[0] = a * kResolution;
                point[1] = b * kResolution;
                consider();
            }
    } else {
        for (long a = -steps; a <= steps; ++a)
            for (long b = -steps; b <= steps; ++b)
                for (long c = -steps; c <= steps; ++c) {
                    point[0] = a * kResolution;
                    point[1] = b * kResolution;
                    point[2] = c * kResolution;
                    consider();
                }
    }
    best.objective = sign * best.objective;
    return best;
}

OracleResult solve_oracle(const RobustObjective& objective, Eigen::Index dim,
                          std::uint64_t seed) {
    if (dim > 16) throw ConfigError("oracle: parameter dimension above 16 is not supported");
    if (dim <= 3) return grid_search(objective, dim);
    return best_of_starts(objective, dim, seed);
}

} // namespace

OracleResult oracle_optimum_reward(const FeatureEnv& env, double rho, Divergence kind,
                                   std::uint64_t seed) {
    env.validate();
    RobustObjective objective;
    objective.radius = env.radius_F;
    objective.sense = Sense::Max;
    objective.value = [&env, rho, kind](const VecX& omega) {
        const RewardParams params{omega, env.radius_F};
        const VecX losses = reward_loss_per_prompt(params, env).values;
        return shift_distribution(env.source_dist, losses, rho, kind, Sense::Max).second;
    };
    objective.grad = [&env, rho, kind](const VecX& omega) {
        const RewardParams params{omega, env.radius_F};
        const VecX losses = reward_loss_per_prompt(params, env).values;
        const VecX worst =
            shift_distribution(env.source_dist, losses, rho, kind, Sense::Max).first;
        const double pair_count = 0.5 * env.num_completions * (env.num_completions - 1);
        VecX grad = VecX::Zero(env.d_reward);
        for (int x = 0; x < env.num_prompts; ++x) {
            if (worst[x] == 0.0) continue;
            VecX prompt_grad = VecX::Zero(env.d_reward);
            for (int a = 0; a < env.num_completions; ++a)
                for (int b = a + 1; b < env.num_completions; ++b) {
                    const double p_ab =
                        bt_preference_prob(env.true_reward(x, a), env.true_reward(x, b));
                    prompt_grad += p_ab * reward_loss_grad(params, env, {x, a, b}) +
                                   (1.0 - p_ab) * reward_loss_grad(params, env, {x, b, a});
                }
            grad += worst[x] / pair_count * prompt_grad;
        }
        return grad;
    };
    return solve_oracle(objective, env.d_reward, seed);
}

OracleResult oracle_optimum_policy(const FeatureEnv& env, const RewardParams& reward,
                                   const KLConfig& kl, double rho, Divergence kind,
                                   std::uint64_t seed, double reward_shift) {
    env.validate();
    reward.validate();
    RobustObjective objective;
    objective.radius = env.radius_B;
    objective.sense = Sense::Min; // maximize the robust value
    objective.value = [&, rho, kind, reward_shift](const VecX& theta) {
        const PolicyParams params{theta, env.radius_B};
        const VecX values = policy_value_per_prompt(params, env, kl, reward, reward_shift);
        return shift_distribution(env.source_dist, values, rho, kind, Sense::Min).second;
    };
    objective.grad = [&, rho, kind, reward_shift](const VecX& theta) {
        const PolicyParams params{theta, env.radius_B};
        const VecX values = policy_value_per_prompt(params, env, kl, reward, reward_shift);
        const VecX worst =
            shift_distribution(env.source_dist, values, rho, kind, Sense::Min).first;
        VecX grad = VecX::Zero(env.d_policy);
        for (int x = 0; x < env.num_prompts; ++x) {
            if (worst[x] == 0.0) continue;
            grad += worst[x] * kl_value_grad(params, env, kl, reward, x, reward_shift);
        }
        return grad;
    };
    return solve_oracle(objective, env.d_policy, seed);
}

OracleResult oracle_optimum_dpo(const FeatureEnv& env, const KLConfig& kl, double rho,
                                Divergence kind, std::uint64_t seed) {
    env.validate();
    RobustObjective objective;
    objective.radius = env.radius_B;
    objective.sense = Sense::Max;
    objective.value = [&, rho, kind](const VecX& theta) {
        const PolicyParams params{theta, env.radius_B};
        const VecX losses = dpo_loss_per_prompt(params, env, kl).values;
        return shift_distribution(env.source_dist, losses, rho, kind, Sense::Max).second;
    };
    objective.grad = [&, rho, kind](const VecX& theta) {
        const PolicyParams params{theta, env.radius_B};
        const VecX losses = dpo_loss_per_prompt(params, env, kl).values;
        const VecX worst =
            shift_distribution(env.source_dist, losses, rho, kind, Sense::Max).first;
        const double pair_count = 0.5 * env.num_completions * (env.num_completions - 1);
        VecX grad = VecX::Zero(env.d_policy);
        for (int x = 0; x < env.num_prompts; ++x) {
            if (worst[x] == 0.0) continue;
            VecX prompt_grad = VecX::Zero(env.d_policy);
            for (int a = 0; a < env.num_completions; ++a)
                for (int b = a + 1; b < env.num_completions; ++b) {
                    const double p_ab =
                        bt_preference_prob(env.true_reward(x, a), env.true_reward(x, b));
                    prompt_grad += p_ab * dpo_loss_grad(params, env, kl, {x, a, b}) +
                                   (1.0 - p_ab) * dpo_loss_grad(params, env, kl, {x, b, a});
                }
            grad += worst[x] / pair_count * prompt_grad;
        }
        return grad;
    };
    return solve_oracle(objective, env.d_policy, seed);
}

std::map<std::string, double> measure_env_constants(const FeatureEnv& env,
                                                    const RewardParams& reward,
                                                    double reward_shift) {
    env.validate();
    reward.validate();

    double r_min = std::numeric_limits<double>::infinity();
    double r_max = -std::numeric_limits<double>::infinity();
    for (int x = 0; x < env.num_prompts; ++x)
        for (int y = 0; y < env.num_completions; ++y) {
            const double r = env.reward_feature(x, y).dot(reward.omega) + reward_shift;
            r_min = std::min(r_min, r);
            r_max = std::max(r_max, r);
        }

    const PolicyParams ref{env.ref_policy_params, env.radius_B};
    double j_const = 0.0;
    for (int x = 0; x < env.num_prompts; ++x) {
        const VecX log_ref = log_policy_row(ref, env, x);
        for (int a = 0; a < env.num_completions; ++a)
            for (int b = 0; b < env.num_completions; ++b)
                if (a != b) j_const = std::max(j_const, std::abs(log_ref[a] - log_ref[b]));
    }

    return {
        {"nu", env.source_dist.minCoeff()},
        {"J", j_const},
        {"r_min", r_min},
        {"r_max", r_max},
        {"reward_shift", reward_shift},
    };
}

} // namespace dropref
