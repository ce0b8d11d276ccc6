// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dropref/env.hpp"
#include "dropref/losses.hpp"
#include "dropref/weights.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace dropref {

/// Population-level robust evaluation result.
struct EvalReport {
    double standard_loss = 0.0; ///< objective under the source distribution
    double robust_loss = 0.0;   ///< objective under the worst distribution in the ball
    VecX worst_dist;            ///< distribution attaining robust_loss
    double rho = 0.0;
    std::map<std::string, double> extras;
};

/**
 * Exact population robust objective over the finite prompt support:
 * shifts the prompt marginal within the divergence ball and reweights
 * the supplied per-prompt losses (max sense for losses, min for values).
 */
EvalReport robust_population_loss(const VecX& loss_per_prompt, const VecX& source_dist,
                                  double rho, Divergence kind, Sense sense);

/// Per-prompt expected losses plus the worst Monte-Carlo standard error
/// (zero when the expectation was enumerated exactly).
struct PerPromptLosses {
    VecX values;
    double max_se = 0.0;
};

/// Expected BT reward loss per prompt: exact enumeration over completion
/// pairs and labels for |Y| <= 64, stratified sampling with a reported
/// standard error above that.
PerPromptLosses reward_loss_per_prompt(const RewardParams& params, const FeatureEnv& env,
                                       std::uint64_t seed = 0);

/// Expected DPO loss per prompt, same enumeration/sampling rule.
PerPromptLosses dpo_loss_per_prompt(const PolicyParams& params, const FeatureEnv& env,
                                    const KLConfig& kl, std::uint64_t seed = 0);

/// Exact KL-regularized value per prompt.
VecX policy_value_per_prompt(const PolicyParams& params, const FeatureEnv& env,
                             const KLConfig& kl, const RewardParams& reward,
                             double reward_shift = 0.0);

/// Full triple distribution (x, y+, y-) induced by the environment:
/// prompt marginal times the uniform unordered pair draw times the BT
/// label probability under the true reward.
struct TripleAtoms {
    std::vector<PreferenceExample> examples;
    VecX probs;
};
TripleAtoms enumerate_triples(const FeatureEnv& env);

/**
 * Monte-Carlo verification of the minibatch bias sandwich
 *   0 <= l_TV(P) - E[l_TV(minibatch of n)] <= 3 B_l (1+2 rho) sqrt((4+log n)/n)
 * for the reward loss (B_l = 4F). The population side shifts the full
 * triple distribution; the minibatch side averages the worst-case
 * reweighted loss over `trials` i.i.d. minibatches.
 */
struct BiasCheckResult {
    double population_robust = 0.0;
    double minibatch_mean = 0.0;
    double minibatch_se = 0.0;
    double bound = 0.0;
    int n = 0;
    double rho = 0.0;
    int trials = 0;
};
BiasCheckResult bias_check(const RewardParams& params, const FeatureEnv& env, int n, double rho,
                           int trials, std::uint64_t seed);

/// Ground-truth optimizer result for convergence-rate checks.
struct OracleResult {
    VecX params;
    double objective = 0.0;
};

/**
 * Oracle optima of the exact population robust objectives. For
 * dimension <= 3 a dense grid over the parameter ball at resolution
 * 0.01; otherwise multi-start (32 starts) projected gradient descent
 * with exact population gradients and a backtracking step, run to
 * first-order residual < 1e-8, best of starts. Deterministic given the
 * seed.
 */
OracleResult oracle_optimum_reward(const FeatureEnv& env, double rho, Divergence kind,
                                   std::uint64_t seed);
OracleResult oracle_optimum_policy(const FeatureEnv& env, const RewardParams& reward,
                                   const KLConfig& kl, double rho, Divergence kind,
                                   std::uint64_t seed, double reward_shift = 0.0);
OracleResult oracle_optimum_dpo(const FeatureEnv& env, const KLConfig& kl, double rho,
                                Divergence kind, std::uint64_t seed);

/// Environment-level constants of the analysis: nu = min_x D_src(x),
/// J = max |log pi_ref(y|x)/pi_ref(y'|x)|, and the reward range under
/// the given model and shift.
std::map<std::string, double> measure_env_constants(const FeatureEnv& env,
                                                    const RewardParams& reward,
                                                    double reward_shift = 0.0);

} // namespace dropref
