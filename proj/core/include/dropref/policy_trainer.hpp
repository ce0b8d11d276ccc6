// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dropref/env.hpp"
#include "dropref/losses.hpp"
#include "dropref/report.hpp"
#include "dropref/rng.hpp"
#include "dropref/weights.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace dropref {

/// How the worst-case weighting step sees per-prompt values.
/// ExactExpectation evaluates v(theta;x_i) exactly over the completion
/// set (what the analysis assumes); SampledCompletion draws one
/// completion per prompt from the current policy (the algorithm as
/// listed). The reweighted gradient is the exact grad of the expected
/// value in both modes.
enum class PolicyMode { ExactExpectation, SampledCompletion };

struct PolicyTrainConfig {
    int iterations = 100;            ///< T
    int minibatch = 16;              ///< n
    double eta = 0.0;                ///< <= 0 selects min{1/(2 beta q_min_hat), 0.1}
    double rho = 0.0;
    Divergence divergence = Divergence::TV;
    double beta = 0.1;
    double radius_B = 1.0;
    std::uint64_t seed = 0;
    PolicyMode mode = PolicyMode::ExactExpectation;
    double q_floor = 0.0;
    double pinv_rel_tol = 1e-10;
    /// Constant added to the estimated reward inside the value function;
    /// NaN resolves to the reward radius F so shifted rewards are >= 0.
    double reward_shift = std::numeric_limits<double>::quiet_NaN();
    int warmup_batches = 8;          ///< probe batches for the auto step size

    double resolved_shift(const RewardParams& reward) const;
    void validate() const;
    std::string digest() const;
};

/// Measured analogues of the constants the convergence analysis assumes;
/// they are unobservable a priori, so each run reports its own.
struct PolicyDiagnostics {
    double resolved_eta = 0.0;
    double reward_shift_used = 0.0;
    double q_min = std::numeric_limits<double>::quiet_NaN();
    double q_min_positive = std::numeric_limits<double>::quiet_NaN();
    double sigma_min = std::numeric_limits<double>::quiet_NaN();
    double eps_apx_min = std::numeric_limits<double>::quiet_NaN();
    double concentrability_max = std::numeric_limits<double>::quiet_NaN();

    std::map<std::string, double> as_map() const;
};

struct PolicyTrainResult {
    PolicyParams params;
    TrainReport report;
    PolicyDiagnostics diagnostics;
};

/// One natural-gradient assembly for given per-atom values: min-sense
/// worst-case weights, reweighted exact value gradient, weighted Fisher,
/// and the preconditioned direction pinv(G) g.
struct PolicyStep {
    WeightSolution weights;
    VecX grad;
    MatX fisher;
    VecX direction;
    double min_eig_above_cutoff = 0.0;
    double compat = 0.0;
    bool degenerate = false; ///< Fisher has no positive spectrum but grad != 0
};

PolicyStep policy_step_with_values(const PolicyParams& params, const FeatureEnv& env,
                                   const std::vector<int>& prompts, const VecX& values,
                                   const RewardParams& reward, const KLConfig& kl,
                                   const DivergenceSpec& spec, double q_floor,
                                   double pinv_rel_tol, double reward_shift);

/// ExactExpectation step: values are the exact per-prompt KL-regularized
/// values at the current parameters.
PolicyStep policy_step_exact(const PolicyParams& params, const FeatureEnv& env,
                             const std::vector<int>& prompts, const RewardParams& reward,
                             const KLConfig& kl, const DivergenceSpec& spec, double q_floor,
                             double pinv_rel_tol, double reward_shift);

/**
 * Robust policy optimization: worst-case-weighted natural policy
 * gradient ascent on the KL-regularized value, preconditioned by the
 * pseudo-inverse of the weighted Fisher information, returning the
 * final iterate. When oracle_optimum is non-null the potential
 * Phi(pi_t) against it is recorded each iteration and the
 * concentrability constant is measured.
 *
 * Throws NumericalError (degenerate geometry, naming the iteration)
 * when the weighted Fisher has no positive spectrum but the gradient is
 * nonzero.
 */
PolicyTrainResult train_robust_policy(const PolicyTrainConfig& cfg, const FeatureEnv& env,
                                      const PreferenceDataset& dataset,
                                      const RewardParams& reward,
                                      const PolicyParams* oracle_optimum = nullptr);

/// Lyapunov potential: source-weighted KL from the optimal policy to the
/// given one, sum_x D_src(x) KL(pi_opt(.|x) || pi(.|x)).
double potential(const PolicyParams& params, const PolicyParams& opt, const FeatureEnv& env);

} // namespace dropref
