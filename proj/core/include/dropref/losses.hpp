// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dropref/env.hpp"

#include <vector>

namespace dropref {

/// Linear reward model r(x,y) = <omega, reward_features(x,y)>.
struct RewardParams {
    VecX omega;
    double radius_F = 1.0;

    void validate() const {
        if (omega.norm() > radius_F + 1e-12)
            throw ContractError("reward params: ||omega|| exceeds F");
    }
};

/// Log-linear policy pi_theta(y|x) = softmax_y(<theta, policy_features(x,y)>).
struct PolicyParams {
    VecX theta;
    double radius_B = 1.0;

    void validate() const {
        if (theta.norm() > radius_B + 1e-12)
            throw ContractError("policy params: ||theta|| exceeds B");
    }
};

struct KLConfig {
    double beta = 0.1; ///< KL regularization coefficient, > 0
};

/// Euclidean projection onto the ball of the given radius.
inline VecX project_to_ball(VecX v, double radius) {
    const double norm = v.norm();
    if (norm > radius) v *= radius / norm;
    return v;
}

/// Numerically stable logistic function, branch on sign.
double sigmoid(double z);
/// log sigma(z) = -softplus(-z), stable for |z| up to ~700.
double log_sigmoid(double z);
/// Bradley-Terry preference probability sigma(r_plus - r_minus).
double bt_preference_prob(double r_plus, double r_minus);

/// -log sigma(<omega, phi(x,y+) - phi(x,y-)>)
double reward_loss(const RewardParams& params, const FeatureEnv& env,
                   const PreferenceExample& ex);
/// -(1 - sigma(<omega, dphi>)) * dphi
VecX reward_loss_grad(const RewardParams& params, const FeatureEnv& env,
                      const PreferenceExample& ex);

/// Log probabilities of every completion for the prompt (max-shifted logsumexp).
VecX log_policy_row(const PolicyParams& params, const FeatureEnv& env, int x);
double log_policy(const PolicyParams& params, const FeatureEnv& env, int x, int y);

/// grad_theta log pi_theta(y|x) = psi(x,y) - E_{y'~pi_theta}[psi(x,y')]
VecX policy_score(const PolicyParams& params, const FeatureEnv& env, int x, int y);

/// Per-completion KL-regularized values
/// v(theta;x,y) = r(x,y) + reward_shift - beta*log(pi_theta(y|x)/pi_ref(y|x)).
VecX completion_values(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                       const RewardParams& reward, int x, double reward_shift = 0.0);

/// v(theta;x) = E_{y~pi_theta}[v(theta;x,y)], exact over the finite completion set.
double kl_value(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                const RewardParams& reward, int x, double reward_shift = 0.0);

/// grad_theta v(theta;x) = E_{y~pi_theta}[score(x,y) * v(theta;x,y)]
/// (the -beta*score part of grad v vanishes because the score is mean zero).
VecX kl_value_grad(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                   const RewardParams& reward, int x, double reward_shift = 0.0);

/// Per-prompt Fisher information E_{y~pi_theta}[score score^T].
MatX fisher_matrix(const PolicyParams& params, const FeatureEnv& env, int x);

/// Weighted Fisher sum_i q_i F(theta|x_i); convex combination of PSD terms.
MatX weighted_fisher(const PolicyParams& params, const FeatureEnv& env,
                     const std::vector<int>& prompts, const VecX& q);

/**
 * Moore-Penrose pseudo-inverse of a symmetric PSD matrix through its
 * eigendecomposition. Eigenvalues below rel_tol * lambda_max are
 * treated as zero (Fisher matrices are rank deficient by construction,
 * so an absolute cutoff would misbehave across scales).
 *
 * Throws ContractError when ||M - M^T||_inf > 1e-9.
 */
MatX pinv_psd(const MatX& m, double rel_tol = 1e-10);

/// DPO preference logit; for a log-linear reference policy the
/// normalizers cancel: z = beta * (theta - theta_ref)^T (psi+ - psi-).
double dpo_logit(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                 const PreferenceExample& ex);
double dpo_loss(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                const PreferenceExample& ex);
/// -(1 - sigma(z)) * beta * dpsi  (chain rule keeps the beta factor)
VecX dpo_loss_grad(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                   const PreferenceExample& ex);

/// Compatible-function-approximation loss
/// L(w) = sum_i q_i E_{y~pi_theta}[(v(theta;x_i,y) - w^T score(x_i,y))^2];
/// its minimum over w is the eps_apx surrogate reported by the harness.
double compatible_loss(const VecX& w, const PolicyParams& params, const FeatureEnv& env,
                       const std::vector<int>& prompts, const VecX& q, const KLConfig& kl,
                       const RewardParams& reward, double reward_shift = 0.0);

} // namespace dropref
