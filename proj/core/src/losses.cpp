// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#include "dropref/losses.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace dropref {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double log_sigmoid(double z) {
    if (z >= 0.0) return -std::log1p(std::exp(-z));
    return z - std::log1p(std::exp(z));
}

double bt_preference_prob(double r_plus, double r_minus) { return sigmoid(r_plus - r_minus); }

namespace {

VecX reward_feature_diff(const FeatureEnv& env, const PreferenceExample& ex) {
    return (env.reward_feature(ex.prompt, ex.y_plus) - env.reward_feature(ex.prompt, ex.y_minus))
        .transpose();
}

VecX policy_feature_diff(const FeatureEnv& env, const PreferenceExample& ex) {
    return (env.policy_feature(ex.prompt, ex.y_plus) - env.policy_feature(ex.prompt, ex.y_minus))
        .transpose();
}

/// Softmax probabilities over completions for one prompt.
VecX policy_probs(const PolicyParams& params, const FeatureEnv& env, int x) {
    return log_policy_row(params, env, x).array().exp().matrix();
}

/// Mean policy feature under pi_theta(.|x).
VecX mean_policy_feature(const FeatureEnv& env, const VecX& probs, int x) {
    VecX mean = VecX::Zero(env.d_policy);
    for (int y = 0; y < env.num_completions; ++y)
        mean += probs[y] * env.policy_feature(x, y).transpose();
    return mean;
}

} // namespace

double reward_loss(const RewardParams& params, const FeatureEnv& env,
                   const PreferenceExample& ex) {
    return -log_sigmoid(params.omega.dot(reward_feature_diff(env, ex)));
}

VecX reward_loss_grad(const RewardParams& params, const FeatureEnv& env,
                      const PreferenceExample& ex) {
    const VecX diff = reward_feature_diff(env, ex);
    return -(1.0 - sigmoid(params.omega.dot(diff))) * diff;
}

VecX log_policy_row(const PolicyParams& params, const FeatureEnv& env, int x) {
    VecX logits(env.num_completions);
    for (int y = 0; y < env.num_completions; ++y)
        logits[y] = env.policy_feature(x, y).dot(params.theta);
    const double shift = logits.maxCoeff();
    const double lse = shift + std::log((logits.array() - shift).exp().sum());
    return logits.array() - lse;
}

double log_policy(const PolicyParams& params, const FeatureEnv& env, int x, int y) {
    return log_policy_row(params, env, x)[y];
}

VecX policy_score(const PolicyParams& params, const FeatureEnv& env, int x, int y) {
    const VecX probs = policy_probs(params, env, x);
    return env.policy_feature(x, y).transpose() - mean_policy_feature(env, probs, x);
}

VecX completion_values(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                       const RewardParams& reward, int x, double reward_shift) {
    const VecX log_pi = log_policy_row(params, env, x);
    const VecX log_ref = log_policy_row({env.ref_policy_params, env.radius_B}, env, x);
    VecX values(env.num_completions);
    for (int y = 0; y < env.num_completions; ++y) {
        const double r = env.reward_feature(x, y).dot(reward.omega) + reward_shift;
        values[y] = r - kl.beta * (log_pi[y] - log_ref[y]);
    }
    return values;
}

double kl_value(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                const RewardParams& reward, int x, double reward_shift) {
    const VecX probs = policy_probs(params, env, x);
    return probs.dot(completion_values(params, env, kl, reward, x, reward_shift));
}

VecX kl_value_grad(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                   const RewardParams& reward, int x, double reward_shift) {
    const VecX probs = policy_probs(params, env, x);
    const VecX values = completion_values(params, env, kl, reward, x, reward_shift);
    const VecX mean_feature = mean_policy_feature(env, probs, x);
    VecX grad = VecX::Zero(env.d_policy);
    for (int y = 0; y < env.num_completions; ++y) {
        const VecX score = env.policy_feature(x, y).transpose() - mean_feature;
        grad += probs[y] * values[y] * score;
    }
    return grad;
}

MatX fisher_matrix(const PolicyParams& params, const FeatureEnv& env, int x) {
    const VecX probs = policy_probs(params, env, x);
    const VecX mean_feature = mean_policy_feature(env, probs, x);
    MatX fisher = MatX::Zero(env.d_policy, env.d_policy);
    for (int y = 0; y < env.num_completions; ++y) {
        const VecX score = env.policy_feature(x, y).transpose() - mean_feature;
        fisher.noalias() += probs[y] * score * score.transpose();
    }
    return fisher;
}

MatX weighted_fisher(const PolicyParams& params, const FeatureEnv& env,
                     const std::vector<int>& prompts, const VecX& q) {
    if (static_cast<Eigen::Index>(prompts.size()) != q.size())
        throw ContractError("weighted_fisher: prompts/weights length mismatch");
    MatX acc = MatX::Zero(env.d_policy, env.d_policy);
    for (std::size_t i = 0; i < prompts.size(); ++i)
        acc += q[static_cast<Eigen::Index>(i)] * fisher_matrix(params, env, prompts[i]);
    return acc;
}

MatX pinv_psd(const MatX& m, double rel_tol) {
    if (m.rows() != m.cols()) throw ContractError("pinv_psd: matrix must be square");
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9) throw ContractError("pinv_psd: matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<MatX> eigen(m);
    if (eigen.info() != Eigen::Success) throw NumericalError("pinv_psd: eigendecomposition failed");

    const VecX& eigenvalues = eigen.eigenvalues();
    const double lambda_max = eigenvalues.maxCoeff();
    if (lambda_max <= 0.0) return MatX::Zero(m.rows(), m.cols());

    const double cutoff = rel_tol * lambda_max;
    VecX inverted(eigenvalues.size());
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
        inverted[i] = eigenvalues[i] > cutoff ? 1.0 / eigenvalues[i] : 0.0;
    return eigen.eigenvectors() * inverted.asDiagonal() * eigen.eigenvectors().transpose();
}

double dpo_logit(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                 const PreferenceExample& ex) {
    const VecX diff = policy_feature_diff(env, ex);
    return kl.beta * (params.theta - env.ref_policy_params).dot(diff);
}

double dpo_loss(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                const PreferenceExample& ex) {
    return -log_sigmoid(dpo_logit(params, env, kl, ex));
}

VecX dpo_loss_grad(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                   const PreferenceExample& ex) {
    const VecX diff = policy_feature_diff(env, ex);
    const double z = kl.beta * (params.theta - env.ref_policy_params).dot(diff);
    return -(1.0 - sigmoid(z)) * kl.beta * diff;
}

double compatible_loss(const VecX& w, const PolicyParams& params, const FeatureEnv& env,
                       const std::vector<int>& prompts, const VecX& q, const KLConfig& kl,
                       const RewardParams& reward, double reward_shift) {
    if (static_cast<Eigen::Index>(prompts.size()) != q.size())
        throw ContractError("compatible_loss: prompts/weights length mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const int x = prompts[i];
        const VecX probs = policy_probs(params, env, x);
        const VecX values = completion_values(params, env, kl, reward, x, reward_shift);
        const VecX mean_feature = mean_policy_feature(env, probs, x);
        double inner = 0.0;
        for (int y = 0; y < env.num_completions; ++y) {
            const VecX score = env.policy_feature(x, y).transpose() - mean_feature;
            const double residual = values[y] - w.dot(score);
            inner += probs[y] * residual * residual;
        }
        loss += q[static_cast<Eigen::Index>(i)] * inner;
    }
    return loss;
}

} // namespace dropref
