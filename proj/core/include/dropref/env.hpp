// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dropref/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dropref {

/**
 * Finite prompt/completion space with unit-norm feature maps, a linear
 * ground-truth reward, a source distribution over prompts, and a
 * log-linear reference policy.
 *
 * Feature rows are stored x-major: row(x * num_completions + y).
 */
struct FeatureEnv {
    int num_prompts = 0;
    int num_completions = 0;
    int d_reward = 0;
    int d_policy = 0;
    MatX reward_features;       // (num_prompts*num_completions) x d_reward
    MatX policy_features;       // (num_prompts*num_completions) x d_policy
    VecX true_reward_params;    // omega*, ||.||_2 <= radius_F
    VecX ref_policy_params;     // theta_ref, ||.||_2 <= radius_B
    VecX source_dist;           // distribution over prompts
    double radius_F = 1.0;
    double radius_B = 1.0;

    Eigen::Index pair_index(int x, int y) const {
        return static_cast<Eigen::Index>(x) * num_completions + y;
    }
    auto reward_feature(int x, int y) const { return reward_features.row(pair_index(x, y)); }
    auto policy_feature(int x, int y) const { return policy_features.row(pair_index(x, y)); }

    double true_reward(int x, int y) const {
        return reward_feature(x, y).dot(true_reward_params);
    }

    /// Content hash over dimensions, radii, and every parameter bit.
    std::string digest() const;

    /// Throws ConfigError if any type invariant is violated.
    void validate() const;
};

struct PreferenceExample {
    int prompt = 0;
    int y_plus = 0;
    int y_minus = 0;

    friend bool operator==(const PreferenceExample&, const PreferenceExample&) = default;
};

struct PreferenceDataset {
    std::vector<PreferenceExample> examples;
    std::string env_digest;
    std::uint64_t seed = 0;

    friend bool operator==(const PreferenceDataset&, const PreferenceDataset&) = default;
};

/**
 * Deterministically instantiate an environment: features are sampled
 * i.i.d. from a spherically symmetric distribution and rescaled to unit
 * norm, omega* uniformly from the radius-F ball, theta_ref = 0 (uniform
 * reference policy), and the source distribution from a symmetric
 * Dirichlet with concentration 1, floored at 0.01/num_prompts and
 * renormalized so min_x source_dist(x) stays bounded away from zero.
 */
FeatureEnv generate_env(std::uint64_t seed, int num_prompts, int num_completions, int d_reward,
                        int d_policy, double F, double B);

/**
 * Sample n preference triples: prompt from source_dist, an unordered
 * pair of distinct completions uniformly, and the preferred side from
 * the Bradley-Terry probability under the environment's true reward.
 */
PreferenceDataset sample_dataset(const FeatureEnv& env, int n_examples, std::uint64_t seed);

/// Throws DigestMismatchError unless dataset.env_digest == env.digest().
void require_matching_digest(const FeatureEnv& env, const PreferenceDataset& dataset);

} // namespace dropref
