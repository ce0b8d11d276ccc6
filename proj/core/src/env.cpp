// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#include "dropref/env.hpp"

#include "dropref/digest.hpp"
#include "dropref/losses.hpp"
#include "dropref/rng.hpp"

#include <cmath>
#include <sstream>

namespace dropref {

namespace {

/// Unit-norm vector sampled from a spherically symmetric distribution.
VecX sample_unit_vector(Rng& rng, Eigen::Index dim) {
    VecX v(dim);
    double norm = 0.0;
    do {
        for (Eigen::Index j = 0; j < dim; ++j) v[j] = rng.normal();
        norm = v.norm();
    } while (norm < 1e-9);
    return v / norm;
}

} // namespace

std::string FeatureEnv::digest() const {
    Digest d;
    d.str("dro-pref/env/v1");
    d.i64(num_prompts).i64(num_completions).i64(d_reward).i64(d_policy);
    d.f64(radius_F).f64(radius_B);
    d.mat(reward_features).mat(policy_features);
    d.vec(true_reward_params).vec(ref_policy_params).vec(source_dist);
    return d.hex();
}

void FeatureEnv::validate() const {
    std::ostringstream msg;
    if (num_prompts < 1 || num_completions < 1 || d_reward < 1 || d_policy < 1) {
        msg << "env: all dimensions must be positive, got |X|=" << num_prompts
            << " |Y|=" << num_completions << " d_R=" << d_reward << " d_P=" << d_policy;
        throw ConfigError(msg.str());
    }
    if (radius_F <= 0.0 || radius_B <= 0.0) throw ConfigError("env: radii F and B must be > 0");

    const Eigen::Index pairs = static_cast<Eigen::Index>(num_prompts) * num_completions;
    if (reward_features.rows() != pairs || reward_features.cols() != d_reward ||
        policy_features.rows() != pairs || policy_features.cols() != d_policy)
        throw ConfigError("env: feature matrix shape mismatch");
    if (true_reward_params.size() != d_reward || ref_policy_params.size() != d_policy ||
        source_dist.size() != num_prompts)
        throw ConfigError("env: parameter vector length mismatch");

    constexpr double kNormSlack = 1.0 + 1e-12;
    for (Eigen::Index r = 0; r < pairs; ++r) {
        if (reward_features.row(r).norm() > kNormSlack)
            throw ConfigError("env: reward feature norm exceeds 1");
        if (policy_features.row(r).norm() > kNormSlack)
            throw ConfigError("env: policy feature norm exceeds 1");
    }
    if (true_reward_params.norm() > radius_F + 1e-12)
        throw ConfigError("env: ||omega*|| exceeds F");
    if (ref_policy_params.norm() > radius_B + 1e-12)
        throw ConfigError("env: ||theta_ref|| exceeds B");
    if (source_dist.minCoeff() < 0.0) throw ConfigError("env: negative source probability");
    if (std::abs(source_dist.sum() - 1.0) > 1e-12)
        throw ConfigError("env: source distribution does not sum to 1");
}

FeatureEnv generate_env(std::uint64_t seed, int num_prompts, int num_completions, int d_reward,
                        int d_policy, double F, double B) {
    if (num_prompts < 1 || num_completions < 2 || d_reward < 1 || d_policy < 1) {
        std::ostringstream msg;
        msg << "generate_env: invalid dimensions |X|=" << num_prompts
            << " |Y|=" << num_completions << " d_R=" << d_reward << " d_P=" << d_policy
            << " (need |X|,d >= 1 and |Y| >= 2)";
        throw ConfigError(msg.str());
    }
    if (F <= 0.0 || B <= 0.0) throw ConfigError("generate_env: radii F and B must be > 0");

    FeatureEnv env;
    env.num_prompts = num_prompts;
    env.num_completions = num_completions;
    env.d_reward = d_reward;
    env.d_policy = d_policy;
    env.radius_F = F;
    env.radius_B = B;

    const Eigen::Index pairs = static_cast<Eigen::Index>(num_prompts) * num_completions;
    env.reward_features.resize(pairs, d_reward);
    env.policy_features.resize(pairs, d_policy);

    Rng features_rng(derive_seed(seed, RngPhase::EnvFeatures));
    for (Eigen::Index r = 0; r < pairs; ++r)
        env.reward_features.row(r) = sample_unit_vector(features_rng, d_reward).transpose();
    for (Eigen::Index r = 0; r < pairs; ++r)
        env.policy_features.row(r) = sample_unit_vector(features_rng, d_policy).transpose();

    // omega* uniform in the radius-F ball: unit direction scaled by F * u^(1/d)
    Rng params_rng(derive_seed(seed, RngPhase::EnvRewardParams));
    env.true_reward_params =
        sample_unit_vector(params_rng, d_reward) *
        (F * std::pow(params_rng.uniform01(), 1.0 / static_cast<double>(d_reward)));

    env.ref_policy_params = VecX::Zero(d_policy);

    // symmetric Dirichlet(1) via normalized exponentials, then floor
    Rng dist_rng(derive_seed(seed, RngPhase::EnvSourceDist));
    env.source_dist.resize(num_prompts);
    for (int x = 0; x < num_prompts; ++x) env.source_dist[x] = dist_rng.exponential();
    env.source_dist /= env.source_dist.sum();
    const double floor = 0.01 / static_cast<double>(num_prompts);
    env.source_dist = env.source_dist.cwiseMax(floor);
    env.source_dist /= env.source_dist.sum();

    env.validate();
    return env;
}

PreferenceDataset sample_dataset(const FeatureEnv& env, int n_examples, std::uint64_t seed) {
    if (n_examples < 1) throw ConfigError("sample_dataset: n_examples must be >= 1");
    env.validate();

    PreferenceDataset dataset;
    dataset.seed = seed;
    dataset.env_digest = env.digest();
    dataset.examples.reserve(static_cast<std::size_t>(n_examples));

    Rng rng(derive_seed(seed, RngPhase::DatasetSampling));
    const auto completions = static_cast<std::uint64_t>(env.num_completions);
    for (int i = 0; i < n_examples; ++i) {
        const int x = static_cast<int>(rng.categorical(env.source_dist));
        const int a = static_cast<int>(rng.uniform_int(completions));
        int b = static_cast<int>(rng.uniform_int(completions - 1));
        if (b >= a) ++b;
        const double p_a = bt_preference_prob(env.true_reward(x, a), env.true_reward(x, b));
        const bool a_wins = rng.uniform01() < p_a;
        dataset.examples.push_back({x, a_wins ? a : b, a_wins ? b : a});
    }
    return dataset;
}

void require_matching_digest(const FeatureEnv& env, const PreferenceDataset& dataset) {
    const std::string expected = env.digest();
    if (dataset.env_digest != expected) {
        std::ostringstream msg;
        msg << "dataset was generated against environment " << dataset.env_digest
            << " but the supplied environment has digest " << expected;
        throw DigestMismatchError(msg.str());
    }
}

} // namespace dropref
