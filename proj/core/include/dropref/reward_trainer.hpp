// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dropref/env.hpp"
#include "dropref/losses.hpp"
#include "dropref/report.hpp"
#include "dropref/rng.hpp"
#include "dropref/weights.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace dropref {

/// Which iterate a minibatch SGD trainer returns. The average is the
/// right choice for the convex linear model; Last and
/// BestRobustMinibatchLoss are provided for experimentation with the
/// other selection rules.
enum class OutputMode { Average, Last, BestRobustMinibatchLoss };

struct RewardTrainConfig {
    int iterations = 100;            ///< T
    int minibatch = 16;              ///< n
    double eta = 0.0;                ///< step size; <= 0 selects F / (2 sqrt(T))
    double rho = 0.0;
    Divergence divergence = Divergence::TV;
    double radius_F = 1.0;
    std::uint64_t seed = 0;
    double q_floor = 0.0;
    OutputMode output = OutputMode::Average;

    double resolved_eta() const;
    void validate() const;
    std::string digest() const;
};

/// One gradient assembly on a fixed minibatch: worst-case weights over
/// the per-example losses (max sense) and the reweighted gradient
/// sum_i q*_i grad l_i, accumulated in index order.
struct RewardStep {
    VecX grad;
    WeightSolution weights;
    double uniform_loss = 0.0;
};
RewardStep reward_step(const RewardParams& params, const FeatureEnv& env,
                       const PreferenceDataset& dataset, const std::vector<int>& batch,
                       const DivergenceSpec& spec, double q_floor);

/**
 * Distributionally robust reward estimation: reweighted projected
 * minibatch SGD over the negative BT log likelihood, iterates averaged.
 * Minibatches are drawn with replacement. With rho = 0 the run is
 * numerically identical to uniform-weight SGD at the same seed.
 */
std::pair<RewardParams, TrainReport> train_robust_reward(const RewardTrainConfig& cfg,
                                                         const FeatureEnv& env,
                                                         const PreferenceDataset& dataset);

/// Minibatch index sequence used by the SGD trainers (with
/// replacement); exposed so tests can replay gradient assembly.
std::vector<int> sample_minibatch(Rng& rng, std::size_t dataset_size, int n);

} // namespace dropref
