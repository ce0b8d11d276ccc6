// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dropref/env.hpp"
#include "dropref/losses.hpp"
#include "dropref/report.hpp"
#include "dropref/reward_trainer.hpp"
#include "dropref/rng.hpp"
#include "dropref/weights.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace dropref {

struct DpoTrainConfig {
    int iterations = 100;            ///< T
    int minibatch = 16;              ///< n
    double eta = 0.0;                ///< step size; <= 0 selects 2 / sqrt(T)
    double rho = 0.0;
    Divergence divergence = Divergence::TV;
    double beta = 0.1;
    double radius_B = 1.0;
    std::uint64_t seed = 0;
    double q_floor = 0.0;
    OutputMode output = OutputMode::Average;

    double resolved_eta() const;
    void validate() const;
    std::string digest() const;
};

/// Worst-case weights over per-example DPO losses (max sense) plus the
/// reweighted gradient on a fixed minibatch.
struct DpoStep {
    VecX grad;
    WeightSolution weights;
    double uniform_loss = 0.0;
};
DpoStep dpo_step(const PolicyParams& params, const FeatureEnv& env, const KLConfig& kl,
                 const PreferenceDataset& dataset, const std::vector<int>& batch,
                 const DivergenceSpec& spec, double q_floor);

/**
 * Distributionally robust DPO: reweighted projected minibatch SGD on
 * the DPO loss, iterates averaged, default step size exactly 2/sqrt(T).
 */
std::pair<PolicyParams, TrainReport> train_robust_dpo(const DpoTrainConfig& cfg,
                                                      const FeatureEnv& env,
                                                      const PreferenceDataset& dataset);

} // namespace dropref
