// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dropref/dpo_trainer.hpp"
#include "dropref/policy_trainer.hpp"
#include "dropref/reward_trainer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dropref {

struct GenConfig {
    int num_prompts = 0;
    int num_completions = 0;
    int d_reward = 0;
    int d_policy = 0;
    double radius_F = 1.0;
    double radius_B = 1.0;
    int n_examples = 0;
};

/// Cross product over rho values: each cell trains at its rho, then
/// evaluates at the same rho, in its own subdirectory.
struct SweepConfig {
    std::vector<double> rhos;
    std::string trainer; ///< "reward" | "policy" | "dpo"
    std::filesystem::path env_path;
    std::filesystem::path data_path;
    std::filesystem::path reward_path; ///< required for the policy trainer
    std::filesystem::path out_dir;
    RewardTrainConfig reward_cfg;
    PolicyTrainConfig policy_cfg;
    DpoTrainConfig dpo_cfg;
};

/**
 * Top-level experiment config: schema "dro-pref/config/v1", a global
 * seed, and exactly one command record. Unknown keys anywhere are
 * rejected. Trainer radii omitted in the file are left at 0 and
 * resolved against the environment by the CLI; eta omitted or "auto"
 * resolves to each trainer's default schedule.
 */
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::optional<GenConfig> gen;
    std::optional<RewardTrainConfig> train_reward;
    std::optional<PolicyTrainConfig> train_policy;
    std::optional<DpoTrainConfig> train_dpo;
    std::optional<SweepConfig> sweep;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

} // namespace dropref
