// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dropref/env.hpp"
#include "dropref/eval.hpp"
#include "dropref/losses.hpp"

#include <filesystem>
#include <limits>
#include <string>

namespace dropref {

// All structured artifacts are versioned JSON. Writers emit a fixed key
// order and floats with 17 significant digits, so outputs are
// deterministic bytes and round-trips are exact. Parse failures raise
// ConfigError without leaving partial objects behind.

void save_env(const std::filesystem::path& path, const FeatureEnv& env);
FeatureEnv load_env(const std::filesystem::path& path);

void save_dataset(const std::filesystem::path& path, const PreferenceDataset& dataset);
/// Load without digest validation.
PreferenceDataset load_dataset(const std::filesystem::path& path);
/// Load and require that the dataset was generated against `env`.
PreferenceDataset load_dataset(const std::filesystem::path& path, const FeatureEnv& env);

/// Serialized parameter vector (reward or policy) with provenance.
struct ModelFile {
    std::string kind;        ///< "reward" | "policy"
    std::string trained_by;  ///< "reward-sgd" | "npg" | "dpo" | "oracle"
    std::string env_digest;
    double radius = 1.0;
    VecX params;
    double beta = std::numeric_limits<double>::quiet_NaN();         ///< policy models
    double reward_shift = std::numeric_limits<double>::quiet_NaN(); ///< npg models

    RewardParams as_reward() const;
    PolicyParams as_policy() const;
};

void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

void save_eval(const std::filesystem::path& path, const EvalReport& report,
               Divergence kind, Sense sense);

void save_bias(const std::filesystem::path& path, const BiasCheckResult& result);

void save_oracle(const std::filesystem::path& path, const std::string& target,
                 const OracleResult& result, double rho, Divergence kind);

std::string divergence_name(Divergence kind);
Divergence parse_divergence(const std::string& name);

} // namespace dropref
