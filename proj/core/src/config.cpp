// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#include "dropref/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace dropref {

namespace {

using nlohmann::json;

json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("parse error in " + path.string() + ": " + e.what());
    }
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* k) { return key == k; }) == allowed.end())
            throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <typename T>
T required(const json& obj, const char* name, const std::string& where) {
    if (!obj.contains(name)) throw ConfigError(where + ": missing key '" + name + "'");
    try {
        return obj[name].get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + ": bad value for '" + name + "': " + e.what());
    }
}

template <typename T>
T optional(const json& obj, const char* name, T fallback, const std::string& where) {
    if (!obj.contains(name)) return fallback;
    try {
        return obj[name].get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + ": bad value for '" + name + "': " + e.what());
    }
}

/// "auto" or a positive number; auto maps to 0 (trainer default).
double parse_eta(const json& obj, const std::string& where) {
    if (!obj.contains("eta")) return 0.0;
    const json& eta = obj["eta"];
    if (eta.is_string()) {
        if (eta.get<std::string>() == "auto") return 0.0;
        throw ConfigError(where + ": eta must be a number or \"auto\"");
    }
    const double value = eta.get<double>();
    if (value <= 0.0) throw ConfigError(where + ": eta must be positive");
    return value;
}

Divergence parse_divergence_key(const json& obj, const std::string& where) {
    const auto name = optional<std::string>(obj, "divergence", "tv", where);
    if (name == "tv") return Divergence::TV;
    if (name == "chi2") return Divergence::ChiSq;
    throw ConfigError(where + ": divergence must be 'tv' or 'chi2'");
}

OutputMode parse_output_mode(const json& obj, const std::string& where) {
    const auto name = optional<std::string>(obj, "output", "average", where);
    if (name == "average") return OutputMode::Average;
    if (name == "last") return OutputMode::Last;
    if (name == "best") return OutputMode::BestRobustMinibatchLoss;
    throw ConfigError(where + ": output must be 'average', 'last' or 'best'");
}

GenConfig parse_gen(const json& obj) {
    const std::string where = "gen";
    reject_unknown_keys(obj,
                        {"num_prompts", "num_completions", "d_reward", "d_policy", "F", "B",
                         "n_examples"},
                        where);
    GenConfig cfg;
    cfg.num_prompts = required<int>(obj, "num_prompts", where);
    cfg.num_completions = required<int>(obj, "num_completions", where);
    cfg.d_reward = required<int>(obj, "d_reward", where);
    cfg.d_policy = required<int>(obj, "d_policy", where);
    cfg.radius_F = optional<double>(obj, "F", 1.0, where);
    cfg.radius_B = optional<double>(obj, "B", 1.0, where);
    cfg.n_examples = required<int>(obj, "n_examples", where);
    return cfg;
}

RewardTrainConfig parse_train_reward(const json& obj, std::uint64_t seed) {
    const std::string where = "train_reward";
    reject_unknown_keys(obj, {"T", "n", "eta", "rho", "divergence", "F", "q_floor", "output"},
                        where);
    RewardTrainConfig cfg;
    cfg.iterations = required<int>(obj, "T", where);
    cfg.minibatch = required<int>(obj, "n", where);
    cfg.eta = parse_eta(obj, where);
    cfg.rho = required<double>(obj, "rho", where);
    cfg.divergence = parse_divergence_key(obj, where);
    cfg.radius_F = optional<double>(obj, "F", 0.0, where); // 0 = take the env radius
    cfg.q_floor = optional<double>(obj, "q_floor", 0.0, where);
    cfg.output = parse_output_mode(obj, where);
    cfg.seed = seed;
    return cfg;
}

PolicyTrainConfig parse_train_policy(const json& obj, std::uint64_t seed) {
    const std::string where = "train_policy";
    reject_unknown_keys(obj,
                        {"T", "n", "eta", "rho", "divergence", "beta", "B", "mode", "q_floor",
                         "pinv_rel_tol", "reward_shift", "warmup_batches"},
                        where);
    PolicyTrainConfig cfg;
    cfg.iterations = required<int>(obj, "T", where);
    cfg.minibatch = required<int>(obj, "n", where);
    cfg.eta = parse_eta(obj, where);
    cfg.rho = required<double>(obj, "rho", where);
    cfg.divergence = parse_divergence_key(obj, where);
    cfg.beta = required<double>(obj, "beta", where);
    cfg.radius_B = optional<double>(obj, "B", 0.0, where);
    const auto mode = optional<std::string>(obj, "mode", "exact", where);
    if (mode == "exact") cfg.mode = PolicyMode::ExactExpectation;
    else if (mode == "sampled") cfg.mode = PolicyMode::SampledCompletion;
    else throw ConfigError(where + ": mode must be 'exact' or 'sampled'");
    cfg.q_floor = optional<double>(obj, "q_floor", 0.0, where);
    cfg.pinv_rel_tol = optional<double>(obj, "pinv_rel_tol", 1e-10, where);
    if (obj.contains("reward_shift")) {
        const json& shift = obj["reward_shift"];
        if (shift.is_string()) {
            if (shift.get<std::string>() != "F")
                throw ConfigError(where + ": reward_shift must be a number or \"F\"");
            // NaN sentinel: resolved to the reward radius at train time
        } else {
            cfg.reward_shift = shift.get<double>();
        }
    }
    cfg.warmup_batches = optional<int>(obj, "warmup_batches", 8, where);
    cfg.seed = seed;
    return cfg;
}

DpoTrainConfig parse_train_dpo(const json& obj, std::uint64_t seed) {
    const std::string where = "train_dpo";
    reject_unknown_keys(obj,
                        {"T", "n", "eta", "rho", "divergence", "beta", "B", "q_floor", "output"},
                        where);
    DpoTrainConfig cfg;
    cfg.iterations = required<int>(obj, "T", where);
    cfg.minibatch = required<int>(obj, "n", where);
    cfg.eta = parse_eta(obj, where);
    cfg.rho = required<double>(obj, "rho", where);
    cfg.divergence = parse_divergence_key(obj, where);
    cfg.beta = required<double>(obj, "beta", where);
    cfg.radius_B = optional<double>(obj, "B", 0.0, where);
    cfg.q_floor = optional<double>(obj, "q_floor", 0.0, where);
    cfg.output = parse_output_mode(obj, where);
    cfg.seed = seed;
    return cfg;
}

SweepConfig parse_sweep(const json& obj, std::uint64_t seed) {
    const std::string where = "sweep";
    reject_unknown_keys(obj, {"rhos", "trainer", "env", "data", "reward", "out_dir", "train"},
                        where);
    SweepConfig cfg;
    cfg.rhos = required<std::vector<double>>(obj, "rhos", where);
    if (cfg.rhos.empty()) throw ConfigError(where + ": rhos must be nonempty");
    cfg.trainer = required<std::string>(obj, "trainer", where);
    if (cfg.trainer != "reward" && cfg.trainer != "policy" && cfg.trainer != "dpo")
        throw ConfigError(where + ": trainer must be 'reward', 'policy' or 'dpo'");
    cfg.env_path = required<std::string>(obj, "env", where);
    cfg.data_path = required<std::string>(obj, "data", where);
    cfg.reward_path = optional<std::string>(obj, "reward", "", where);
    if (cfg.trainer == "policy" && cfg.reward_path.empty())
        throw ConfigError(where + ": the policy trainer needs a 'reward' model path");
    cfg.out_dir = required<std::string>(obj, "out_dir", where);
    if (!obj.contains("train") || !obj["train"].is_object())
        throw ConfigError(where + ": missing 'train' object");
    // per-cell rho overrides whatever the nested config carries
    json train = obj["train"];
    train["rho"] = 0.0;
    if (cfg.trainer == "reward") cfg.reward_cfg = parse_train_reward(train, seed);
    else if (cfg.trainer == "policy") cfg.policy_cfg = parse_train_policy(train, seed);
    else cfg.dpo_cfg = parse_train_dpo(train, seed);
    return cfg;
}

} // namespace

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    const json doc = parse_file(path);
    if (!doc.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");
    reject_unknown_keys(
        doc, {"schema", "seed", "gen", "train_reward", "train_policy", "train_dpo", "sweep"},
        path.string());
    if (!doc.contains("schema") || !doc["schema"].is_string() ||
        doc["schema"].get<std::string>() != "dro-pref/config/v1")
        throw ConfigError(path.string() + ": schema must be \"dro-pref/config/v1\"");

    ExperimentConfig cfg;
    cfg.seed = optional<std::uint64_t>(doc, "seed", 0, path.string());

    int commands = 0;
    if (doc.contains("gen")) {
        cfg.gen = parse_gen(doc["gen"]);
        ++commands;
    }
    if (doc.contains("train_reward")) {
        cfg.train_reward = parse_train_reward(doc["train_reward"], cfg.seed);
        ++commands;
    }
    if (doc.contains("train_policy")) {
        cfg.train_policy = parse_train_policy(doc["train_policy"], cfg.seed);
        ++commands;
    }
    if (doc.contains("train_dpo")) {
        cfg.train_dpo = parse_train_dpo(doc["train_dpo"], cfg.seed);
        ++commands;
    }
    if (doc.contains("sweep")) {
        cfg.sweep = parse_sweep(doc["sweep"], cfg.seed);
        ++commands;
    }
    if (commands != 1)
        throw ConfigError(path.string() +
                          ": exactly one of gen/train_reward/train_policy/train_dpo/sweep "
                          "must be present");
    return cfg;
}

} // namespace dropref
