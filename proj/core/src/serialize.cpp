// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#include "dropref/serialize.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dropref {

namespace {

using nlohmann::json;

/// Flat JSON emitter with insertion-ordered keys and %.17g floats.
class JsonWriter {
public:
    JsonWriter& begin_object() { return token("{"); }
    JsonWriter& end_object() {
        separator_ = false;
        out_ << '}';
        separator_ = true;
        return *this;
    }
    JsonWriter& begin_array() { return token("["); }
    JsonWriter& end_array() {
        separator_ = false;
        out_ << ']';
        separator_ = true;
        return *this;
    }

    JsonWriter& key(std::string_view name) {
        comma();
        out_ << '"' << name << "\":";
        separator_ = false;
        return *this;
    }

    JsonWriter& value(double v) {
        comma();
        if (std::isnan(v) || std::isinf(v)) {
            out_ << "null";
        } else {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out_ << buf;
        }
        separator_ = true;
        return *this;
    }
    JsonWriter& value(std::uint64_t v) {
        comma();
        out_ << v;
        separator_ = true;
        return *this;
    }
    JsonWriter& value(int v) {
        comma();
        out_ << v;
        separator_ = true;
        return *this;
    }
    JsonWriter& value(std::string_view v) {
        comma();
        out_ << '"' << v << '"';
        separator_ = true;
        return *this;
    }

    JsonWriter& array(const VecX& v) {
        begin_array();
        for (Eigen::Index i = 0; i < v.size(); ++i) value(v[i]);
        return end_array();
    }
    /// Matrix flattened row-major.
    JsonWriter& array(const MatX& m) {
        begin_array();
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) value(m(r, c));
        return end_array();
    }

    std::string str() const { return out_.str(); }

private:
    JsonWriter& token(std::string_view t) {
        comma();
        out_ << t;
        separator_ = false;
        return *this;
    }
    void comma() {
        if (separator_) out_ << ',';
    }

    std::ostringstream out_;
    bool separator_ = false;
};

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out << contents << '\n';
    if (!out) throw ConfigError("write failed for " + path.string());
}

json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("parse error in " + path.string() + ": " + e.what());
    }
}

void require_schema(const json& doc, const std::string& expected,
                    const std::filesystem::path& path) {
    if (!doc.is_object() || !doc.contains("schema") || !doc["schema"].is_string())
        throw ConfigError(path.string() + ": missing schema field");
    const auto schema = doc["schema"].get<std::string>();
    if (schema != expected)
        throw ConfigError(path.string() + ": expected schema '" + expected + "', found '" +
                          schema + "'");
}

template <typename T>
T field(const json& doc, const char* name, const std::filesystem::path& path) {
    if (!doc.contains(name))
        throw ConfigError(path.string() + ": missing field '" + name + "'");
    try {
        return doc[name].get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": bad field '" + name + "': " + e.what());
    }
}

VecX vec_field(const json& doc, const char* name, const std::filesystem::path& path) {
    const auto values = field<std::vector<double>>(doc, name, path);
    return Eigen::Map<const VecX>(values.data(), static_cast<Eigen::Index>(values.size()));
}

MatX mat_field(const json& doc, const char* name, Eigen::Index rows, Eigen::Index cols,
               const std::filesystem::path& path) {
    const auto values = field<std::vector<double>>(doc, name, path);
    if (static_cast<Eigen::Index>(values.size()) != rows * cols)
        throw ConfigError(path.string() + ": field '" + name + "' has wrong length");
    MatX m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
    return m;
}

double optional_double(const json& doc, const char* name, double fallback) {
    if (!doc.contains(name) || doc[name].is_null()) return fallback;
    return doc[name].get<double>();
}

} // namespace

void save_env(const std::filesystem::path& path, const FeatureEnv& env) {
    env.validate();
    JsonWriter w;
    w.begin_object();
    w.key("schema").value("dro-pref/env/v1");
    w.key("num_prompts").value(env.num_prompts);
    w.key("num_completions").value(env.num_completions);
    w.key("d_reward").value(env.d_reward);
    w.key("d_policy").value(env.d_policy);
    w.key("radius_F").value(env.radius_F);
    w.key("radius_B").value(env.radius_B);
    w.key("reward_features").array(env.reward_features);
    w.key("policy_features").array(env.policy_features);
    w.key("true_reward_params").array(env.true_reward_params);
    w.key("ref_policy_params").array(env.ref_policy_params);
    w.key("source_dist").array(env.source_dist);
    w.end_object();
    write_file(path, w.str());
}

FeatureEnv load_env(const std::filesystem::path& path) {
    const json doc = parse_file(path);
    require_schema(doc, "dro-pref/env/v1", path);

    FeatureEnv env;
    env.num_prompts = field<int>(doc, "num_prompts", path);
    env.num_completions = field<int>(doc, "num_completions", path);
    env.d_reward = field<int>(doc, "d_reward", path);
    env.d_policy = field<int>(doc, "d_policy", path);
    env.radius_F = field<double>(doc, "radius_F", path);
    env.radius_B = field<double>(doc, "radius_B", path);
    if (env.num_prompts < 1 || env.num_completions < 1 || env.d_reward < 1 || env.d_policy < 1)
        throw ConfigError(path.string() + ": invalid dimensions");

    const Eigen::Index pairs = static_cast<Eigen::Index>(env.num_prompts) * env.num_completions;
    env.reward_features = mat_field(doc, "reward_features", pairs, env.d_reward, path);
    env.policy_features = mat_field(doc, "policy_features", pairs, env.d_policy, path);
    env.true_reward_params = vec_field(doc, "true_reward_params", path);
    env.ref_policy_params = vec_field(doc, "ref_policy_params", path);
    env.source_dist = vec_field(doc, "source_dist", path);
    env.validate();
    return env;
}

void save_dataset(const std::filesystem::path& path, const PreferenceDataset& dataset) {
    JsonWriter w;
    w.begin_object();
    w.key("schema").value("dro-pref/dataset/v1");
    w.key("seed").value(dataset.seed);
    w.key("env_digest").value(dataset.env_digest);
    w.key("examples").begin_array();
    for (const PreferenceExample& ex : dataset.examples) {
        w.begin_array();
        w.value(ex.prompt).value(ex.y_plus).value(ex.y_minus);
        w.end_array();
    }
    w.end_array();
    w.end_object();
    write_file(path, w.str());
}

PreferenceDataset load_dataset(const std::filesystem::path& path) {
    const json doc = parse_file(path);
    require_schema(doc, "dro-pref/dataset/v1", path);

    PreferenceDataset dataset;
    dataset.seed = field<std::uint64_t>(doc, "seed", path);
    dataset.env_digest = field<std::string>(doc, "env_digest", path);
    if (!doc.contains("examples") || !doc["examples"].is_array())
        throw ConfigError(path.string() + ": missing examples array");
    for (const auto& entry : doc["examples"]) {
        if (!entry.is_array() || entry.size() != 3)
            throw ConfigError(path.string() + ": each example must be [x, y_plus, y_minus]");
        PreferenceExample ex{entry[0].get<int>(), entry[1].get<int>(), entry[2].get<int>()};
        if (ex.y_plus == ex.y_minus)
            throw ConfigError(path.string() + ": example with y_plus == y_minus");
        dataset.examples.push_back(ex);
    }
    if (dataset.examples.empty()) throw ConfigError(path.string() + ": dataset is empty");
    return dataset;
}

PreferenceDataset load_dataset(const std::filesystem::path& path, const FeatureEnv& env) {
    PreferenceDataset dataset = load_dataset(path);
    require_matching_digest(env, dataset);
    for (const PreferenceExample& ex : dataset.examples) {
        if (ex.prompt < 0 || ex.prompt >= env.num_prompts || ex.y_plus < 0 ||
            ex.y_plus >= env.num_completions || ex.y_minus < 0 ||
            ex.y_minus >= env.num_completions)
            throw ConfigError(path.string() + ": example index out of range for environment");
    }
    return dataset;
}

RewardParams ModelFile::as_reward() const {
    if (kind != "reward") throw ConfigError("model file: expected a reward model, found " + kind);
    return {params, radius};
}

PolicyParams ModelFile::as_policy() const {
    if (kind != "policy") throw ConfigError("model file: expected a policy model, found " + kind);
    return {params, radius};
}

void save_model(const std::filesystem::path& path, const ModelFile& model) {
    JsonWriter w;
    w.begin_object();
    w.key("schema").value("dro-pref/model/v1");
    w.key("kind").value(model.kind);
    w.key("trained_by").value(model.trained_by);
    w.key("env_digest").value(model.env_digest);
    w.key("radius").value(model.radius);
    w.key("params").array(model.params);
    w.key("beta").value(model.beta);
    w.key("reward_shift").value(model.reward_shift);
    w.end_object();
    write_file(path, w.str());
}

ModelFile load_model(const std::filesystem::path& path) {
    const json doc = parse_file(path);
    require_schema(doc, "dro-pref/model/v1", path);

    ModelFile model;
    model.kind = field<std::string>(doc, "kind", path);
    model.trained_by = field<std::string>(doc, "trained_by", path);
    model.env_digest = field<std::string>(doc, "env_digest", path);
    model.radius = field<double>(doc, "radius", path);
    model.params = vec_field(doc, "params", path);
    model.beta = optional_double(doc, "beta", std::numeric_limits<double>::quiet_NaN());
    model.reward_shift =
        optional_double(doc, "reward_shift", std::numeric_limits<double>::quiet_NaN());
    if (model.kind != "reward" && model.kind != "policy")
        throw ConfigError(path.string() + ": kind must be 'reward' or 'policy'");
    return model;
}

void save_eval(const std::filesystem::path& path, const EvalReport& report, Divergence kind,
               Sense sense) {
    JsonWriter w;
    w.begin_object();
    w.key("schema").value("dro-pref/eval/v1");
    w.key("rho").value(report.rho);
    w.key("divergence").value(divergence_name(kind));
    w.key("sense").value(sense == Sense::Max ? "max" : "min");
    w.key("standard_loss").value(report.standard_loss);
    w.key("robust_loss").value(report.robust_loss);
    w.key("worst_dist").array(report.worst_dist);
    w.key("extras").begin_object();
    for (const auto& [name, value] : report.extras) w.key(name).value(value);
    w.end_object();
    w.end_object();
    write_file(path, w.str());
}

void save_bias(const std::filesystem::path& path, const BiasCheckResult& result) {
    JsonWriter w;
    w.begin_object();
    w.key("schema").value("dro-pref/bias/v1");
    w.key("n").value(result.n);
    w.key("rho").value(result.rho);
    w.key("trials").value(result.trials);
    w.key("population_robust").value(result.population_robust);
    w.key("minibatch_mean").value(result.minibatch_mean);
    w.key("minibatch_se").value(result.minibatch_se);
    w.key("bound").value(result.bound);
    w.key("bias").value(result.population_robust - result.minibatch_mean);
    w.end_object();
    write_file(path, w.str());
}

void save_oracle(const std::filesystem::path& path, const std::string& target,
                 const OracleResult& result, double rho, Divergence kind) {
    JsonWriter w;
    w.begin_object();
    w.key("schema").value("dro-pref/oracle/v1");
    w.key("target").value(target);
    w.key("rho").value(rho);
    w.key("divergence").value(divergence_name(kind));
    w.key("objective").value(result.objective);
    w.key("params").array(result.params);
    w.end_object();
    write_file(path, w.str());
}

std::string divergence_name(Divergence kind) {
    return kind == Divergence::TV ? "tv" : "chi2";
}

Divergence parse_divergence(const std::string& name) {
    if (name == "tv") return Divergence::TV;
    if (name == "chi2") return Divergence::ChiSq;
    throw ConfigError("unknown divergence '" + name + "' (expected tv or chi2)");
}

} // namespace dropref
