// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dropref/common.hpp"

#include <cassert>
#include <cmath>
#include <cstdint>

namespace dropref {

/// splitmix64 step; used to derive independent per-phase streams from a
/// user seed so that, e.g., changing the iteration count of a trainer
/// does not perturb data generation.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Named RNG phases. Each logical phase of a run draws from its own
/// stream derived as derive_seed(seed, phase).
enum class RngPhase : std::uint64_t {
    EnvFeatures = 1,
    EnvRewardParams = 2,
    EnvSourceDist = 3,
    DatasetSampling = 4,
    MinibatchSampling = 5,
    CompletionSampling = 6,
    OracleStarts = 7,
    BiasTrials = 8,
    WarmupSampling = 9,
};

inline std::uint64_t derive_seed(std::uint64_t seed, RngPhase phase) {
    return splitmix64(seed ^ (0x51d711c1a4e9b3efULL * static_cast<std::uint64_t>(phase)));
}

/// Deterministic pseudo-random stream (xoshiro256**). All sampling is
/// implemented directly on top of the raw 64-bit output so results are
/// bit-identical across standard libraries; std::*_distribution is
/// implementation-defined and must not be used anywhere in the library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // seed expansion via splitmix64, as recommended for xoshiro
        std::uint64_t x = seed;
        for (auto& word : state_) {
            x = splitmix64(x);
            word = x;
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double uniform01_open_left() { return 1.0 - uniform01(); }

    /// Uniform integer in [0, n). Rejection sampling keeps it exactly uniform.
    std::uint64_t uniform_int(std::uint64_t n) {
        assert(n > 0);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t draw;
        do {
            draw = next_u64();
        } while (draw >= limit);
        return draw % n;
    }

    /// Standard normal via Box-Muller (deterministic, one value per call).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01_open_left();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Exponential(1) draw.
    double exponential() { return -std::log(uniform01_open_left()); }

    /// Index draw from a probability vector by CDF inversion.
    Eigen::Index categorical(const VecX& probs) {
        const double u = uniform01();
        double cum = 0.0;
        for (Eigen::Index i = 0; i < probs.size(); ++i) {
            cum += probs[i];
            if (u < cum) return i;
        }
        return probs.size() - 1; // numerical slack: cum may end below 1
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4] = {};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace dropref
