// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dropref/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dropref {

/// One training iteration. Columns that do not apply to a trainer are
/// NaN (the NPG-only diagnostics stay NaN for the SGD trainers, and the
/// potential requires a precomputed oracle-optimal policy).
struct TrainRow {
    int iter = 0;
    double robust_minibatch_loss = 0.0;
    double uniform_minibatch_loss = 0.0;
    double grad_norm = 0.0;
    double mass_moved = 0.0;
    double potential = 0.0;
    double min_eig_above_cutoff = 0.0;
    double compat_loss = 0.0;
    double wallclock_ms = 0.0;
};

struct TrainReport {
    std::string config_digest;
    std::string build_id;
    std::vector<TrainRow> rows;

    /// Row count == iterations, iter strictly increasing from 1.
    void validate() const;
};

/// Version/build identifier embedded in report headers.
std::string build_id();

/// CSV with `# key: value` header lines followed by a fixed column set;
/// floats are written with 17 significant digits so a round-trip is
/// bit exact.
void write_train_report_csv(const std::filesystem::path& path, const TrainReport& report);
TrainReport read_train_report_csv(const std::filesystem::path& path);

} // namespace dropref
