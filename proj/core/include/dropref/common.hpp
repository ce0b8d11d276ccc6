// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dropref {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Base class for all errors raised by the library. The CLI maps the
/// concrete subtypes to distinct process exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration / input files (exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

/// A dataset or model references an environment with a different
/// content digest than the one supplied (exit code 3).
struct DigestMismatchError : Error {
    using Error::Error;
};

/// A numerical routine failed to converge or met degenerate geometry
/// (exit code 4).
struct NumericalError : Error {
    using Error::Error;
};

/// Caller violated an API contract (bad dimensions, non-symmetric
/// matrix where a symmetric one is required, ...).
struct ContractError : Error {
    using Error::Error;
};

} // namespace dropref
