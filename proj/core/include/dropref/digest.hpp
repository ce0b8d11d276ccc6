// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dropref/common.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace dropref {

/// Incremental FNV-1a (64-bit) over raw bytes. Doubles are hashed by
/// their IEEE-754 bit pattern, so a digest pins content exactly.
class Digest {
public:
    Digest& bytes(const void* data, std::size_t len);
    Digest& u64(std::uint64_t value);
    Digest& i64(std::int64_t value);
    Digest& f64(double value);
    Digest& vec(const VecX& v);
    Digest& mat(const MatX& m);
    Digest& str(std::string_view s);

    std::uint64_t value() const { return hash_; }
    /// 16-char lowercase hex of value().
    std::string hex() const;

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

} // namespace dropref
