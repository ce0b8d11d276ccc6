// Copyright (c) 2026 dro-pref developers
// SPDX-License-Identifier: Apache-2.0

#include "dropref/digest.hpp"

#include <cstring>

namespace dropref {

Digest& Digest::bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        hash_ ^= p[i];
        hash_ *= 0x100000001b3ULL;
    }
    return *this;
}

Digest& Digest::u64(std::uint64_t value) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(value >> (8 * i));
    return bytes(buf, sizeof buf);
}

Digest& Digest::i64(std::int64_t value) { return u64(static_cast<std::uint64_t>(value)); }

Digest& Digest::f64(double value) {
    std::uint64_t bits;
    static_assert(sizeof bits == sizeof value);
    std::memcpy(&bits, &value, sizeof bits);
    return u64(bits);
}

Digest& Digest::vec(const VecX& v) {
    i64(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
    return *this;
}

Digest& Digest::mat(const MatX& m) {
    i64(m.rows());
    i64(m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    return *this;
}

Digest& Digest::str(std::string_view s) {
    u64(s.size());
    return bytes(s.data(), s.size());
}

std::string Digest::hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = hash_;
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

} // namespace dropref
