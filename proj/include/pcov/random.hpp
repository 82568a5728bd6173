#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pcov {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Hash of a seed and a path of stream identifiers. Distinct paths give
/// unrelated values; the result does not depend on scheduling.
std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) noexcept;

/// Generator for the stream identified by (seed, ids...).
Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids);

/// Rademacher sign for block k of one draw. Signs for blocks 64c .. 64c+63
/// come from the bits of a single hash of (key, draw, c).
inline int rademacher_sign(std::uint64_t key, std::uint64_t draw, std::uint64_t k) noexcept {
    const std::uint64_t word = stream_key(key, {draw, k / 64});
    return ((word >> (k % 64)) & 1u) ? 1 : -1;
}

}  // namespace pcov
