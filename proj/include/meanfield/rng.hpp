#pragma once

// Counter-based Gaussian streams. Each stream is keyed by a tuple of 64-bit
// identifiers (seed, repeat, player, ...); draws are pure functions of
// (key, counter), so results do not depend on call order or thread scheduling.

#include <cmath>
#include <cstdint>

#include "meanfield/math_util.hpp"

namespace meanfield {

// SplitMix64 finalizer; full-period bijective mixer on 64 bits.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
    std::uint64_t k = mix64(seed);
    k = mix64(k ^ mix64(a ^ 0xA24BAED4963EE407ULL));
    k = mix64(k ^ mix64(b ^ 0x9FB21C651E98DF25ULL));
    k = mix64(k ^ mix64(c ^ 0xD6E8FEB86659FD93ULL));
    return k;
}

// Uniform in (0,1), never exactly 0 or 1.
inline double counter_uniform(std::uint64_t key, std::uint64_t counter) {
    const std::uint64_t bits = mix64(key ^ mix64(counter + 0x632BE59BD9B4E019ULL));
    return (static_cast<double>(bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Standard normal draw number `counter` of the stream `key` (Box-Muller).
inline double counter_gaussian(std::uint64_t key, std::uint64_t counter) {
    const double u1 = counter_uniform(key, 2 * counter);
    const double u2 = counter_uniform(key, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

}  // namespace meanfield
