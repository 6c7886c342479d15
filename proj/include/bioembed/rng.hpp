#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bioembed {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Independent generator stream for a (seed, key, counter) triple, e.g.
// (run seed, recording id, epoch) or (run seed, "batch", step).
inline Rng stream(std::uint64_t seed, std::string_view key, std::uint64_t counter = 0) {
    std::uint64_t s = splitmix64(seed ^ splitmix64(fnv1a64(key)));
    s = splitmix64(s ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
    return Rng(s);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace bioembed
