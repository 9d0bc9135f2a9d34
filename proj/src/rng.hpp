#pragma once
// Seeded, purpose-keyed RNG streams so independent sampling concerns
// (init, batching, interpolation, ...) never perturb each other.

#include <cstdint>
#include <random>
#include <string_view>

namespace wdtl {

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::mt19937_64 make_rng(uint64_t seed, std::string_view purpose) {
    std::seed_seq seq{seed, fnv1a64(purpose)};
    return std::mt19937_64(seq);
}

} // namespace wdtl
