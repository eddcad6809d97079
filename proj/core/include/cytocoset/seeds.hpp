#ifndef CYTOCOSET_SEEDS_HPP
#define CYTOCOSET_SEEDS_HPP

#include <cstdint>

namespace cytocoset {

/**
 * Purposes for which independent random streams are derived from one base seed.
 * The numeric values are part of the reproducibility contract, so never renumber.
 */
enum class SeedPurpose : std::uint64_t {
    Split = 1,
    Projection = 2,
    Init = 3,
    Batch = 4,
    Instance = 5,
    Partner = 6,
    Evaluation = 7,
    Pairs = 8,
    Synth = 9,
    Covariate = 10,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/**
 * Derive a child seed as `mix64(mix64(mix64(base) ^ purpose) ^ index)`.
 * Distinct (purpose, index) pairs give statistically independent streams.
 */
constexpr std::uint64_t derive_seed(std::uint64_t base, SeedPurpose purpose, std::uint64_t index = 0) {
    return mix64(mix64(mix64(base) ^ static_cast<std::uint64_t>(purpose)) ^ index);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return mix64(mix64(base) ^ index);
}

}

#endif
