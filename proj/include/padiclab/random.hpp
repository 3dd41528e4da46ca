#pragma once

#include <cstdint>
#include <random>

namespace padiclab {

/// Independent, reproducible stream number `stream` of a run seeded by `seed`:
/// the pair is mixed by splitmix64 before seeding mt19937_64.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

/// Uniform on [0, 1) from the top 53 bits; identical on every platform.
double uniform01(std::mt19937_64& rng);

/// Uniform on {0, ..., bound - 1} by rejection; bound > 0.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

}  // namespace padiclab
