#pragma once

#include <cstdint>
#include <random>

namespace expstop {

/// Independent random sources attached to one simulated path.
enum class Stream : std::uint64_t {
    signal = 0,     ///< Brownian increments of the OU signal
    entry = 1,      ///< entry seed E^a ~ Exp(1)
    exit = 2,       ///< exit seed E^b ~ Exp(1)
    bernoulli = 3,  ///< per-step regime coin flips
    init = 4,       ///< initial-state randomization
};

std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based split: the seed of (path, stream) depends only on the master seed,
/// the path index and the stream, never on how many paths run or in which order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t path, Stream stream);

struct SeedPack {
    std::uint64_t master_seed = 0;
    std::uint64_t path = 0;

    std::mt19937_64 engine(Stream stream) const { return std::mt19937_64(derive_seed(master_seed, path, stream)); }
    double entry_exponential() const;
    double exit_exponential() const;
};

}  // namespace expstop
