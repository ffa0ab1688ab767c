#include "expstop/rng.hpp"

namespace expstop {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t path, Stream stream) {
    const std::uint64_t lane = splitmix64(master) ^ splitmix64(path * 8 + static_cast<std::uint64_t>(stream));
    return splitmix64(lane);
}

double SeedPack::entry_exponential() const {
    auto gen = engine(Stream::entry);
    return std::exponential_distribution<double>(1.0)(gen);
}

double SeedPack::exit_exponential() const {
    auto gen = engine(Stream::exit);
    return std::exponential_distribution<double>(1.0)(gen);
}

}  // namespace expstop
