#pragma once

#include <cstdint>
#include <random>

namespace brokerage {

// Stream identifiers used to split one run seed into independent generators.
enum class Stream : std::uint64_t {
    instance = 1,
    valuations = 2,
    policy = 3,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based split: the seed for `stream` is a pure function of
// (seed, stream), so replicates never share state.
inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream) {
    return splitmix64(splitmix64(seed) ^ (static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL));
}

// Thin wrapper over mt19937_64. Uniforms are built from the top 53 bits
// directly so draws are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace brokerage
