#pragma once

// Replicate-addressable random streams.
//
// Every stream is a std::mt19937_64 seeded with stream_seed(seed, index),
// where stream_seed applies the SplitMix64 finalizer to
// seed + 0x9E3779B97F4A7C15 * (index + 1). Streams depend only on
// (seed, index), so replicates can run on any worker in any order.
// Uniforms take the top 53 bits of one 64-bit draw; normals are the
// inverse normal CDF of a uniform, so no library distribution object
// (whose output is implementation-defined) is involved.

#include <cstdint>
#include <random>

#include "sab/distributions.hpp"

namespace sab {

inline constexpr const char* kRngAlgorithm = "mt19937_64/splitmix64-streams";

constexpr std::uint64_t splitmix64_mix(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index)
{
    return splitmix64_mix(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
}

class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t index) : engine_(stream_seed(seed, index)) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, lo + width).
    double uniform(double lo, double width) { return lo + width * uniform(); }

    /// Standard normal via the quantile of a uniform on (0, 1).
    double normal()
    {
        const double u = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
        return normal_quantile(u);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace sab
