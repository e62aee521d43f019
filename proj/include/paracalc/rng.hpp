#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace paracalc::rng {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Counter-based stream: the value at (seed, stream, index) is independent of call order.
inline std::uint64_t bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    return splitmix64(splitmix64(seed ^ splitmix64(stream)) + index);
}

/// Uniform in (0,1).
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    return (double(bits(seed, stream, index) >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal by Box-Muller on two consecutive counters.
inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    const double u1 = uniform(seed, stream, 2 * index);
    const double u2 = uniform(seed, stream, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double sign(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    return (bits(seed, stream, index) & 1u) ? 1.0 : -1.0;
}

}  // namespace paracalc::rng
