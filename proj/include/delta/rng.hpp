#pragma once

#include <cstdint>
#include <cmath>

namespace delta {

// Counter-based deterministic random numbers. Every draw is a pure function
// of (seed, stream, counter), so masks and initializations are bitwise
// reproducible regardless of call order elsewhere.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return splitmix64(splitmix64(seed ^ 0x6a09e667f3bcc909ULL) ^ splitmix64(stream) ^ counter * 0x9e3779b97f4a7c15ULL);
}

// Uniform double in [0, 1).
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return static_cast<double>(mix(seed, stream, counter) >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; each counter yields one deviate.
inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    double u1 = uniform(seed, stream, counter * 2);
    double u2 = uniform(seed, stream, counter * 2 + 1);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Stateful convenience wrapper for sequential draws from one stream.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    double uniform() { return rng::uniform(seed_, stream_, counter_++); }
    double normal() { return rng::normal(seed_, stream_, counter_++); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return mix(seed_, stream_, counter_++) % n; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

} // namespace rng
} // namespace delta
