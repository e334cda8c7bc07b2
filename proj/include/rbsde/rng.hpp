#pragma once

#include <cmath>
#include <cstdint>

#include "rbsde/common.hpp"

namespace rbsde {

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream, counter), so any subset of paths can be regenerated
// independently and results do not depend on generation order.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// One independent stream keyed by (seed, stream id). Stateless: draw(i)
/// is reproducible for any counter i.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(detail::splitmix64(seed ^ detail::splitmix64(stream ^ 0x5851f42d4c957f2dULL))) {}

    /// Uniform in (0, 1), never exactly 0.
    double uniform(std::uint64_t counter) const {
        const std::uint64_t u = detail::splitmix64(key_ + counter * 0x2545f4914f6cdd1dULL);
        return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller on counters (2i, 2i+1).
    double normal(std::uint64_t counter) const {
        const double u1 = uniform(2 * counter);
        const double u2 = uniform(2 * counter + 1);
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

private:
    std::uint64_t key_;
};

}  // namespace rbsde
