#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rbsde {

using Vec = std::vector<double>;

/// Bad user input: dimensions, schedules, spec fields.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values or otherwise broken state produced while simulating.
struct SimulationError : std::runtime_error {
    explicit SimulationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Explicit-scheme stiffness guard (penalty weight times step size too large).
struct StabilityError : std::runtime_error {
    explicit StabilityError(const std::string& msg) : std::runtime_error(msg) {}
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

}  // namespace rbsde
