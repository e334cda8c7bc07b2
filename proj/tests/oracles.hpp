#pragma once

// Independent reference implementations used only by the tests. Nothing here
// shares code with the library solvers.

#include <algorithm>
#include <cmath>
#include <vector>

#include "rbsde/pathsim.hpp"

namespace oracles {

/// Cox-Ross-Rubinstein American put in price space: risk-neutral up/down
/// factors exp(+-vol*sqrt(dt)) and discounted backward induction with early
/// exercise. Completely independent of the library's lattice (which works on
/// the log-state with symmetric 1/2 probabilities and a -r*y driver).
inline double crr_american_put(double s0, double strike, double r, double vol, double T, int n) {
    const double dt = T / n;
    const double u = std::exp(vol * std::sqrt(dt)), d = 1.0 / u;
    const double disc = std::exp(-r * dt);
    const double p = (std::exp(r * dt) - d) / (u - d);
    std::vector<double> v(n + 1);
    for (int j = 0; j <= n; ++j)
        v[j] = std::max(strike - s0 * std::pow(u, 2.0 * j - n), 0.0);
    for (int i = n - 1; i >= 0; --i)
        for (int j = 0; j <= i; ++j) {
            const double s = s0 * std::pow(u, 2.0 * j - i);
            v[j] = std::max(strike - s, disc * (p * v[j + 1] + (1.0 - p) * v[j]));
        }
    return v[0];
}

/// Re-scan of the first-passage index of eta + q.(X - x) <= L, written as a
/// direct per-path loop (no early-exit bookkeeping).
inline std::vector<std::size_t> brute_force_hitting(const rbsde::PathBundle& b, double eta,
                                                    const rbsde::Vec& q,
                                                    const rbsde::ObstacleSpec& obs) {
    const std::size_t n_steps = b.grid.n_steps();
    std::vector<std::size_t> tau(b.n_paths, n_steps);
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        for (std::size_t i = b.origin_idx + 1; i < n_steps; ++i) {
            double v = eta;
            rbsde::Vec x(b.n);
            for (int c = 0; c < b.n; ++c) {
                x[c] = b.x_at(p, i, c);
                v += q[c] * (x[c] - b.origin_x[c]);
            }
            if (v <= obs(b.grid.node(i), x)) {
                tau[p] = i;
                break;
            }
        }
    }
    return tau;
}

}  // namespace oracles
