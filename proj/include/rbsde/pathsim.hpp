#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rbsde/common.hpp"
#include "rbsde/rng.hpp"
#include "rbsde/specs.hpp"
#include "rbsde/time_grid.hpp"

namespace rbsde {

/// Brownian increments on a grid, time-major: dW[(i * n_paths + p) * d + k].
struct BrownianIncrements {
    TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 1);
    std::size_t n_paths = 0;
    int d = 1;
    std::uint64_t seed = 0;
    std::vector<double> data;

    double at(std::size_t p, std::size_t i, int k = 0) const {
        return data[(i * n_paths + p) * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)];
    }
};

/// Simulated forward states, time-major: X[(i * n_paths + p) * n + c].
struct PathBundle {
    TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 1);
    std::size_t n_paths = 0;
    int n = 1;
    int d = 1;
    std::size_t origin_idx = 0;
    Vec origin_x;
    std::uint64_t seed = 0;
    std::vector<double> X;
    std::vector<double> dW;   // same layout as BrownianIncrements::data

    double x_at(std::size_t p, std::size_t i, int c = 0) const {
        return X[(i * n_paths + p) * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)];
    }
    double dw_at(std::size_t p, std::size_t i, int k = 0) const {
        return dW[(i * n_paths + p) * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)];
    }
    Vec state(std::size_t p, std::size_t i) const {
        Vec x(n);
        for (int c = 0; c < n; ++c) x[c] = x_at(p, i, c);
        return x;
    }
};

/// Normal(0, dt_i) increments. Each path draws from its own counter-based
/// stream keyed by (seed, path), so any subset of paths regenerates
/// identically regardless of n_paths or ordering.
inline BrownianIncrements simulate_brownian(const TimeGrid& grid, std::size_t n_paths, int d,
                                            std::uint64_t seed) {
    require(n_paths >= 1, "simulate_brownian: need n_paths >= 1");
    require(d >= 1, "simulate_brownian: need d >= 1");
    BrownianIncrements inc;
    inc.grid = grid;
    inc.n_paths = n_paths;
    inc.d = d;
    inc.seed = seed;
    const std::size_t n_steps = grid.n_steps();
    inc.data.resize(n_steps * n_paths * static_cast<std::size_t>(d));
    std::vector<double> sqdt(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) sqdt[i] = std::sqrt(grid.dt(i));
    for (std::size_t p = 0; p < n_paths; ++p) {
        CounterRng rng(seed, p);
        for (std::size_t i = 0; i < n_steps; ++i)
            for (int k = 0; k < d; ++k)
                inc.data[(i * n_paths + p) * d + k] =
                    sqdt[i] * rng.normal(i * static_cast<std::size_t>(d) + k);
    }
    return inc;
}

/// Euler-Maruyama forward simulation of X^{t,x}. Nodes at or before the
/// origin carry x; the origin time is clamped to the nearest grid node.
inline PathBundle euler_maruyama(const SDECoeffs& coeffs, double origin_t, const Vec& origin_x,
                                 BrownianIncrements inc) {
    require(static_cast<int>(origin_x.size()) == coeffs.n, "euler_maruyama: origin dim mismatch");
    PathBundle b;
    b.grid = inc.grid;
    b.n_paths = inc.n_paths;
    b.n = coeffs.n;
    b.d = coeffs.d;
    b.origin_idx = inc.grid.nearest_index(origin_t);
    b.origin_x = origin_x;
    b.seed = inc.seed;
    const std::size_t n_steps = inc.grid.n_steps();
    const std::size_t n_paths = inc.n_paths;
    const int n = coeffs.n, d = coeffs.d;
    b.X.resize((n_steps + 1) * n_paths * static_cast<std::size_t>(n));

    for (std::size_t i = 0; i <= b.origin_idx; ++i)
        for (std::size_t p = 0; p < n_paths; ++p)
            for (int c = 0; c < n; ++c)
                b.X[(i * n_paths + p) * n + c] = origin_x[c];

    Vec x(n);
    for (std::size_t i = b.origin_idx; i < n_steps; ++i) {
        const double t = inc.grid.node(i);
        const double dt = inc.grid.dt(i);
        for (std::size_t p = 0; p < n_paths; ++p) {
            for (int c = 0; c < n; ++c) x[c] = b.X[(i * n_paths + p) * n + c];
            const Vec bv = coeffs.drift(t, x);
            const Vec sv = coeffs.diffusion(t, x);
            for (int c = 0; c < n; ++c) {
                double next = x[c] + bv[c] * dt;
                for (int k = 0; k < d; ++k)
                    next += sv[c * d + k] * inc.data[(i * n_paths + p) * d + k];
                if (!std::isfinite(next))
                    throw SimulationError("euler_maruyama: non-finite state at node " +
                                          std::to_string(i + 1) + ", path " + std::to_string(p));
                b.X[((i + 1) * n_paths + p) * n + c] = next;
            }
        }
    }
    b.dW = std::move(inc.data);
    return b;
}

/// First grid node after the origin where eta + q.(X - x) <= L, truncated at
/// the terminal node. The returned index is always > origin_idx.
inline std::vector<std::size_t> hitting_time_index(const PathBundle& bundle, double eta,
                                                   const Vec& q, const ObstacleSpec& obs) {
    const double l0 = obs(bundle.grid.node(bundle.origin_idx), bundle.origin_x);
    if (!(eta > l0))
        throw ConfigError("hitting_time_index: need eta > L at the origin (eta=" +
                          std::to_string(eta) + ", L=" + std::to_string(l0) + ")");
    const std::size_t n_steps = bundle.grid.n_steps();
    const std::size_t n_paths = bundle.n_paths;
    std::vector<std::size_t> tau(n_paths, n_steps);
    std::vector<bool> alive(n_paths, true);
    Vec xbuf(bundle.n);
    for (std::size_t i = bundle.origin_idx + 1; i < n_steps; ++i) {
        const double t = bundle.grid.node(i);
        for (std::size_t p = 0; p < n_paths; ++p) {
            if (!alive[p]) continue;
            double v = eta;
            for (int c = 0; c < bundle.n; ++c) {
                xbuf[c] = bundle.x_at(p, i, c);
                v += q[c] * (xbuf[c] - bundle.origin_x[c]);
            }
            if (v <= obs(t, xbuf)) {
                tau[p] = i;
                alive[p] = false;
            }
        }
    }
    return tau;
}

/// CSV path dump for debugging: path, node, time, X components.
inline std::string dump_paths_csv(const PathBundle& b, std::size_t max_paths = 16) {
    std::string out = "path,node,time";
    for (int c = 0; c < b.n; ++c) out += ",x" + std::to_string(c);
    out += "\n";
    const std::size_t np = std::min(max_paths, b.n_paths);
    for (std::size_t p = 0; p < np; ++p)
        for (std::size_t i = 0; i <= b.grid.n_steps(); ++i) {
            out += std::to_string(p) + "," + std::to_string(i) + "," + std::to_string(b.grid.node(i));
            for (int c = 0; c < b.n; ++c) out += "," + std::to_string(b.x_at(p, i, c));
            out += "\n";
        }
    return out;
}

}  // namespace rbsde
