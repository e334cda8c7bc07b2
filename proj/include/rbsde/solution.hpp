#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rbsde/common.hpp"
#include "rbsde/specs.hpp"
#include "rbsde/time_grid.hpp"

namespace rbsde {

/// Grid-indexed (Y, Z, K) triple. Either node-indexed (tree, level i has
/// i+1 entries) or path-indexed (every level has n_paths entries).
/// dK[i] holds the reflection increment applied when computing Y at node i
/// (zero at the terminal level). K along a trajectory is the running sum of
/// the dK values it visits, K = 0 at the origin.
struct DiscreteSolution {
    TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 1);
    bool path_indexed = false;
    std::vector<std::vector<double>> Y;    // [level][unit]
    std::vector<std::vector<double>> Z;    // [level][unit], empty at terminal level
    std::vector<std::vector<double>> dK;   // [level][unit]
    std::vector<std::vector<double>> L;    // obstacle evaluated at each (level, unit)
    std::vector<std::size_t> stop_idx;     // per-path random horizon (empty: full grid)
    bool z_degenerate = false;             // sigma == 0, Z reported as zero

    double origin_value() const { return Y.front().front(); }

    std::size_t n_levels() const { return Y.size(); }

    /// Probability weight of unit j at level i: binomial for tree solutions,
    /// uniform across paths otherwise.
    double weight(std::size_t i, std::size_t j) const {
        if (path_indexed) return 1.0 / static_cast<double>(Y[i].size());
        double lw = std::lgamma(double(i) + 1.0) - std::lgamma(double(j) + 1.0) -
                    std::lgamma(double(i - j) + 1.0) - double(i) * std::log(2.0);
        return std::exp(lw);
    }

    /// E[K at the final level] (terminal of each trajectory).
    double mean_K_end() const {
        double m = 0.0;
        if (path_indexed) {
            const std::size_t n_paths = Y.front().size();
            std::vector<double> K(n_paths, 0.0);
            for (std::size_t i = 0; i < dK.size(); ++i)
                for (std::size_t p = 0; p < n_paths; ++p) {
                    if (!stop_idx.empty() && i > stop_idx[p]) continue;
                    K[p] += dK[i][p];
                }
            for (double k : K) m += k;
            m /= static_cast<double>(n_paths);
        } else {
            for (std::size_t i = 0; i < dK.size(); ++i)
                for (std::size_t j = 0; j < dK[i].size(); ++j)
                    m += weight(i, j) * dK[i][j];
        }
        return m;
    }

    double max_abs_Y() const {
        double m = 0.0;
        for (const auto& row : Y)
            for (double v : row) m = std::max(m, std::abs(v));
        return m;
    }
};

struct SolutionCheckResult {
    bool ok = true;
    std::string detail;
};

/// Shared post-check every solver result must satisfy: dK >= 0, K starts at
/// zero by construction, Y dominates the obstacle, and the discretized
/// Skorokhod flat-off defect is small relative to the K mass.
inline SolutionCheckResult check_solution(const DiscreteSolution& sol,
                                          double skorokhod_tol = 1e-6,
                                          double domination_tol = 1e-12) {
    SolutionCheckResult res;
    double defect = 0.0;
    for (std::size_t i = 0; i < sol.Y.size(); ++i) {
        for (std::size_t j = 0; j < sol.Y[i].size(); ++j) {
            if (!sol.stop_idx.empty() && sol.path_indexed && i > sol.stop_idx[j]) continue;
            if (i < sol.dK.size() && sol.dK[i][j] < -1e-14) {
                res.ok = false;
                res.detail = "negative dK at level " + std::to_string(i);
                return res;
            }
            const double l = sol.L[i][j];
            const bool at_terminal =
                (i + 1 == sol.Y.size()) || (!sol.stop_idx.empty() && sol.path_indexed && i == sol.stop_idx[j]);
            if (!at_terminal && sol.Y[i][j] < l - domination_tol) {
                res.ok = false;
                res.detail = "Y below obstacle at level " + std::to_string(i) +
                             " (Y=" + std::to_string(sol.Y[i][j]) + ", L=" + std::to_string(l) + ")";
                return res;
            }
            if (i < sol.dK.size())
                defect += sol.weight(i, j) * (sol.Y[i][j] - l) * sol.dK[i][j];
        }
    }
    const double k_end = sol.mean_K_end();
    const double budget = skorokhod_tol * (1.0 + sol.max_abs_Y()) * std::max(k_end, 1e-300);
    if (k_end > 0.0 && defect > budget) {
        res.ok = false;
        res.detail = "Skorokhod defect " + std::to_string(defect) + " exceeds budget " +
                     std::to_string(budget);
    }
    return res;
}

}  // namespace rbsde
