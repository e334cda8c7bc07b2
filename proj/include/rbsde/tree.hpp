#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rbsde/common.hpp"
#include "rbsde/problem.hpp"
#include "rbsde/solution.hpp"

namespace rbsde {

/// Recombining binomial lattice for a 1-d state with constant coefficients:
/// x(i, j) = x0 + b*(t_i - t0) + sigma*(2j - i)*sqrt(dt), up/down each with
/// probability 1/2. Increment moments match the Brownian step exactly.
struct TreeModel {
    double x0 = 0.0;
    double b = 0.0;
    double sigma = 1.0;
    TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 1);

    double dt() const { return grid.dt(0); }

    double state(std::size_t level, std::size_t j) const {
        const double sq = std::sqrt(dt());
        return x0 + b * (grid.node(level) - grid.t0()) +
               sigma * (2.0 * static_cast<double>(j) - static_cast<double>(level)) * sq;
    }
};

struct TreeSolveOptions {
    int picard_passes = 2;   // driver evaluated at the conditional-mean proxy, then re-evaluated
    // Instrumentation hook: every (t, y, z) the driver is evaluated at.
    std::function<void(double t, double y, double z)> on_driver_eval;
};

/// Backward induction with predict-then-project reflection. The driver is
/// always evaluated at y-arguments clamped to the obstacle, so the solution
/// only depends on g above L (the solver never looks below the barrier).
inline DiscreteSolution solve_tree(const RBSDEProblem& prob, const TreeModel& tree,
                                   const TreeSolveOptions& opts = {}) {
    const std::size_t n = tree.grid.n_steps();
    const double dt = tree.dt();
    const double sq = std::sqrt(dt);
    const bool sigma_zero = (tree.sigma == 0.0);

    DiscreteSolution sol;
    sol.grid = tree.grid;
    sol.path_indexed = false;
    sol.z_degenerate = sigma_zero;
    sol.Y.resize(n + 1);
    sol.Z.resize(n);
    sol.dK.resize(n);
    sol.L.resize(n + 1);

    sol.Y[n].resize(n + 1);
    sol.L[n].resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        const double x = tree.state(n, j);
        const double xi = prob.xi(x);
        const double l = prob.obs(tree.grid.horizon(), x);
        if (xi < l - 1e-12)
            throw ConfigError("solve_tree: terminal condition below obstacle at node " +
                              std::to_string(j));
        sol.Y[n][j] = xi;
        sol.L[n][j] = l;
    }

    for (std::size_t ii = n; ii-- > 0;) {
        const std::size_t i = ii;
        const double t = tree.grid.node(i);
        sol.Y[i].resize(i + 1);
        sol.Z[i].resize(i + 1);
        sol.dK[i].resize(i + 1);
        sol.L[i].resize(i + 1);
        for (std::size_t j = 0; j <= i; ++j) {
            const double yu = sol.Y[i + 1][j + 1];
            const double yd = sol.Y[i + 1][j];
            const double e = 0.5 * (yu + yd);
            const double z = sigma_zero ? 0.0 : (yu - yd) / (2.0 * tree.sigma * sq);
            const double l = prob.obs(t, tree.state(i, j));
            double y_arg = std::max(e, l);
            double ytil = e;
            for (int pass = 0; pass < opts.picard_passes; ++pass) {
                if (opts.on_driver_eval) opts.on_driver_eval(t, y_arg, z);
                ytil = e + prob.gen(t, y_arg, z) * dt;
                y_arg = std::max(ytil, l);
            }
            sol.Y[i][j] = std::max(ytil, l);
            sol.Z[i][j] = z;
            sol.dK[i][j] = sol.Y[i][j] - ytil;
            sol.L[i][j] = l;
        }
    }
    return sol;
}

/// Brute-force optimal-stopping oracle for g == 0: the value
/// max over grid stopping times of E[L_tau 1{tau<T} + xi 1{tau=T}],
/// computed on the full non-recombining binary tree. Independent of the
/// solve_tree code path; refused above depth 12.
inline double enumerate_snell(const RBSDEProblem& prob, const TreeModel& tree) {
    const std::size_t n = tree.grid.n_steps();
    require(n <= 12, "enumerate_snell: depth > 12 refused");
    const double dt = tree.dt();
    const double sq = std::sqrt(dt);
    std::function<double(std::size_t, double)> value = [&](std::size_t i, double x) -> double {
        if (i == n) return prob.xi(x);
        const double step = tree.b * dt;
        const double up = value(i + 1, x + step + tree.sigma * sq);
        const double dn = value(i + 1, x + step - tree.sigma * sq);
        const double cont = 0.5 * (up + dn);
        return std::max(prob.obs(tree.grid.node(i), x), cont);
    };
    return value(0, tree.x0);
}

/// Penalization scheme: plain (unreflected) backward induction under
/// g_n(t,y,z) = g(t,y,z) + n*(L-y)^+. K is the accumulated penalty mass.
/// Explicit scheme; refuses n*dt >= 1.
inline DiscreteSolution solve_penalized_tree(const RBSDEProblem& prob, const TreeModel& tree,
                                             double n_penalty, const TreeSolveOptions& opts = {}) {
    require(n_penalty >= 0.0, "solve_penalized_tree: need n_penalty >= 0");
    const std::size_t n = tree.grid.n_steps();
    const double dt = tree.dt();
    if (n_penalty * dt >= 1.0)
        throw StabilityError("solve_penalized_tree: n_penalty*dt = " +
                             std::to_string(n_penalty * dt) + " >= 1 (explicit scheme unstable)");
    const double sq = std::sqrt(dt);
    const bool sigma_zero = (tree.sigma == 0.0);

    DiscreteSolution sol;
    sol.grid = tree.grid;
    sol.path_indexed = false;
    sol.z_degenerate = sigma_zero;
    sol.Y.resize(n + 1);
    sol.Z.resize(n);
    sol.dK.resize(n);
    sol.L.resize(n + 1);

    sol.Y[n].resize(n + 1);
    sol.L[n].resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        const double x = tree.state(n, j);
        sol.Y[n][j] = prob.xi(x);
        sol.L[n][j] = prob.obs(tree.grid.horizon(), x);
    }

    auto gen_n = [&](double t, double y, double z, double l) {
        return prob.gen(t, y, z) + n_penalty * std::max(l - y, 0.0);
    };

    for (std::size_t ii = n; ii-- > 0;) {
        const std::size_t i = ii;
        const double t = tree.grid.node(i);
        sol.Y[i].resize(i + 1);
        sol.Z[i].resize(i + 1);
        sol.dK[i].resize(i + 1);
        sol.L[i].resize(i + 1);
        for (std::size_t j = 0; j <= i; ++j) {
            const double yu = sol.Y[i + 1][j + 1];
            const double yd = sol.Y[i + 1][j];
            const double e = 0.5 * (yu + yd);
            const double z = sigma_zero ? 0.0 : (yu - yd) / (2.0 * tree.sigma * sq);
            const double l = prob.obs(t, tree.state(i, j));
            double y_arg = e;
            double ytil = e;
            for (int pass = 0; pass < opts.picard_passes; ++pass) {
                ytil = e + gen_n(t, y_arg, z, l) * dt;
                y_arg = ytil;
            }
            sol.Y[i][j] = ytil;
            sol.Z[i][j] = z;
            sol.dK[i][j] = n_penalty * std::max(l - y_arg, 0.0) * dt;
            sol.L[i][j] = l;
        }
    }
    return sol;
}

struct ComparisonResult {
    bool ordered = true;
    std::size_t worst_level = 0;
    std::size_t worst_unit = 0;
    double worst_gap = 0.0;   // most negative Y1 - Y2 seen
};

/// Node-wise check that Y1 >= Y2 - tol on two solutions sharing a grid and
/// indexing scheme.
inline ComparisonResult comparison_check(const DiscreteSolution& a, const DiscreteSolution& b,
                                         double tol = 0.0) {
    require(a.Y.size() == b.Y.size(), "comparison_check: level count mismatch");
    ComparisonResult res;
    for (std::size_t i = 0; i < a.Y.size(); ++i) {
        require(a.Y[i].size() == b.Y[i].size(), "comparison_check: unit count mismatch");
        for (std::size_t j = 0; j < a.Y[i].size(); ++j) {
            const double gap = a.Y[i][j] - b.Y[i][j];
            if (gap < res.worst_gap) {
                res.worst_gap = gap;
                res.worst_level = i;
                res.worst_unit = j;
            }
            if (gap < -tol) res.ordered = false;
        }
    }
    return res;
}

}  // namespace rbsde
