#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rbsde/common.hpp"
#include "rbsde/lsmc.hpp"
#include "rbsde/pathsim.hpp"
#include "rbsde/problem.hpp"
#include "rbsde/registry.hpp"
#include "rbsde/specs.hpp"

namespace rbsde {

// Short-horizon experiments: solve the RBSDE with terminal condition
// eta + q.(X_{t+eps^tau} - x) on [t, t+eps], form the normalized increment
// (Y_t - eta - E[K increment]) / eps, and track its limit as eps shrinks.
// The limit is compared against the directly evaluated
// g(t, eta, sigma^T(t,x) q) + q.b(t,x).

struct RepresentationInstance {
    GeneratorSpec gen;
    SDECoeffs coeffs;
    ObstacleSpec obs;
    double t = 0.0;
    Vec x{0.0};
    double eta = 1.0;
    Vec q{1.0};
    // Horizon room T - t; eps values are fractions of it.
    double horizon = 1.0;
    std::vector<double> eps_fractions{0.2, 0.1, 0.05, 0.025, 0.0125};
    double p_norm = 1.0;
    int n_paths = 100000;
    std::uint64_t seed = 20240101;
    int n_seed_replicates = 8;
    int min_substeps = 20;     // each eps horizon gets at least this many steps
    int degree = 3;
    int picard_passes = 2;
    double abs_tol_scale = 0.02;   // tolerance = scale * (1 + |target|)
    bool include_k_term = true;
    bool control_variate = true;   // subtract the mean of the terminal martingale part
    // Remark-style smaller stopping time: cap the hitting index at this value
    // (0 = no cap).
    std::size_t tau_cap_idx = 0;

    double target() const {
        const int n = coeffs.n, d = coeffs.d;
        const Vec sig = coeffs.diffusion(t, x);
        Vec sz(d, 0.0);
        for (int k = 0; k < d; ++k)
            for (int c = 0; c < n; ++c) sz[k] += sig[c * d + k] * q[c];
        return gen.eval(t, eta, sz) + dot(q, coeffs.drift(t, x));
    }
};

struct EpsRow {
    double eps = 0.0;
    double estimate = 0.0;        // with the K correction applied per include_k_term
    double estimate_with_k = 0.0; // always K-corrected
    double estimate_no_k = 0.0;   // K term ablated
    double abs_error = 0.0;
    double lp_error = 0.0;        // L^p error over seed replicates
    double stderr_ = 0.0;         // across seed replicates
    double tau_truncated_fraction = 0.0;
    double mean_k_over_eps = 0.0;
    double min_Y = 0.0;           // smallest realized Y (incl. stopped terminals)
};

struct RepresentationReport {
    double target = 0.0;
    double abs_tol = 0.0;
    std::vector<EpsRow> rows;     // descending eps
    std::string verdict;          // converged | inconclusive | failed
    double richardson = 0.0;      // extrapolated eps -> 0 limit
    double slope = 0.0;           // fitted log-log error slope (informational)
    double max_domination_overshoot = 0.0;
};

struct ShortHorizonTerminal {
    std::vector<double> xi;
    std::vector<std::size_t> stop_idx;
    double max_overshoot = 0.0;   // worst L - xi at a stopped node
    double truncated_fraction = 0.0;
};

/// Stopped terminal values eta + q.(X at min(eps_idx, tau)) - x). The stopped
/// value must dominate the obstacle up to the one-step grid resolution;
/// a larger overshoot means the grid is too coarse near the barrier.
inline ShortHorizonTerminal short_horizon_terminal(const PathBundle& bundle, double eta,
                                                   const Vec& q,
                                                   const std::vector<std::size_t>& tau_idx,
                                                   std::size_t eps_idx, const ObstacleSpec& obs,
                                                   double domination_tol) {
    ShortHorizonTerminal out;
    const std::size_t np = bundle.n_paths;
    out.xi.resize(np);
    out.stop_idx.resize(np);
    std::size_t truncated = 0;
    for (std::size_t p = 0; p < np; ++p) {
        const std::size_t stop = std::min(tau_idx[p], eps_idx);
        if (tau_idx[p] < eps_idx) ++truncated;
        out.stop_idx[p] = stop;
        double v = eta;
        for (int c = 0; c < bundle.n; ++c)
            v += q[c] * (bundle.x_at(p, stop, c) - bundle.origin_x[c]);
        out.xi[p] = v;
        const double l = obs(bundle.grid.node(stop), bundle.state(p, stop));
        out.max_overshoot = std::max(out.max_overshoot, l - v);
    }
    out.truncated_fraction = static_cast<double>(truncated) / static_cast<double>(np);
    if (out.max_overshoot > domination_tol)
        throw SimulationError(
            "short_horizon_terminal: stopped value undershoots the obstacle by " +
            std::to_string(out.max_overshoot) + " (tol " + std::to_string(domination_tol) +
            "); refine the grid near the barrier");
    return out;
}

namespace detail {

struct QuotientSample {
    double with_k = 0.0;
    double no_k = 0.0;
    double mean_k = 0.0;
    double tau_frac = 0.0;
    double min_Y = 0.0;
    double max_overshoot = 0.0;
    double path_stderr = 0.0;
};

/// Grid step so the smallest eps gets min_substeps steps and all eps land on
/// nodes.
inline std::vector<std::size_t> eps_indices(const RepresentationInstance& inst, double& dt) {
    require(!inst.eps_fractions.empty(), "representation: empty eps schedule");
    std::vector<double> eps;
    for (double f : inst.eps_fractions) {
        require(f > 0.0 && f <= 1.0, "representation: eps fractions must lie in (0, 1]");
        eps.push_back(f * inst.horizon);
    }
    for (std::size_t i = 0; i + 1 < eps.size(); ++i)
        require(eps[i] > eps[i + 1], "representation: eps schedule must be strictly decreasing");
    dt = eps.back() / static_cast<double>(inst.min_substeps);
    std::vector<std::size_t> idx;
    for (double e : eps) {
        const auto k = static_cast<std::size_t>(std::llround(e / dt));
        require(k >= static_cast<std::size_t>(inst.min_substeps), "representation: eps too small for the sub-grid");
        idx.push_back(k);
    }
    return idx;
}

/// One seed replicate, all eps points, sharing paths (common random numbers:
/// smaller eps experiments see prefixes of the same trajectories).
inline std::vector<QuotientSample> run_seed(const RepresentationInstance& inst,
                                            std::uint64_t seed,
                                            const std::vector<std::size_t>& eps_idx, double dt) {
    const std::size_t n_total = eps_idx.front();
    const TimeGrid grid = TimeGrid::uniform(inst.t, inst.t + dt * static_cast<double>(n_total),
                                            n_total);
    auto inc = simulate_brownian(grid, static_cast<std::size_t>(inst.n_paths), inst.coeffs.d, seed);
    const PathBundle bundle = euler_maruyama(inst.coeffs, inst.t, inst.x, std::move(inc));
    std::vector<std::size_t> tau = hitting_time_index(bundle, inst.eta, inst.q, inst.obs);
    if (inst.tau_cap_idx > 0)
        for (auto& v : tau) v = std::max<std::size_t>(1, std::min(v, inst.tau_cap_idx));

    const double dom_tol =
        12.0 * (1.0 + norm2(inst.q)) * (1.0 + inst.coeffs.nu) *
            (1.0 + norm2(inst.x)) * std::sqrt(dt) + 1e-9;

    RBSDEProblem prob;
    prob.gen = inst.gen;
    prob.obs = inst.obs;
    prob.grid = grid;
    prob.forward = inst.coeffs;
    prob.origin_t = inst.t;
    prob.origin_x = inst.x;
    prob.terminal = [](const Vec&) { return 0.0; };  // overridden per path

    std::vector<QuotientSample> out;
    const std::size_t np = bundle.n_paths;
    for (std::size_t e : eps_idx) {
        const double eps = dt * static_cast<double>(e);
        ShortHorizonTerminal term =
            short_horizon_terminal(bundle, inst.eta, inst.q, tau, e, inst.obs, dom_tol);

        LsmcOptions opts;
        opts.degree = inst.degree;
        opts.picard_passes = inst.picard_passes;
        opts.store_full = false;
        opts.terminal_idx = e;
        opts.stop_idx = term.stop_idx;
        const std::vector<double>& xi_ref = term.xi;
        opts.terminal_override = [&xi_ref](std::size_t p) { return xi_ref[p]; };
        const LsmcResult res = solve_lsmc(prob, bundle, opts);

        // Martingale control variate: q.(X_stop - x) minus its predictable
        // drift part has mean zero exactly; subtracting the sample mean
        // reduces the estimator variance without changing its expectation.
        double cv = 0.0;
        if (inst.control_variate) {
            double acc = 0.0;
            for (std::size_t p = 0; p < np; ++p) {
                double v = 0.0;
                for (int c = 0; c < bundle.n; ++c)
                    v += inst.q[c] * (bundle.x_at(p, term.stop_idx[p], c) - inst.x[c]);
                for (std::size_t i = 0; i < term.stop_idx[p]; ++i) {
                    const Vec bdrift = inst.coeffs.drift(grid.node(i), bundle.state(p, i));
                    v -= dot(inst.q, bdrift) * grid.dt(i);
                }
                acc += v;
            }
            cv = acc / static_cast<double>(np);
        }

        QuotientSample s;
        s.with_k = (res.stats.y0 - cv - inst.eta - res.stats.mean_K_end) / eps;
        s.no_k = (res.stats.y0 - cv - inst.eta) / eps;
        s.mean_k = res.stats.mean_K_end;
        s.tau_frac = term.truncated_fraction;
        s.min_Y = res.stats.min_Y;
        s.max_overshoot = term.max_overshoot;
        {
            double m = 0.0, m2 = 0.0;
            for (std::size_t p = 0; p < np; ++p) {
                const double v = (term.xi[p] - inst.eta - res.stats.K_end[p]) / eps;
                m += v;
                m2 += v * v;
            }
            m /= static_cast<double>(np);
            m2 = m2 / static_cast<double>(np) - m * m;
            s.path_stderr = std::sqrt(std::max(m2, 0.0) / static_cast<double>(np));
        }
        out.push_back(s);
    }
    return out;
}

}  // namespace detail

struct DifferenceQuotient {
    double estimate = 0.0;
    double stderr_ = 0.0;   // from path variance, single replicate
    double mean_k = 0.0;
    double tau_truncated_fraction = 0.0;
};

/// Single-seed, single-eps estimate of the normalized short-horizon increment.
inline DifferenceQuotient difference_quotient(const RepresentationInstance& inst, double eps) {
    RepresentationInstance one = inst;
    one.eps_fractions = {eps / inst.horizon};
    double dt = 0.0;
    const auto idx = detail::eps_indices(one, dt);
    const auto samples = detail::run_seed(one, one.seed, idx, dt);
    DifferenceQuotient q;
    q.estimate = one.include_k_term ? samples[0].with_k : samples[0].no_k;
    q.stderr_ = samples[0].path_stderr;
    q.mean_k = samples[0].mean_k;
    q.tau_truncated_fraction = samples[0].tau_frac;
    return q;
}

/// Full sweep over the eps schedule with independent seed replicates.
/// Verdict "converged": the final error is within tolerance plus noise and
/// the last three errors do not increase beyond noise.
inline RepresentationReport representation_sweep(const RepresentationInstance& inst) {
    require(inst.p_norm >= 1.0 && inst.p_norm < 2.0, "representation: p_norm must lie in [1, 2)");
    require(inst.n_seed_replicates >= 1, "representation: need at least one seed replicate");
    require(inst.eta > inst.obs(inst.t, inst.x),
            "representation: need eta > L(t, x) at the evaluation point");
    double dt = 0.0;
    const auto eps_idx = detail::eps_indices(inst, dt);

    RepresentationReport rep;
    rep.target = inst.target();
    rep.abs_tol = inst.abs_tol_scale * (1.0 + std::abs(rep.target));

    const std::size_t ne = eps_idx.size();
    const int reps = inst.n_seed_replicates;
    std::vector<std::vector<detail::QuotientSample>> all(reps);
    for (int r = 0; r < reps; ++r)
        all[r] = detail::run_seed(inst, inst.seed + static_cast<std::uint64_t>(r), eps_idx, dt);

    for (std::size_t k = 0; k < ne; ++k) {
        EpsRow row;
        row.eps = dt * static_cast<double>(eps_idx[k]);
        double mk = 0.0, mnk = 0.0, kk = 0.0, tf = 0.0, lp = 0.0;
        double miny = std::numeric_limits<double>::infinity();
        for (int r = 0; r < reps; ++r) {
            const auto& s = all[r][k];
            mk += s.with_k;
            mnk += s.no_k;
            kk += s.mean_k;
            tf += s.tau_frac;
            miny = std::min(miny, s.min_Y);
            rep.max_domination_overshoot = std::max(rep.max_domination_overshoot, s.max_overshoot);
        }
        mk /= reps;
        mnk /= reps;
        row.estimate_with_k = mk;
        row.estimate_no_k = mnk;
        row.estimate = inst.include_k_term ? mk : mnk;
        row.mean_k_over_eps = (kk / reps) / row.eps;
        row.tau_truncated_fraction = tf / reps;
        row.min_Y = miny;
        row.abs_error = std::abs(row.estimate - rep.target);
        double var = 0.0;
        for (int r = 0; r < reps; ++r) {
            const auto& s = all[r][k];
            const double v = inst.include_k_term ? s.with_k : s.no_k;
            var += (v - row.estimate) * (v - row.estimate);
            lp += std::pow(std::abs(v - rep.target), inst.p_norm);
        }
        row.lp_error = std::pow(lp / reps, 1.0 / inst.p_norm);
        row.stderr_ = reps > 1 ? std::sqrt(var / (reps * (reps - 1.0)))
                               : all[0][k].path_stderr;
        rep.rows.push_back(row);
    }

    // Verdict.
    const EpsRow& last = rep.rows.back();
    bool monotone_ok = true;
    const std::size_t look = std::min<std::size_t>(3, ne);
    for (std::size_t k = ne - look + 1; k < ne; ++k) {
        const double noise = 3.0 * (rep.rows[k].stderr_ + rep.rows[k - 1].stderr_);
        // Errors already inside the tolerance band may bounce (e.g. when the
        // estimate crosses the target); only growth above tolerance counts.
        if (rep.rows[k].abs_error > rep.rows[k - 1].abs_error + noise &&
            rep.rows[k].abs_error > rep.abs_tol)
            monotone_ok = false;
    }
    const bool within = last.abs_error <= rep.abs_tol + 3.0 * last.stderr_;
    if (within && monotone_ok) rep.verdict = "converged";
    else if (3.0 * last.stderr_ > rep.abs_tol) rep.verdict = "inconclusive";
    else rep.verdict = "failed";

    if (ne >= 2) {
        const EpsRow& prev = rep.rows[ne - 2];
        rep.richardson = last.estimate -
                         (last.estimate - prev.estimate) * last.eps / (last.eps - prev.eps);
    } else {
        rep.richardson = last.estimate;
    }
    {
        // log-log slope of error vs eps, informational
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        int m = 0;
        for (const auto& row : rep.rows) {
            if (row.abs_error <= 0.0) continue;
            const double lx = std::log(row.eps), ly = std::log(row.abs_error);
            sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
            ++m;
        }
        rep.slope = m >= 2 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : 0.0;
    }
    return rep;
}

struct CorollaryReport {
    bool pass = false;
    double target = 0.0;
    double k_over_eps_last = 0.0;     // mean K increment relative to eps at the smallest eps
    double min_Y = 0.0;               // smallest realized Y (corollary33)
    std::string detail;
    RepresentationReport sweep;       // simplified quotient (no K correction)
};

/// Ito-form obstacle: when g(t, L_t, V_t) + U_t >= 0 the reflection never
/// charges mass on short horizons, so the simplified quotient (no K term)
/// already converges.
inline CorollaryReport corollary32_check(const RepresentationInstance& inst,
                                         double k_tol_scale = 0.01) {
    require(inst.obs.kind == ObstacleKind::ItoForm, "corollary32_check: obstacle must be in Ito form");
    // Sampled nonnegativity of g(t, L_t, V_t) + U_t over the experiment window.
    CounterRng rng(inst.seed, 0xC32ULL);
    const double span = 4.0 * std::sqrt(inst.horizon) * (1.0 + norm2(inst.x));
    for (std::uint64_t s = 0; s < 256; ++s) {
        const double t = inst.t + inst.horizon * rng.uniform(2 * s);
        const double xv = inst.x[0] - span + 2.0 * span * rng.uniform(2 * s + 1);
        const double l = inst.obs(t, Vec{xv});
        const Vec v = inst.obs.ito_diffusion(t);
        const double u = inst.obs.ito_drift(t);
        const double val = inst.gen.eval(t, l, v) + u;
        if (val < -1e-12)
            throw ConfigError("corollary32_check: sampled g(t,L,V)+U = " + std::to_string(val) +
                              " < 0 at t=" + std::to_string(t));
    }
    RepresentationInstance simplified = inst;
    simplified.include_k_term = false;
    CorollaryReport rep;
    rep.sweep = representation_sweep(simplified);
    rep.target = rep.sweep.target;
    rep.k_over_eps_last = rep.sweep.rows.back().mean_k_over_eps;
    const double k_tol = k_tol_scale * (1.0 + std::abs(rep.target));
    rep.pass = (rep.sweep.verdict == "converged") && (rep.k_over_eps_last <= k_tol);
    rep.detail = "K/eps = " + std::to_string(rep.k_over_eps_last) + " (tol " +
                 std::to_string(k_tol) + "), verdict " + rep.sweep.verdict;
    return rep;
}

/// Bounded obstacle sup L <= C with a flat-at-zero driver: the solution
/// started above C stays above C, K vanishes, and the simplified quotient
/// converges.
inline CorollaryReport corollary33_check(const RepresentationInstance& inst,
                                         double k_tol_scale = 0.01) {
    require(inst.obs.upper_bound.has_value(), "corollary33_check: obstacle needs a declared upper bound");
    require(inst.gen.satisfies_A3, "corollary33_check: generator must declare flatness at z = 0");
    const double C = *inst.obs.upper_bound;
    require(inst.eta > C, "corollary33_check: need eta > C");
    RepresentationInstance simplified = inst;
    simplified.include_k_term = false;
    CorollaryReport rep;
    rep.sweep = representation_sweep(simplified);
    rep.target = rep.sweep.target;
    rep.k_over_eps_last = rep.sweep.rows.back().mean_k_over_eps;
    rep.min_Y = rep.sweep.rows.front().min_Y;
    for (const auto& row : rep.sweep.rows) rep.min_Y = std::min(rep.min_Y, row.min_Y);
    const double k_tol = k_tol_scale * (1.0 + std::abs(rep.target));
    // Stopped terminals overshoot the barrier by at most one grid move.
    const double y_tol = rep.sweep.max_domination_overshoot + 1e-9 +
                         12.0 * (1.0 + norm2(inst.q)) * (1.0 + inst.coeffs.nu) *
                             std::sqrt(inst.horizon * inst.eps_fractions.back() /
                                       static_cast<double>(inst.min_substeps));
    const bool stays_above = rep.min_Y >= C - y_tol;
    rep.pass = (rep.sweep.verdict == "converged") && (rep.k_over_eps_last <= k_tol) && stays_above;
    rep.detail = "K/eps = " + std::to_string(rep.k_over_eps_last) + ", min Y = " +
                 std::to_string(rep.min_Y) + " vs C = " + std::to_string(C) + ", verdict " +
                 rep.sweep.verdict;
    return rep;
}

/// Preset: Brownian state (b = 0, sigma = 1, x = 0) and q = z, under which
/// the limit recovers g(t, eta, z) directly.
inline RepresentationInstance corollary34_config(GeneratorSpec gen, ObstacleSpec obs, double t,
                                                 double eta, double z) {
    RepresentationInstance inst;
    inst.gen = std::move(gen);
    inst.obs = std::move(obs);
    inst.coeffs = make_coeffs("bm");
    inst.t = t;
    inst.x = Vec{0.0};
    inst.eta = eta;
    inst.q = Vec{z};
    return inst;
}

}  // namespace rbsde
