#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "rbsde/common.hpp"
#include "rbsde/pathsim.hpp"
#include "rbsde/problem.hpp"
#include "rbsde/solution.hpp"

namespace rbsde {

namespace detail {

/// Ordinary least squares of several regressands on the monomial basis of a
/// standardized scalar covariate, optionally augmented with one extra
/// feature column (used for the obstacle value, whose kink polynomials
/// cannot represent). Falls back to a lower degree when the normal
/// equations are numerically rank deficient; a degenerate extra column is
/// dropped first.
class PolyRegression {
public:
    // x: covariate per active unit; extra: optional feature per unit.
    PolyRegression(const std::vector<double>& x, int degree,
                   const std::vector<double>* extra = nullptr)
        : x_(x), degree_(degree) {
        const double n = static_cast<double>(x.size());
        double m = 0.0;
        for (double v : x) m += v;
        m /= n;
        double s2 = 0.0;
        for (double v : x) s2 += (v - m) * (v - m);
        mean_ = m;
        sd_ = std::sqrt(s2 / std::max(n - 1.0, 1.0));
        if (!(sd_ > 1e-13)) {
            // constant covariate: only the mean is identifiable
            sd_ = 1.0;
            degree_ = 0;
            fallback_ = (degree > 0);
        }
        if (extra && !extra->empty()) {
            double em = 0.0, es2 = 0.0;
            for (double v : *extra) em += v;
            em /= n;
            for (double v : *extra) es2 += (v - em) * (v - em);
            const double esd = std::sqrt(es2 / std::max(n - 1.0, 1.0));
            if (esd > 1e-13) {
                extra_ = extra;
                extra_mean_ = em;
                extra_sd_ = esd;
            }
        }
        build_gram();
    }

    bool fallback() const { return fallback_; }
    int effective_degree() const { return degree_; }
    bool has_extra() const { return extra_ != nullptr; }
    std::size_t n_basis() const { return static_cast<std::size_t>(degree_) + 1 + (extra_ ? 1 : 0); }

    /// Fit one regressand; returns basis coefficients.
    std::vector<double> fit(const std::vector<double>& y) {
        const std::size_t p = n_basis();
        std::vector<double> rhs(p, 0.0);
        std::vector<double> pw(p);
        for (std::size_t i = 0; i < x_.size(); ++i) {
            basis_row(i, pw);
            for (std::size_t a = 0; a < p; ++a) rhs[a] += pw[a] * y[i];
        }
        return solve(rhs);
    }

    double predict(const std::vector<double>& coef, double x, double extra_val = 0.0) const {
        std::vector<double> pw(coef.size());
        basis_at(x, extra_val, pw);
        double v = 0.0;
        for (std::size_t a = 0; a < coef.size(); ++a) v += coef[a] * pw[a];
        return v;
    }

    void basis_at(double x, double extra_val, std::vector<double>& pw) const {
        const double u = (x - mean_) / sd_;
        double acc = 1.0;
        for (int a = 0; a <= degree_; ++a) {
            pw[static_cast<std::size_t>(a)] = acc;
            acc *= u;
        }
        if (extra_) pw[static_cast<std::size_t>(degree_) + 1] = (extra_val - extra_mean_) / extra_sd_;
    }

    void basis_row(std::size_t i, std::vector<double>& pw) const {
        basis_at(x_[i], extra_ ? (*extra_)[i] : 0.0, pw);
    }

private:
    void build_gram() {
        for (;;) {
            const std::size_t p = n_basis();
            gram_.assign(p * p, 0.0);
            std::vector<double> pw(p);
            for (std::size_t i = 0; i < x_.size(); ++i) {
                basis_row(i, pw);
                for (std::size_t a = 0; a < p; ++a)
                    for (std::size_t b = a; b < p; ++b) gram_[a * p + b] += pw[a] * pw[b];
            }
            for (std::size_t a = 0; a < p; ++a)
                for (std::size_t b = 0; b < a; ++b) gram_[a * p + b] = gram_[b * p + a];
            if (factorize()) return;
            fallback_ = true;
            if (extra_) {
                extra_ = nullptr;   // collinear feature: drop it before degrees
                continue;
            }
            require(degree_ > 0, "PolyRegression: degenerate regression at degree 0");
            --degree_;
        }
    }

    // In-place Cholesky; false if a pivot collapses.
    bool factorize() {
        const std::size_t p = n_basis();
        chol_ = gram_;
        const double scale = chol_[0];  // sum of weights, > 0
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = a; b < p; ++b) {
                double s = chol_[a * p + b];
                for (std::size_t k = 0; k < a; ++k) s -= chol_[k * p + a] * chol_[k * p + b];
                if (a == b) {
                    if (s <= 1e-10 * scale) return false;
                    chol_[a * p + b] = std::sqrt(s);
                } else {
                    chol_[a * p + b] = s / chol_[a * p + a];
                }
            }
        }
        return true;
    }

    std::vector<double> solve(std::vector<double> rhs) const {
        const std::size_t p = n_basis();
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t k = 0; k < a; ++k) rhs[a] -= chol_[k * p + a] * rhs[k];
            rhs[a] /= chol_[a * p + a];
        }
        for (std::size_t a = p; a-- > 0;) {
            for (std::size_t k = a + 1; k < p; ++k) rhs[a] -= chol_[a * p + k] * rhs[k];
            rhs[a] /= chol_[a * p + a];
        }
        return rhs;
    }

    const std::vector<double>& x_;
    int degree_;
    bool fallback_ = false;
    double mean_ = 0.0, sd_ = 1.0;
    const std::vector<double>* extra_ = nullptr;
    double extra_mean_ = 0.0, extra_sd_ = 1.0;
    std::vector<double> gram_, chol_;
};

}  // namespace detail

struct LsmcOptions {
    int degree = 3;
    int picard_passes = 2;
    // Add the obstacle value as an extra regression feature when reflecting:
    // the projection-then-max step otherwise ratchets upward because a
    // polynomial cannot represent the obstacle kink. A constant obstacle
    // contributes nothing and is dropped automatically.
    bool obstacle_in_basis = true;
    bool store_full = true;               // keep the whole (Y, Z, dK) table
    bool reflect = true;                  // false: plain BSDE scheme
    double penalty = 0.0;                 // penalization weight (reflect == false)
    // Per-path random horizon: index of the terminal node of each path
    // (strictly greater than the bundle origin). Empty: all paths run to T.
    std::vector<std::size_t> stop_idx;
    // Per-path terminal values; defaults to prob.terminal at the terminal state.
    std::function<double(std::size_t p)> terminal_override;
    // Solve only up to this node index (0: the full grid).
    std::size_t terminal_idx = 0;
};

struct LsmcStats {
    double y0 = 0.0;               // origin value (trivial conditioning: sample mean)
    double mean_K_end = 0.0;       // E[K at each path's terminal]
    double min_Y = 0.0;            // min over all realized (Y, terminal) values
    double max_abs_Y = 0.0;
    double skorokhod_defect = 0.0; // mean of sum (Y-L) dK per path
    double mean_driver_integral = 0.0;  // E[sum g(...) dt] over alive steps
    bool rank_fallback = false;
    std::size_t n_paths = 0;
    std::vector<double> K_end;          // per-path terminal K
};

struct LsmcResult {
    DiscreteSolution sol;   // empty tables when store_full == false
    LsmcStats stats;
};

/// One interior backward step (regression + driver + projection). Shared by
/// solve_lsmc; exposed for testing.
inline void step_update(const RBSDEProblem& prob, const PathBundle& bundle,
                        const LsmcOptions& opts, std::size_t n, std::size_t i, bool random_horizon,
                        const std::vector<double>& xi, std::vector<double>& y_cur,
                        std::vector<double>& K, std::vector<std::size_t>& active,
                        std::vector<double>& xa, std::vector<double>& ya, std::vector<double>& za,
                        const std::function<double(double, double, double)>& driver,
                        LsmcStats& st, DiscreteSolution& sol) {
    const std::size_t np = bundle.n_paths;
    const double t = bundle.grid.node(i);
    const double dt = bundle.grid.dt(i);

    active.clear();
    for (std::size_t p = 0; p < np; ++p) {
        if (random_horizon && opts.stop_idx[p] == i + 1) y_cur[p] = xi[p];
        if (!random_horizon || opts.stop_idx[p] >= i + 1) active.push_back(p);
    }
    xa.resize(active.size());
    ya.resize(active.size());
    za.resize(active.size());
    std::vector<double> la(active.size());
    Vec xv(1);
    for (std::size_t k = 0; k < active.size(); ++k) {
        const std::size_t p = active[k];
        xa[k] = bundle.x_at(p, i);
        ya[k] = y_cur[p];
        za[k] = y_cur[p] * bundle.dw_at(p, i) / dt;
        xv[0] = xa[k];
        la[k] = prob.obs(t, xv);
    }
    const bool use_extra = opts.reflect && opts.obstacle_in_basis;
    detail::PolyRegression reg(xa, opts.degree, use_extra ? &la : nullptr);
    if (reg.fallback()) st.rank_fallback = true;
    const auto ce = reg.fit(ya);
    const auto cz = reg.fit(za);

    std::vector<double> pw(reg.n_basis());
    for (std::size_t k = 0; k < active.size(); ++k) {
        const std::size_t p = active[k];
        reg.basis_at(xa[k], la[k], pw);
        double e = 0.0, z = 0.0;
        for (std::size_t a = 0; a < pw.size(); ++a) {
            e += ce[a] * pw[a];
            z += cz[a] * pw[a];
        }
        const double l = la[k];
        double y_arg = opts.reflect ? std::max(e, l) : e;
        double ytil = e;
        for (int pass = 0; pass < opts.picard_passes; ++pass) {
            double gval = driver(t, y_arg, z);
            if (!opts.reflect && opts.penalty > 0.0)
                gval += opts.penalty * std::max(l - y_arg, 0.0);
            ytil = e + gval * dt;
            y_arg = opts.reflect ? std::max(ytil, l) : ytil;
        }
        const double y_new = opts.reflect ? std::max(ytil, l) : ytil;
        const double dk = opts.reflect
                              ? (y_new - ytil)
                              : opts.penalty * std::max(l - y_arg, 0.0) * dt;
        y_cur[p] = y_new;
        K[p] += dk;
        st.min_Y = std::min(st.min_Y, y_new);
        st.max_abs_Y = std::max(st.max_abs_Y, std::abs(y_new));
        st.skorokhod_defect += (y_new - l) * dk / static_cast<double>(np);
        st.mean_driver_integral += driver(t, y_arg, z) * dt / static_cast<double>(np);
        if (!sol.Y.empty()) {
            sol.Y[i][p] = y_new;
            sol.Z[i][p] = z;
            sol.dK[i][p] = dk;
            sol.L[i][p] = l;
        }
    }
}

/// Least-squares Monte Carlo discrete (reflected) scheme. Backward over the
/// grid: conditional expectations of Y and of Y*dW/dt are projected on a
/// polynomial basis of the state; the driver is applied with one
/// re-evaluation pass and the result projected on the obstacle. At the
/// deterministic origin the regression degenerates to the sample mean.
inline LsmcResult solve_lsmc(const RBSDEProblem& prob, const PathBundle& bundle,
                             const LsmcOptions& opts = {}) {
    require(bundle.n == 1 && bundle.d == 1, "solve_lsmc: scalar state and noise only");
    const std::size_t n = opts.terminal_idx == 0 ? bundle.grid.n_steps() : opts.terminal_idx;
    require(n <= bundle.grid.n_steps(), "solve_lsmc: terminal_idx beyond the grid");
    const std::size_t np = bundle.n_paths;
    const std::size_t o = bundle.origin_idx;
    require(np >= 10 * static_cast<std::size_t>(opts.degree + 1),
            "solve_lsmc: need n_paths >= 10*(degree+1)");
    if (!opts.reflect && opts.penalty > 0.0) {
        const double pdt = opts.penalty * bundle.grid.dt(0);
        if (pdt >= 1.0)
            throw StabilityError("solve_lsmc: penalty*dt = " + std::to_string(pdt) +
                                 " >= 1 (explicit scheme unstable)");
    }
    const bool random_horizon = !opts.stop_idx.empty();
    if (random_horizon)
        require(opts.stop_idx.size() == np, "solve_lsmc: stop_idx size mismatch");

    LsmcResult res;
    LsmcStats& st = res.stats;
    st.n_paths = np;
    st.min_Y = std::numeric_limits<double>::infinity();

    DiscreteSolution& sol = res.sol;
    sol.grid = bundle.grid;
    sol.path_indexed = true;
    if (opts.store_full) {
        sol.Y.assign(n + 1, std::vector<double>(np, 0.0));
        sol.Z.assign(n, std::vector<double>(np, 0.0));
        sol.dK.assign(n, std::vector<double>(np, 0.0));
        sol.L.assign(n + 1, std::vector<double>(np, 0.0));
        sol.stop_idx = opts.stop_idx;
    }

    auto terminal_value = [&](std::size_t p, std::size_t idx) {
        if (opts.terminal_override) return opts.terminal_override(p);
        return prob.terminal(bundle.state(p, idx));
    };

    std::vector<double> y_cur(np, 0.0);
    std::vector<double> K(np, 0.0);
    std::vector<double> xi(np, 0.0);
    for (std::size_t p = 0; p < np; ++p) {
        const std::size_t sp = random_horizon ? opts.stop_idx[p] : n;
        xi[p] = terminal_value(p, sp);
        st.min_Y = std::min(st.min_Y, xi[p]);
        st.max_abs_Y = std::max(st.max_abs_Y, std::abs(xi[p]));
        if (sp == n) y_cur[p] = xi[p];
    }
    if (opts.store_full) {
        for (std::size_t p = 0; p < np; ++p) {
            const std::size_t sp = random_horizon ? opts.stop_idx[p] : n;
            sol.Y[sp][p] = xi[p];
            sol.L[sp][p] = prob.obs(bundle.grid.node(sp), bundle.state(p, sp));
        }
    }

    std::vector<std::size_t> active;
    active.reserve(np);
    std::vector<double> xa, ya, za;
    Vec zbuf(1);
    auto driver = [&](double t, double y, double z) {
        zbuf[0] = z;
        return prob.gen.eval(t, y, zbuf);
    };

    for (std::size_t ii = n; ii-- > o + 1;) {
        step_update(prob, bundle, opts, n, ii, random_horizon, xi, y_cur, K, active, xa, ya, za,
                    driver, st, sol);
    }

    // Origin step: trivial sigma-field, conditional expectations are plain means.
    {
        const std::size_t i = o;
        const double t = bundle.grid.node(i);
        const double dt = bundle.grid.dt(i);
        double e = 0.0, z = 0.0, gsum = 0.0;
        for (std::size_t p = 0; p < np; ++p) {
            if (random_horizon && opts.stop_idx[p] == i + 1) y_cur[p] = xi[p];
            e += y_cur[p];
            z += y_cur[p] * bundle.dw_at(p, i);
        }
        e /= static_cast<double>(np);
        z /= static_cast<double>(np) * dt;
        const double l = prob.obs(t, bundle.origin_x);
        double y_arg = opts.reflect ? std::max(e, l) : e;
        double ytil = e;
        for (int pass = 0; pass < opts.picard_passes; ++pass) {
            double gval = driver(t, y_arg, z);
            if (!opts.reflect && opts.penalty > 0.0)
                gval += opts.penalty * std::max(l - y_arg, 0.0);
            ytil = e + gval * dt;
            y_arg = opts.reflect ? std::max(ytil, l) : ytil;
        }
        gsum = driver(t, y_arg, z) * dt;
        const double y0 = opts.reflect ? std::max(ytil, l) : ytil;
        const double dk = opts.reflect
                              ? (y0 - ytil)
                              : opts.penalty * std::max(l - y_arg, 0.0) * dt;
        for (std::size_t p = 0; p < np; ++p) K[p] += dk;
        st.y0 = y0;
        st.min_Y = std::min(st.min_Y, y0);
        st.max_abs_Y = std::max(st.max_abs_Y, std::abs(y0));
        st.skorokhod_defect += (y0 - l) * dk;
        st.mean_driver_integral += gsum;
        if (opts.store_full) {
            for (std::size_t p = 0; p < np; ++p) {
                sol.Y[i][p] = y0;
                sol.Z[i][p] = z;
                sol.dK[i][p] = dk;
                sol.L[i][p] = l;
            }
        }
    }

    double ksum = 0.0;
    for (std::size_t p = 0; p < np; ++p) ksum += K[p];
    st.mean_K_end = ksum / static_cast<double>(np);
    st.K_end = std::move(K);
    return res;
}

}  // namespace rbsde
