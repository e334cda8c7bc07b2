#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rbsde/common.hpp"
#include "rbsde/expr.hpp"
#include "rbsde/specs.hpp"

namespace rbsde {

/// Numeric + optional expression parameters for registry factories.
struct RegistryParams {
    std::map<std::string, double> num;
    std::string expr;

    double get(const std::string& key, double fallback) const {
        auto it = num.find(key);
        return it == num.end() ? fallback : it->second;
    }
    bool has(const std::string& key) const { return num.count(key) > 0; }
};

struct RegistryEntry {
    std::string id;
    std::string category;      // generator | obstacle | sde | terminal | preset
    std::string formula;
    std::string assumptions;   // which standing assumptions hold
    std::string exercises;     // what the entry is for
};

inline const std::vector<RegistryEntry>& registry_catalog() {
    static const std::vector<RegistryEntry> entries = {
        {"zero", "generator", "g = 0", "(A1)(A2)(A3)", "driver-free reflection; Snell envelope"},
        {"constant", "generator", "g = c", "(A1)(A2)", "deterministic drift of Y; K ablation studies"},
        {"linear", "generator", "g = a*y + beta*z + c", "(A1)(A2)", "linear driver with known short-horizon limit"},
        {"abs-z", "generator", "g = |z|", "(A1)(A2)(A3)", "nonsmooth-in-z stress; zero-interest property"},
        {"sqrt-cap", "generator", "g = sqrt(min(|y|,1))", "(A1)(A2), continuous non-Lipschitz", "beyond-Lipschitz continuity stress"},
        {"discount", "generator", "g = -r*y", "(A1)(A2)", "discounted claims; American option pricing"},
        {"custom-expression", "generator", "g = <expression in t,y,z>", "declared by user", "ad-hoc experiments"},
        {"none", "obstacle", "L = -1e9", "never binds", "unreflected (plain) limit of the solvers"},
        {"constant", "obstacle", "L = level", "bounded", "flat barrier; bounded-obstacle short-horizon checks"},
        {"linear-t", "obstacle", "L = l0 + slope*t", "deterministic", "closed-form reflected solutions"},
        {"ito", "obstacle", "L = l0 + u*t + v*x (Brownian state)", "semimartingale form (U=u, V=v)", "vanishing-K short-horizon checks"},
        {"put", "obstacle", "L = max(strike - x, 0)", "bounded by strike", "American put on a price state"},
        {"put-log", "obstacle", "L = max(strike - exp(x), 0)", "bounded by strike", "American put on a log-price state"},
        {"zero", "sde", "b = 0, sigma = 0", "frozen state", "degenerate dynamics"},
        {"bm", "sde", "b = 0, sigma = 1", "Brownian state", "driver recovery with unit volatility"},
        {"constant", "sde", "b, sigma constants", "(H1)(H2)", "general constant-coefficient flows"},
        {"gbm", "sde", "b = mu*x, sigma = vol*x", "(H1)(H2)", "geometric Brownian motion in price space"},
        {"gbm-log", "sde", "b = r - vol^2/2, sigma = vol", "(H1)(H2)", "geometric Brownian motion in log space"},
        {"corollary34", "preset", "n = d, q = z, b = 0, sigma = 1, x = 0",
         "inherits the generator's", "short-horizon limit recovering g(t, eta, z) directly"},
    };
    return entries;
}

inline GeneratorSpec make_generator(const std::string& id, const RegistryParams& p = {}) {
    GeneratorSpec g;
    g.name = id;
    if (id == "zero") {
        g.eval = [](double, double, const Vec&) { return 0.0; };
        g.lambda = 0.0;
        g.satisfies_A3 = true;
    } else if (id == "constant") {
        const double c = p.get("c", 1.0);
        g.eval = [c](double, double, const Vec&) { return c; };
        g.lambda = std::max(std::abs(c), 1.0);
        g.gamma = [](double) { return 1.0; };
    } else if (id == "linear") {
        const double a = p.get("a", 0.0), beta = p.get("beta", 0.0), c = p.get("c", 0.0);
        g.eval = [a, beta, c](double, double y, const Vec& z) { return a * y + beta * z[0] + c; };
        g.lambda = std::max({std::abs(a), std::abs(beta), std::abs(c), 1e-12});
        if (c != 0.0) g.gamma = [](double) { return 1.0; };
        g.satisfies_A3 = (c == 0.0 && a == 0.0);
    } else if (id == "abs-z") {
        g.eval = [](double, double, const Vec& z) { return std::abs(z[0]); };
        g.lambda = 1.0;
        g.satisfies_A3 = true;
    } else if (id == "sqrt-cap") {
        g.eval = [](double, double y, const Vec&) { return std::sqrt(std::min(std::abs(y), 1.0)); };
        g.lambda = 1.0;
        g.gamma = [](double) { return 1.0; };
    } else if (id == "discount") {
        const double r = p.get("r", 0.06);
        g.eval = [r](double, double y, const Vec&) { return -r * y; };
        g.lambda = std::max(std::abs(r), 1e-12);
    } else if (id == "custom-expression") {
        require(!p.expr.empty(), "generator custom-expression: missing 'expr'");
        auto e = std::make_shared<Expression>(p.expr);
        g.eval = [e](double t, double y, const Vec& z) { return e->eval(t, y, z[0]); };
        g.lambda = p.get("lambda", 1.0);
        const double gamma_c = p.get("gamma", 1.0);
        g.gamma = [gamma_c](double) { return gamma_c; };
        g.satisfies_A3 = p.get("satisfies_a3", 0.0) != 0.0;
    } else {
        throw ConfigError("unknown generator id '" + id + "'");
    }
    return g;
}

inline ObstacleSpec make_obstacle(const std::string& id, const RegistryParams& p = {}) {
    ObstacleSpec o;
    o.name = id;
    if (id == "none") {
        o = no_obstacle();
    } else if (id == "constant") {
        const double level = p.get("level", 0.0);
        o.kind = ObstacleKind::Constant;
        o.level = [level](double, const Vec&) { return level; };
        o.upper_bound = level;
    } else if (id == "linear-t") {
        const double l0 = p.get("l0", 1.0), slope = p.get("slope", -1.0);
        o.kind = ObstacleKind::TimeFunction;
        o.level = [l0, slope](double t, const Vec&) { return l0 + slope * t; };
        o.ito_drift = [slope](double) { return slope; };
        o.ito_diffusion = [](double) { return Vec{0.0}; };
        if (p.has("upper_bound")) o.upper_bound = p.get("upper_bound", 0.0);
    } else if (id == "ito") {
        // Semimartingale obstacle realized pathwise on a Brownian state:
        // valid together with the bm coefficient set when v != 0.
        const double l0 = p.get("l0", 0.0), u = p.get("u", 0.0), v = p.get("v", 0.0);
        o.kind = ObstacleKind::ItoForm;
        o.level = [l0, u, v](double t, const Vec& x) { return l0 + u * t + v * x[0]; };
        o.ito_drift = [u](double) { return u; };
        o.ito_diffusion = [v](double) { return Vec{v}; };
    } else if (id == "put") {
        const double strike = p.get("strike", 100.0);
        o.kind = ObstacleKind::StateFunction;
        o.level = [strike](double, const Vec& x) { return std::max(strike - x[0], 0.0); };
        o.upper_bound = strike;
    } else if (id == "put-log") {
        const double strike = p.get("strike", 100.0);
        o.kind = ObstacleKind::StateFunction;
        o.level = [strike](double, const Vec& x) { return std::max(strike - std::exp(x[0]), 0.0); };
        o.upper_bound = strike;
    } else {
        throw ConfigError("unknown obstacle id '" + id + "'");
    }
    return o;
}

inline SDECoeffs make_coeffs(const std::string& id, const RegistryParams& p = {}) {
    SDECoeffs c;
    c.name = id;
    c.n = 1;
    c.d = 1;
    if (id == "zero") {
        c.drift = [](double, const Vec&) { return Vec{0.0}; };
        c.diffusion = [](double, const Vec&) { return Vec{0.0}; };
        c.mu = 0.0;
        c.nu = 1e-12;
    } else if (id == "bm") {
        c.drift = [](double, const Vec&) { return Vec{0.0}; };
        c.diffusion = [](double, const Vec&) { return Vec{1.0}; };
        c.mu = 0.0;
        c.nu = 1.0;
    } else if (id == "constant") {
        const double b = p.get("b", 0.0), s = p.get("sigma", 1.0);
        c.drift = [b](double, const Vec&) { return Vec{b}; };
        c.diffusion = [s](double, const Vec&) { return Vec{s}; };
        c.mu = 0.0;
        c.nu = std::abs(b) + std::abs(s);
    } else if (id == "gbm") {
        const double mu = p.get("mu", 0.05), vol = p.get("vol", 0.2);
        c.drift = [mu](double, const Vec& x) { return Vec{mu * x[0]}; };
        c.diffusion = [vol](double, const Vec& x) { return Vec{vol * x[0]}; };
        c.mu = std::abs(mu) + std::abs(vol);
        c.nu = std::abs(mu) + std::abs(vol);
    } else if (id == "gbm-log") {
        const double r = p.get("r", 0.06), vol = p.get("vol", 0.4);
        const double b = r - 0.5 * vol * vol;
        c.drift = [b](double, const Vec&) { return Vec{b}; };
        c.diffusion = [vol](double, const Vec&) { return Vec{vol}; };
        c.mu = 0.0;
        c.nu = std::abs(b) + std::abs(vol);
    } else {
        throw ConfigError("unknown sde id '" + id + "'");
    }
    return c;
}

inline std::function<double(const Vec&)> make_terminal(const std::string& id,
                                                       const RegistryParams& p = {}) {
    if (id == "state") return [](const Vec& x) { return x[0]; };
    if (id == "zero") return [](const Vec&) { return 0.0; };
    if (id == "constant") {
        const double c = p.get("c", 0.0);
        return [c](const Vec&) { return c; };
    }
    if (id == "put") {
        const double strike = p.get("strike", 100.0);
        return [strike](const Vec& x) { return std::max(strike - x[0], 0.0); };
    }
    if (id == "put-log") {
        const double strike = p.get("strike", 100.0);
        return [strike](const Vec& x) { return std::max(strike - std::exp(x[0]), 0.0); };
    }
    throw ConfigError("unknown terminal id '" + id + "'");
}

}  // namespace rbsde
