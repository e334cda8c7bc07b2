#pragma once

#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rbsde/common.hpp"
#include "rbsde/rng.hpp"

namespace rbsde {

/// Driver g(t, y, z). z has dimension z_dim.
struct GeneratorSpec {
    std::function<double(double t, double y, const Vec& z)> eval;
    double lambda = 0.0;                             // growth constant
    std::function<double(double)> gamma =             // growth process, deterministic here
        [](double) { return 0.0; };
    bool satisfies_A3 = false;                        // g(t, y, 0) == 0
    int z_dim = 1;
    std::string name;

    double operator()(double t, double y, const Vec& z) const { return eval(t, y, z); }

    /// Scalar-z convenience for the 1-d solvers.
    double operator()(double t, double y, double z) const {
        return eval(t, y, Vec{z});
    }
};

/// Forward SDE coefficients b: R^n, sigma: R^{n x d} (row-major).
struct SDECoeffs {
    std::function<Vec(double t, const Vec& x)> drift;
    std::function<Vec(double t, const Vec& x)> diffusion;
    double mu = 0.0;   // Lipschitz constant
    double nu = 0.0;   // growth constant
    int n = 1;
    int d = 1;
    std::string name;

    /// Scalar shorthands, valid when n == d == 1.
    double b1(double t, double x) const { return drift(t, Vec{x})[0]; }
    double sigma1(double t, double x) const { return diffusion(t, Vec{x})[0]; }
};

enum class ObstacleKind { Constant, TimeFunction, StateFunction, ItoForm };

/// Lower barrier L(t, x). Ito form additionally carries the (U, V)
/// decomposition dL = U dt + V dB; with a Brownian state the level function
/// evaluates the same process pathwise.
struct ObstacleSpec {
    ObstacleKind kind = ObstacleKind::Constant;
    std::function<double(double t, const Vec& x)> level;
    std::function<double(double t)> ito_drift;        // U
    std::function<Vec(double t)> ito_diffusion;       // V, dim d
    std::optional<double> upper_bound;                // C with sup L <= C
    std::string name;

    double operator()(double t, const Vec& x) const { return level(t, x); }
    double operator()(double t, double x) const { return level(t, Vec{x}); }
};

/// Obstacle so far below everything that reflection never binds.
inline ObstacleSpec no_obstacle() {
    ObstacleSpec obs;
    obs.kind = ObstacleKind::Constant;
    obs.level = [](double, const Vec&) { return -1e9; };
    obs.name = "none";
    return obs;
}

struct AssumptionCheck {
    std::string name;
    bool passed = true;
    double worst_margin = 0.0;   // most negative slack seen (<0 means violated)
    std::string worst_point;     // description of the worst sample
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }

    std::string to_string() const {
        std::ostringstream os;
        for (const auto& c : checks) {
            os << c.name << ": " << (c.passed ? "pass" : "FAIL");
            if (!c.passed) os << " (margin " << c.worst_margin << " at " << c.worst_point << ")";
            os << "\n";
        }
        return os.str();
    }
};

/// Box the randomized assumption checks sample from.
struct SampleBox {
    double t_max = 1.0;
    double y_max = 5.0;
    double z_max = 5.0;
    double x_max = 5.0;
};

/// Sampling-based check of the standing assumptions: driver growth and
/// A3 flatness, coefficient Lipschitz and growth, obstacle finiteness and
/// declared upper bound. Violations are reported, never thrown.
inline ValidationReport validate_spec(const GeneratorSpec& gen, const SDECoeffs& coeffs,
                                      const ObstacleSpec& obs, std::size_t n_samples,
                                      std::uint64_t rng_seed, const SampleBox& box = {}) {
    require(n_samples >= 1, "validate_spec: need n_samples >= 1");
    CounterRng rng(rng_seed, 0xA55E55ULL);
    std::uint64_t ctr = 0;
    auto u = [&](double lo, double hi) {
        return lo + (hi - lo) * rng.uniform(ctr++);
    };

    ValidationReport rep;
    auto point = [](std::initializer_list<std::pair<const char*, double>> vals) {
        std::ostringstream os;
        bool first = true;
        for (const auto& [k, v] : vals) {
            if (!first) os << ", ";
            os << k << "=" << v;
            first = false;
        }
        return os.str();
    };

    AssumptionCheck growth{"generator growth |g| <= lambda*(gamma+|y|+|z|)"};
    AssumptionCheck a3{"flatness g(t,y,0) = 0"};
    AssumptionCheck lip{"coefficient Lipschitz"};
    AssumptionCheck cgrow{"coefficient growth <= nu*(1+|x|)"};
    AssumptionCheck ofin{"obstacle finite"};
    AssumptionCheck obound{"obstacle upper bound L <= C"};

    const int zd = gen.z_dim;
    const int n = coeffs.n, d = coeffs.d;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const double t = u(0.0, box.t_max);
        const double y = u(-box.y_max, box.y_max);
        Vec z(zd), x(n), x2(n);
        for (auto& v : z) v = u(-box.z_max, box.z_max);
        for (auto& v : x) v = u(-box.x_max, box.x_max);
        for (auto& v : x2) v = u(-box.x_max, box.x_max);

        {
            const double g = gen.eval(t, y, z);
            const double bound = gen.lambda * (gen.gamma(t) + std::abs(y) + norm2(z));
            const double margin = bound - std::abs(g);
            if (margin < -1e-12) growth.passed = false;
            if (margin < growth.worst_margin) {
                growth.worst_margin = margin;
                growth.worst_point = point({{"t", t}, {"y", y}, {"z0", z[0]}});
            }
        }
        if (gen.satisfies_A3) {
            const double g0 = gen.eval(t, y, Vec(zd, 0.0));
            const double margin = -std::abs(g0);
            if (std::abs(g0) > 1e-12) {
                a3.passed = false;
                if (margin < a3.worst_margin) {
                    a3.worst_margin = margin;
                    a3.worst_point = point({{"t", t}, {"y", y}});
                }
            }
        }
        {
            const Vec b1 = coeffs.drift(t, x), b2 = coeffs.drift(t, x2);
            const Vec s1 = coeffs.diffusion(t, x), s2 = coeffs.diffusion(t, x2);
            double db = 0.0, ds = 0.0, dx = 0.0;
            for (int i = 0; i < n; ++i) {
                db += (b1[i] - b2[i]) * (b1[i] - b2[i]);
                dx += (x[i] - x2[i]) * (x[i] - x2[i]);
            }
            for (int i = 0; i < n * d; ++i) ds += (s1[i] - s2[i]) * (s1[i] - s2[i]);
            const double margin = coeffs.mu * std::sqrt(dx) - (std::sqrt(db) + std::sqrt(ds));
            if (margin < -1e-10) {
                lip.passed = false;
                if (margin < lip.worst_margin) {
                    lip.worst_margin = margin;
                    lip.worst_point = point({{"t", t}, {"x0", x[0]}, {"x0'", x2[0]}});
                }
            }
            const double gm = coeffs.nu * (1.0 + norm2(x)) - (norm2(b1) + norm2(s1));
            if (gm < -1e-10) {
                cgrow.passed = false;
                if (gm < cgrow.worst_margin) {
                    cgrow.worst_margin = gm;
                    cgrow.worst_point = point({{"t", t}, {"x0", x[0]}});
                }
            }
        }
        {
            const double L = obs.level(t, x);
            if (!std::isfinite(L)) {
                ofin.passed = false;
                ofin.worst_point = point({{"t", t}, {"x0", x[0]}});
            }
            if (obs.upper_bound && L > *obs.upper_bound + 1e-12) {
                obound.passed = false;
                const double margin = *obs.upper_bound - L;
                if (margin < obound.worst_margin) {
                    obound.worst_margin = margin;
                    obound.worst_point = point({{"t", t}, {"x0", x[0]}});
                }
            }
        }
    }

    rep.checks.push_back(growth);
    if (gen.satisfies_A3) rep.checks.push_back(a3);
    rep.checks.push_back(lip);
    rep.checks.push_back(cgrow);
    rep.checks.push_back(ofin);
    if (obs.upper_bound) rep.checks.push_back(obound);
    return rep;
}

}  // namespace rbsde
