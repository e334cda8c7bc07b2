#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "rbsde/applications.hpp"
#include "rbsde/common.hpp"
#include "rbsde/registry.hpp"

namespace rbsde {

using json = nlohmann::json;

namespace detail {

inline void check_keys(const json& j, const std::string& where,
                       const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k))
            throw ConfigError(where + ": unknown key '" + k + "'");
}

inline RegistryParams registry_params(const json& j, const std::string& where) {
    RegistryParams p;
    if (j.contains("params")) {
        if (!j["params"].is_object()) throw ConfigError(where + ".params: expected an object");
        for (const auto& [k, v] : j["params"].items()) {
            if (!v.is_number()) throw ConfigError(where + ".params." + k + ": expected a number");
            p.num[k] = v.get<double>();
        }
    }
    if (j.contains("expr")) p.expr = j["expr"].get<std::string>();
    return p;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

/// Fully parsed experiment description. Unknown keys anywhere in the file
/// are rejected; every default actually used is echoed back in the report.
struct ExperimentConfig {
    std::string experiment;
    json raw;
    std::string config_bytes;

    GeneratorSpec gen;
    GeneratorSpec gen2;
    bool has_gen2 = false;
    ObstacleSpec obs;
    SDECoeffs sde;
    std::function<double(const Vec&)> terminal;
    std::string terminal_id = "zero";

    double t0 = 0.0, T = 1.0;
    std::size_t n_steps = 200;

    int n_paths = 100000;
    std::uint64_t seed = 1;
    int degree = 3;
    int n_seed_replicates = 8;
    int picard_passes = 2;

    std::vector<double> eps_schedule{0.2, 0.1, 0.05, 0.025, 0.0125};

    double abs_tol_scale = 0.02;
    double skorokhod_tol = 1e-6;
    double k_tol_scale = 0.01;
    double solution_tol = 1e-8;

    // representation block
    double rep_t = 0.0, rep_x = 0.0, rep_eta = 1.0, rep_q = 1.0, p_norm = 1.0;
    int min_substeps = 20;
    bool include_k_term = true;
    bool control_variate = true;
    bool preset_corollary34 = false;

    // solve block
    std::string backend = "tree";
    double n_penalty = 0.0;

    // converse-comparison block
    std::vector<ComparisonProbe> probes;

    // properties block
    std::string property_check;   // self-financing | zero-interest | flatness
    double ell = -1.0;
    double upper_C = 0.0;
    double prop_eta = 1.0;
    std::vector<double> y_values;

    std::string out_dir = "out";
    std::string prefix = "experiment";

    RepresentationInstance representation_instance() const {
        RepresentationInstance inst;
        inst.gen = gen;
        inst.obs = obs;
        if (preset_corollary34) {
            inst = corollary34_config(gen, obs, rep_t, rep_eta, rep_q);
        } else {
            inst.coeffs = sde;
            inst.t = rep_t;
            inst.x = Vec{rep_x};
            inst.eta = rep_eta;
            inst.q = Vec{rep_q};
        }
        inst.horizon = T - rep_t;
        inst.eps_fractions = eps_schedule;
        inst.p_norm = p_norm;
        inst.n_paths = n_paths;
        inst.seed = seed;
        inst.n_seed_replicates = n_seed_replicates;
        inst.min_substeps = min_substeps;
        inst.degree = degree;
        inst.picard_passes = picard_passes;
        inst.abs_tol_scale = abs_tol_scale;
        inst.include_k_term = include_k_term;
        inst.control_variate = control_variate;
        return inst;
    }
};

inline ExperimentConfig parse_config(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    using detail::check_keys;
    using detail::get_or;
    check_keys(j, "config",
               {"experiment", "generator", "generator2", "obstacle", "sde", "terminal", "grid",
                "monte_carlo", "epsilon_schedule", "tolerances", "representation", "solve",
                "comparison", "properties", "output"});
    ExperimentConfig c;
    c.raw = j;
    c.config_bytes = bytes;
    if (!j.contains("experiment")) throw ConfigError("config: missing 'experiment'");
    c.experiment = j["experiment"].get<std::string>();
    static const std::set<std::string> kinds = {"solve",       "representation",
                                               "corollary32", "corollary33",
                                               "converse-comparison", "properties", "apriori"};
    if (!kinds.count(c.experiment))
        throw ConfigError("config: unknown experiment kind '" + c.experiment + "'");

    auto parse_gen = [&](const json& gj, const std::string& where) {
        check_keys(gj, where, {"id", "params", "expr"});
        if (!gj.contains("id")) throw ConfigError(where + ": missing 'id'");
        return make_generator(gj["id"].get<std::string>(), detail::registry_params(gj, where));
    };
    if (j.contains("generator")) c.gen = parse_gen(j["generator"], "generator");
    else c.gen = make_generator("zero");
    if (j.contains("generator2")) {
        c.gen2 = parse_gen(j["generator2"], "generator2");
        c.has_gen2 = true;
    }
    if (j.contains("obstacle")) {
        const json& oj = j["obstacle"];
        check_keys(oj, "obstacle", {"id", "params"});
        if (!oj.contains("id")) throw ConfigError("obstacle: missing 'id'");
        c.obs = make_obstacle(oj["id"].get<std::string>(), detail::registry_params(oj, "obstacle"));
    } else {
        c.obs = no_obstacle();
    }
    if (j.contains("sde")) {
        const json& sj = j["sde"];
        check_keys(sj, "sde", {"id", "params"});
        if (!sj.contains("id")) throw ConfigError("sde: missing 'id'");
        c.sde = make_coeffs(sj["id"].get<std::string>(), detail::registry_params(sj, "sde"));
    } else {
        c.sde = make_coeffs("bm");
    }
    if (j.contains("terminal")) {
        const json& tj = j["terminal"];
        check_keys(tj, "terminal", {"id", "params"});
        if (!tj.contains("id")) throw ConfigError("terminal: missing 'id'");
        c.terminal_id = tj["id"].get<std::string>();
        c.terminal = make_terminal(c.terminal_id, detail::registry_params(tj, "terminal"));
    } else {
        c.terminal = make_terminal("zero");
    }
    if (j.contains("grid")) {
        const json& gj = j["grid"];
        check_keys(gj, "grid", {"t0", "T", "n_steps"});
        c.t0 = get_or(gj, "t0", c.t0);
        c.T = get_or(gj, "T", c.T);
        c.n_steps = get_or(gj, "n_steps", c.n_steps);
    }
    if (j.contains("monte_carlo")) {
        const json& mj = j["monte_carlo"];
        check_keys(mj, "monte_carlo", {"n_paths", "seed", "degree", "n_seed_replicates", "picard_passes"});
        c.n_paths = get_or(mj, "n_paths", c.n_paths);
        c.seed = get_or(mj, "seed", c.seed);
        c.degree = get_or(mj, "degree", c.degree);
        c.n_seed_replicates = get_or(mj, "n_seed_replicates", c.n_seed_replicates);
        c.picard_passes = get_or(mj, "picard_passes", c.picard_passes);
    }
    if (j.contains("epsilon_schedule"))
        c.eps_schedule = j["epsilon_schedule"].get<std::vector<double>>();
    if (j.contains("tolerances")) {
        const json& tj = j["tolerances"];
        check_keys(tj, "tolerances",
                   {"abs_tol_scale", "skorokhod_tol", "k_tol_scale", "solution_tol"});
        c.abs_tol_scale = get_or(tj, "abs_tol_scale", c.abs_tol_scale);
        c.skorokhod_tol = get_or(tj, "skorokhod_tol", c.skorokhod_tol);
        c.k_tol_scale = get_or(tj, "k_tol_scale", c.k_tol_scale);
        c.solution_tol = get_or(tj, "solution_tol", c.solution_tol);
    }
    if (j.contains("representation")) {
        const json& rj = j["representation"];
        check_keys(rj, "representation",
                   {"t", "x", "eta", "q", "p_norm", "min_substeps", "include_k_term",
                    "control_variate", "preset"});
        c.rep_t = get_or(rj, "t", c.rep_t);
        c.rep_x = get_or(rj, "x", c.rep_x);
        c.rep_eta = get_or(rj, "eta", c.rep_eta);
        c.rep_q = get_or(rj, "q", c.rep_q);
        c.p_norm = get_or(rj, "p_norm", c.p_norm);
        c.min_substeps = get_or(rj, "min_substeps", c.min_substeps);
        c.include_k_term = get_or(rj, "include_k_term", c.include_k_term);
        c.control_variate = get_or(rj, "control_variate", c.control_variate);
        if (rj.contains("preset")) {
            const std::string preset = rj["preset"].get<std::string>();
            if (preset != "corollary34")
                throw ConfigError("representation.preset: unknown preset '" + preset + "'");
            c.preset_corollary34 = true;
        }
    }
    if (j.contains("solve")) {
        const json& sj = j["solve"];
        check_keys(sj, "solve", {"backend", "n_penalty"});
        c.backend = get_or<std::string>(sj, "backend", c.backend);
        static const std::set<std::string> backends = {"tree", "lsmc", "penalized-tree",
                                                       "penalized-lsmc"};
        if (!backends.count(c.backend))
            throw ConfigError("solve.backend: unknown backend '" + c.backend + "'");
        c.n_penalty = get_or(sj, "n_penalty", c.n_penalty);
    }
    if (j.contains("comparison")) {
        const json& cj = j["comparison"];
        check_keys(cj, "comparison", {"probes"});
        if (cj.contains("probes")) {
            for (const auto& pj : cj["probes"]) {
                check_keys(pj, "comparison.probes[]", {"t", "eta", "q"});
                ComparisonProbe p;
                p.t = get_or(pj, "t", 0.0);
                p.eta = get_or(pj, "eta", 1.0);
                p.q = get_or(pj, "q", 1.0);
                c.probes.push_back(p);
            }
        }
    }
    if (j.contains("properties")) {
        const json& pj = j["properties"];
        check_keys(pj, "properties", {"check", "ell", "C", "eta", "y_values"});
        if (!pj.contains("check")) throw ConfigError("properties: missing 'check'");
        c.property_check = pj["check"].get<std::string>();
        static const std::set<std::string> props = {"self-financing", "zero-interest", "flatness"};
        if (!props.count(c.property_check))
            throw ConfigError("properties.check: unknown check '" + c.property_check + "'");
        c.ell = get_or(pj, "ell", c.ell);
        c.upper_C = get_or(pj, "C", c.upper_C);
        c.prop_eta = get_or(pj, "eta", c.prop_eta);
        if (pj.contains("y_values")) c.y_values = pj["y_values"].get<std::vector<double>>();
    }
    if (j.contains("output")) {
        const json& oj = j["output"];
        check_keys(oj, "output", {"dir", "prefix"});
        c.out_dir = get_or<std::string>(oj, "dir", c.out_dir);
        c.prefix = get_or<std::string>(oj, "prefix", c.prefix);
    }

    require(c.T > c.t0, "grid: need T > t0");
    require(c.n_steps >= 1, "grid: need n_steps >= 1");
    require(c.n_paths >= 1, "monte_carlo: need n_paths >= 1");
    return c;
}

}  // namespace rbsde
