#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rbsde/applications.hpp"
#include "rbsde/config.hpp"
#include "rbsde/io.hpp"
#include "rbsde/lsmc.hpp"
#include "rbsde/representation.hpp"
#include "rbsde/tree.hpp"

namespace rbsde {

// Exit codes: 0 all checks pass, 1 a check failed, 2 config/parse error,
// 3 runtime solver error. The CLI maps exceptions onto 2/3.

struct RunResult {
    int exit_code = 0;
    json report;
    // (file name, content) pairs; the CLI writes them under the output dir.
    std::vector<std::pair<std::string, std::string>> artifacts;
};

namespace detail {

inline json sweep_json(const RepresentationReport& r) {
    json out;
    out["target"] = r.target;
    out["abs_tol"] = r.abs_tol;
    out["verdict"] = r.verdict;
    out["richardson"] = r.richardson;
    out["error_slope"] = r.slope;
    out["final_estimate"] = r.rows.back().estimate;
    out["final_abs_error"] = r.rows.back().abs_error;
    out["final_stderr"] = r.rows.back().stderr_;
    return out;
}

inline std::string sweep_csv(const RepresentationReport& r) {
    CsvTable t({"epsilon", "estimate", "estimate_no_k", "target", "abs_error", "lp_error",
                "stderr", "tau_truncated_fraction", "mean_k_over_eps", "min_y"});
    for (const auto& row : r.rows)
        t.row({row.eps, row.estimate, row.estimate_no_k, r.target, row.abs_error, row.lp_error,
               row.stderr_, row.tau_truncated_fraction, row.mean_k_over_eps, row.min_Y});
    return t.to_string();
}

inline json proposition_json(const PropositionReport& r) {
    json out;
    out["pass"] = r.pass;
    out["condition_driver"] = r.condition_driver;
    out["condition_solution"] = r.condition_solution;
    out["probe_zero"] = r.probe_zero;
    out["driver_deviation"] = r.driver_deviation;
    out["solution_deviation"] = r.solution_deviation;
    out["k_mass"] = r.k_mass;
    out["probe_limit"] = r.probe_limit;
    out["detail"] = r.detail;
    return out;
}

inline TreeModel tree_for(const ExperimentConfig& c) {
    TreeModel tree;
    tree.x0 = c.rep_x;
    // The lattice needs constant coefficients; they are frozen at the origin.
    tree.b = c.sde.b1(c.t0, c.rep_x);
    tree.sigma = c.sde.sigma1(c.t0, c.rep_x);
    tree.grid = TimeGrid::uniform(c.t0, c.T, c.n_steps);
    return tree;
}

inline RBSDEProblem problem_for(const ExperimentConfig& c) {
    RBSDEProblem prob;
    prob.gen = c.gen;
    prob.obs = c.obs;
    prob.grid = TimeGrid::uniform(c.t0, c.T, c.n_steps);
    prob.forward = c.sde;
    prob.origin_t = c.t0;
    prob.origin_x = Vec{c.rep_x};
    prob.terminal = c.terminal;
    return prob;
}

inline void run_solve(const ExperimentConfig& c, RunResult& out) {
    const RBSDEProblem prob = problem_for(c);
    json summary;
    summary["backend"] = c.backend;
    CsvTable levels({"level", "time", "y_mean", "y_min", "y_max", "dk_mean"});
    bool ok = true;

    auto emit_levels = [&](const DiscreteSolution& sol) {
        for (std::size_t i = 0; i < sol.Y.size(); ++i) {
            double m = 0.0, lo = sol.Y[i].front(), hi = lo, dk = 0.0;
            for (std::size_t jx = 0; jx < sol.Y[i].size(); ++jx) {
                const double w = sol.weight(i, jx);
                m += w * sol.Y[i][jx];
                lo = std::min(lo, sol.Y[i][jx]);
                hi = std::max(hi, sol.Y[i][jx]);
                if (i < sol.dK.size()) dk += w * sol.dK[i][jx];
            }
            levels.row({static_cast<double>(i), sol.grid.node(i), m, lo, hi, dk});
        }
    };

    if (c.backend == "tree" || c.backend == "penalized-tree") {
        const TreeModel tree = tree_for(c);
        const DiscreteSolution sol = c.backend == "tree"
                                         ? solve_tree(prob, tree)
                                         : solve_penalized_tree(prob, tree, c.n_penalty);
        summary["origin_y"] = sol.origin_value();
        summary["mean_k_end"] = sol.mean_K_end();
        summary["z_degenerate"] = sol.z_degenerate;
        const SolutionCheckResult chk = check_solution(sol, c.skorokhod_tol,
                                                       c.backend == "tree" ? 1e-12 : 1e100);
        summary["solution_check"] = chk.ok;
        if (!chk.ok) summary["solution_check_detail"] = chk.detail;
        ok = chk.ok;
        emit_levels(sol);
    } else {
        auto inc = simulate_brownian(prob.grid, static_cast<std::size_t>(c.n_paths), c.sde.d,
                                     c.seed);
        const PathBundle bundle = euler_maruyama(c.sde, c.t0, Vec{c.rep_x}, std::move(inc));
        LsmcOptions opts;
        opts.degree = c.degree;
        opts.picard_passes = c.picard_passes;
        if (c.backend == "penalized-lsmc") {
            opts.reflect = false;
            opts.penalty = c.n_penalty;
        }
        opts.store_full =
            static_cast<double>(c.n_paths) * static_cast<double>(c.n_steps + 1) <= 2e7;
        const LsmcResult res = solve_lsmc(prob, bundle, opts);
        summary["origin_y"] = res.stats.y0;
        summary["mean_k_end"] = res.stats.mean_K_end;
        summary["min_y"] = res.stats.min_Y;
        summary["skorokhod_defect"] = res.stats.skorokhod_defect;
        summary["rank_fallback"] = res.stats.rank_fallback;
        summary["stored_full_tables"] = opts.store_full;
        if (opts.store_full) {
            const SolutionCheckResult chk = check_solution(res.sol, c.skorokhod_tol,
                                                           c.backend == "lsmc" ? 1e-12 : 1e100);
            summary["solution_check"] = chk.ok;
            if (!chk.ok) summary["solution_check_detail"] = chk.detail;
            ok = chk.ok;
            emit_levels(res.sol);
        }
    }
    out.report["solve"] = summary;
    out.artifacts.emplace_back(c.prefix + "_levels.csv", levels.to_string());
    if (!ok) out.exit_code = 1;
}

inline void run_representation(const ExperimentConfig& c, RunResult& out) {
    const RepresentationReport rep = representation_sweep(c.representation_instance());
    out.report["representation"] = sweep_json(rep);
    out.artifacts.emplace_back(c.prefix + "_sweep.csv", sweep_csv(rep));
    if (rep.verdict != "converged") out.exit_code = 1;
}

inline void run_corollary(const ExperimentConfig& c, RunResult& out) {
    const RepresentationInstance inst = c.representation_instance();
    const CorollaryReport rep = c.experiment == "corollary32"
                                    ? corollary32_check(inst, c.k_tol_scale)
                                    : corollary33_check(inst, c.k_tol_scale);
    json cj;
    cj["pass"] = rep.pass;
    cj["target"] = rep.target;
    cj["k_over_eps_last"] = rep.k_over_eps_last;
    cj["detail"] = rep.detail;
    if (c.experiment == "corollary33") cj["min_y"] = rep.min_Y;
    cj["sweep"] = sweep_json(rep.sweep);
    out.report[c.experiment] = cj;
    out.artifacts.emplace_back(c.prefix + "_sweep.csv", sweep_csv(rep.sweep));
    if (!rep.pass) out.exit_code = 1;
}

inline void run_converse(const ExperimentConfig& c, RunResult& out) {
    require(c.has_gen2, "converse-comparison: config needs 'generator2'");
    require(!c.probes.empty(), "converse-comparison: config needs comparison.probes");
    const ConverseComparisonReport rep =
        converse_comparison(c.gen, c.gen2, c.representation_instance(), c.probes);
    json cj;
    cj["verdict"] = rep.verdict;
    cj["forward_checked"] = rep.forward_checked;
    cj["forward_ordered"] = rep.forward_ordered;
    cj["forward_worst_gap"] = rep.forward_worst_gap;
    out.report["converse_comparison"] = cj;
    CsvTable t({"t", "eta", "q", "limit1", "limit2", "diff", "noise", "ordered"});
    for (const auto& row : rep.rows)
        t.row({row.probe.t, row.probe.eta, row.probe.q, row.limit1, row.limit2, row.diff,
               row.noise, row.ordered ? 1.0 : 0.0});
    out.artifacts.emplace_back(c.prefix + "_probes.csv", t.to_string());
    if (rep.verdict == "mixed" || !rep.forward_ordered) out.exit_code = 1;
}

inline void run_properties(const ExperimentConfig& c, RunResult& out) {
    PropositionOptions opts;
    opts.T = c.T - c.t0;
    opts.n_steps = c.n_steps;
    opts.tol = c.solution_tol;
    opts.seed = c.seed;
    json pj;
    if (c.property_check == "self-financing") {
        pj = proposition_json(self_financing_check(c.gen, c.ell, opts));
    } else if (c.property_check == "zero-interest") {
        require(!c.y_values.empty(), "zero-interest: config needs properties.y_values");
        pj = proposition_json(zero_interest_check(c.gen, c.obs, c.upper_C, c.y_values, opts));
    } else {
        const FlatnessReport rep = flatness_check(c.gen, c.obs, c.prop_eta, c.t0, opts);
        pj = proposition_json(rep.prop);
        pj["end_idx"] = rep.end_idx;
        pj["end_time"] = rep.end_time;
    }
    pj["check"] = c.property_check;
    out.report["properties"] = pj;
    if (!pj["pass"].get<bool>()) out.exit_code = 1;
}

inline void run_apriori(const ExperimentConfig& c, RunResult& out) {
    CsvTable t({"n_steps", "lhs", "rhs", "ratio", "flagged"});
    double ratios[2] = {0.0, 0.0};
    bool flagged = false;
    for (int k = 0; k < 2; ++k) {
        ExperimentConfig ck = c;
        ck.n_steps = c.n_steps << k;
        RBSDEProblem prob = problem_for(ck);
        auto inc = simulate_brownian(prob.grid, static_cast<std::size_t>(c.n_paths), c.sde.d,
                                     c.seed);
        const PathBundle bundle = euler_maruyama(c.sde, c.t0, Vec{c.rep_x}, std::move(inc));
        LsmcOptions opts;
        opts.degree = c.degree;
        opts.picard_passes = c.picard_passes;
        const LsmcResult res = solve_lsmc(prob, bundle, opts);
        const AprioriReport ap = apriori_check(prob, res.sol);
        ratios[k] = ap.ratio;
        flagged = flagged || ap.flagged;
        t.row({static_cast<double>(ck.n_steps), ap.lhs, ap.rhs, ap.ratio, ap.flagged ? 1.0 : 0.0});
    }
    json aj;
    aj["ratio_coarse"] = ratios[0];
    aj["ratio_fine"] = ratios[1];
    const double denom = std::max(std::abs(ratios[0]), 1e-12);
    aj["relative_change"] = std::abs(ratios[1] - ratios[0]) / denom;
    aj["flagged"] = flagged;
    const bool pass = !flagged && std::abs(ratios[1] - ratios[0]) / denom < 0.2;
    aj["pass"] = pass;
    out.report["apriori"] = aj;
    out.artifacts.emplace_back(c.prefix + "_apriori.csv", t.to_string());
    if (!pass) out.exit_code = 1;
}

}  // namespace detail

/// Executes the configured experiment. The report echoes the inputs, the
/// config hash, the seed, and every tolerance used, so runs are
/// self-describing and reruns are byte-comparable.
inline RunResult run_experiment(const ExperimentConfig& c) {
    RunResult out;
    out.report["experiment"] = c.experiment;
    out.report["config_hash"] = content_hash(c.config_bytes);
    out.report["config"] = c.raw;
    out.report["seed"] = c.seed;
    out.report["tolerances"] = {{"abs_tol_scale", c.abs_tol_scale},
                                {"skorokhod_tol", c.skorokhod_tol},
                                {"k_tol_scale", c.k_tol_scale},
                                {"solution_tol", c.solution_tol}};

    if (c.experiment == "solve") detail::run_solve(c, out);
    else if (c.experiment == "representation") detail::run_representation(c, out);
    else if (c.experiment == "corollary32" || c.experiment == "corollary33")
        detail::run_corollary(c, out);
    else if (c.experiment == "converse-comparison") detail::run_converse(c, out);
    else if (c.experiment == "properties") detail::run_properties(c, out);
    else detail::run_apriori(c, out);

    out.report["exit_code"] = out.exit_code;
    return out;
}

/// Runs and writes the report plus CSV artifacts under the output directory.
inline int run_and_write(const ExperimentConfig& c) {
    const RunResult res = run_experiment(c);
    const std::filesystem::path dir(c.out_dir);
    for (const auto& [name, content] : res.artifacts) write_file_atomic(dir / name, content);
    write_file_atomic(dir / (c.prefix + "_report.json"), res.report.dump(2) + "\n");
    return res.exit_code;
}

}  // namespace rbsde
