#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rbsde/registry.hpp"
#include "rbsde/rng.hpp"
#include "rbsde/tree.hpp"

using namespace rbsde;

namespace {

RBSDEProblem base_problem(GeneratorSpec gen, ObstacleSpec obs,
                          std::function<double(const Vec&)> xi, const TimeGrid& grid) {
    RBSDEProblem p;
    p.gen = std::move(gen);
    p.obs = std::move(obs);
    p.terminal = std::move(xi);
    p.grid = grid;
    return p;
}

TreeModel tree_on(const TimeGrid& grid, double x0 = 0.0, double b = 0.0, double sigma = 1.0) {
    TreeModel t;
    t.x0 = x0;
    t.b = b;
    t.sigma = sigma;
    t.grid = grid;
    return t;
}

}  // namespace

TEST_CASE("martingale case: Y0 = 0, Z = 1, K = 0") {
    const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 50);
    const auto sol = solve_tree(base_problem(make_generator("zero"), no_obstacle(),
                                             make_terminal("state"), grid),
                                tree_on(grid));
    CHECK(sol.origin_value() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(sol.mean_K_end() == 0.0);
    for (const auto& level : sol.Z)
        for (double z : level) CHECK(z == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("closed-form obstacle: L(t) = 1 - t, xi = 0, g = 0") {
    // The reflected solution is Y_t = 1 - t (glued to the barrier), so
    // Y_0 = 1 and the compensator accumulates exactly the barrier decay,
    // K_T = 1.
    const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 200);
    const ObstacleSpec obs = make_obstacle("linear-t", {{{"l0", 1.0}, {"slope", -1.0}}, ""});
    const auto sol = solve_tree(base_problem(make_generator("zero"), obs,
                                             make_terminal("zero"), grid),
                                tree_on(grid));
    CHECK(sol.origin_value() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(sol.mean_K_end() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(check_solution(sol).ok);
}

TEST_CASE("snell oracle equality for g = 0 on randomized instances") {
    CounterRng rng(20240303, 1);
    std::uint64_t c = 0;
    for (int inst = 0; inst < 20; ++inst) {
        const double l0 = -1.0 + 2.0 * rng.uniform(c++);
        const double slope = -1.0 + 2.0 * rng.uniform(c++);
        const double a = -2.0 + 4.0 * rng.uniform(c++);
        const double b = rng.uniform(c++);
        const std::size_t depth = 4 + static_cast<std::size_t>(rng.uniform(c++) * 9);  // 4..12
        const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, depth);
        ObstacleSpec obs;
        obs.level = [l0, slope](double t, const Vec& x) {
            return l0 + slope * t + 0.3 * std::sin(x[0]);
        };
        auto xi = [a, b, &obs, &grid](const Vec& x) {
            return std::max(a * x[0] + b, obs(grid.horizon(), x));
        };
        const auto prob = base_problem(make_generator("zero"), obs, xi, grid);
        const auto tree = tree_on(grid, 0.1, 0.2, 0.9);
        const auto sol = solve_tree(prob, tree);
        const double snell = enumerate_snell(prob, tree);
        CHECK(std::abs(sol.origin_value() - snell) <= 1e-12);
    }
}

TEST_CASE("enumerate_snell refuses deep trees") {
    const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 13);
    const auto prob = base_problem(make_generator("zero"), no_obstacle(),
                                   make_terminal("zero"), grid);
    CHECK_THROWS_AS(enumerate_snell(prob, tree_on(grid)), ConfigError);
}

TEST_CASE("terminal below the obstacle is rejected") {
    const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 10);
    const ObstacleSpec obs = make_obstacle("constant", {{{"level", 1.0}}, ""});
    const auto prob = base_problem(make_generator("zero"), obs, make_terminal("zero"), grid);
    CHECK_THROWS_AS(solve_tree(prob, tree_on(grid)), ConfigError);
}

TEST_CASE("sigma = 0 flags degenerate Z") {
    const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 10);
    const auto sol = solve_tree(base_problem(make_generator("constant", {{{"c", -0.5}}, ""}),
                                             no_obstacle(), make_terminal("constant", {{{"c", 2.0}}, ""}),
                                             grid),
                                tree_on(grid, 0.0, 0.0, 0.0));
    CHECK(sol.z_degenerate);
    // deterministic ODE dY = 0.5 dt backward from 2
    CHECK(sol.origin_value() == doctest::Approx(1.5).epsilon(1e-9));
    for (const auto& level : sol.Z)
        for (double z : level) CHECK(z == 0.0);
}

TEST_CASE("driver never sees y below the obstacle, and g below L is irrelevant") {
    const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 64);
    const ObstacleSpec obs = make_obstacle("linear-t", {{{"l0", 0.8}, {"slope", -1.1}}, ""});
    auto xi = [](const Vec& x) { return std::max(x[0], -0.3); };

    GeneratorSpec g1 = make_generator("linear", {{{"a", -0.4}, {"beta", 0.2}, {"c", 0.1}}, ""});
    double worst = 1e300;
    std::vector<std::pair<double, double>> seen;  // (t, y_arg)
    TreeSolveOptions opts;
    opts.on_driver_eval = [&](double t, double y, double) {
        worst = std::min(worst, y - obs(t, Vec{0.0}));
        seen.emplace_back(t, y);
    };
    auto prob = base_problem(g1, obs, xi, grid);
    const auto s1 = solve_tree(prob, tree_on(grid), opts);
    CHECK(!seen.empty());
    CHECK(worst >= -1e-12);  // clamped y-arguments stay on or above the barrier

    // Modifying g strictly below the barrier cannot change the solution.
    GeneratorSpec g2 = g1;
    const auto inner = g1.eval;
    ObstacleSpec obs_copy = obs;
    g2.eval = [inner, obs_copy](double t, double y, const Vec& z) {
        if (y < obs_copy(t, Vec{0.0}) - 1e-9) return inner(t, y, z) + 100.0;
        return inner(t, y, z);
    };
    prob.gen = g2;
    const auto s2 = solve_tree(prob, tree_on(grid));
    for (std::size_t i = 0; i < s1.Y.size(); ++i)
        for (std::size_t j = 0; j < s1.Y[i].size(); ++j)
            CHECK(s1.Y[i][j] == s2.Y[i][j]);  // bit-identical
}

TEST_CASE("solver degenerates to a plain BSDE when the obstacle never binds") {
    const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 40);
    const auto gen = make_generator("linear", {{{"a", -0.3}, {"beta", 0.5}}, ""});
    auto xi = [](const Vec& x) { return std::sin(x[0]); };
    const auto reflected = solve_tree(base_problem(gen, no_obstacle(), xi, grid), tree_on(grid));
    const auto penal0 = solve_penalized_tree(base_problem(gen, no_obstacle(), xi, grid),
                                             tree_on(grid), 0.0);
    CHECK(reflected.mean_K_end() == 0.0);
    for (std::size_t i = 0; i < reflected.Y.size(); ++i)
        for (std::size_t j = 0; j < reflected.Y[i].size(); ++j)
            CHECK(reflected.Y[i][j] == penal0.Y[i][j]);
}

TEST_CASE("penalization: monotone in n and below the reflected solution") {
    const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 200);
    const ObstacleSpec obs = make_obstacle("linear-t", {{{"l0", 1.0}, {"slope", -1.0}}, ""});
    const auto prob = base_problem(make_generator("zero"), obs, make_terminal("zero"), grid);
    const auto tree = tree_on(grid);
    const auto reflected = solve_tree(prob, tree);
    double prev = -1e300;
    for (double n : {4.0, 16.0, 64.0}) {
        const auto sol = solve_penalized_tree(prob, tree, n);
        CHECK(sol.origin_value() >= prev - 1e-12);
        CHECK(comparison_check(reflected, sol, 1e-9).ordered);
        prev = sol.origin_value();
    }
    CHECK(reflected.origin_value() - prev <= 0.02 * reflected.origin_value());
}

TEST_CASE("penalization stability guard") {
    const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 10);  // dt = 0.1
    const auto prob = base_problem(make_generator("zero"), no_obstacle(),
                                   make_terminal("zero"), grid);
    CHECK_THROWS_AS(solve_penalized_tree(prob, tree_on(grid), 10.0), StabilityError);
    CHECK_THROWS_AS(solve_penalized_tree(prob, tree_on(grid), -1.0), ConfigError);
}

TEST_CASE("comparison_check finds the worst violation") {
    DiscreteSolution a, b;
    a.Y = {{1.0}, {1.0, 1.0}};
    b.Y = {{1.0}, {1.2, 0.5}};
    const auto res = comparison_check(a, b);
    CHECK_FALSE(res.ordered);
    CHECK(res.worst_level == 1);
    CHECK(res.worst_unit == 0);
    CHECK(res.worst_gap == doctest::Approx(-0.2));
    CHECK(comparison_check(a, b, 0.25).ordered);
    DiscreteSolution c;
    c.Y = {{1.0}};
    CHECK_THROWS_AS(comparison_check(a, c), ConfigError);
}
