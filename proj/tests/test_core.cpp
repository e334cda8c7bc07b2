#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rbsde/expr.hpp"
#include "rbsde/io.hpp"
#include "rbsde/registry.hpp"
#include "rbsde/solution.hpp"
#include "rbsde/specs.hpp"
#include "rbsde/time_grid.hpp"

using namespace rbsde;

TEST_CASE("TimeGrid uniform") {
    const TimeGrid g = TimeGrid::uniform(0.25, 1.25, 4);
    CHECK(g.n_steps() == 4);
    CHECK(g.t0() == doctest::Approx(0.25));
    CHECK(g.horizon() == doctest::Approx(1.25));
    CHECK(g.node(2) == doctest::Approx(0.75));
    CHECK(g.dt(3) == doctest::Approx(0.25));
    CHECK(g.nearest_index(0.74) == 2);
    const TimeGrid p = g.prefix(2);
    CHECK(p.horizon() == doctest::Approx(0.75));
    CHECK_THROWS_AS(TimeGrid::uniform(1.0, 1.0, 4), ConfigError);
    CHECK_THROWS_AS(TimeGrid::uniform(-0.5, 1.0, 4), ConfigError);
    CHECK_THROWS_AS(TimeGrid::from_nodes({0.0, 0.5, 0.5, 1.0}), ConfigError);
}

TEST_CASE("validate_spec accepts conforming registry entries") {
    for (const char* gid : {"zero", "abs-z", "discount", "sqrt-cap"}) {
        const auto rep = validate_spec(make_generator(gid), make_coeffs("bm"),
                                       make_obstacle("constant"), 512, 7);
        CHECK_MESSAGE(rep.all_passed(), gid, ": ", rep.to_string());
    }
    const auto rep = validate_spec(make_generator("linear", {{{"a", 0.5}, {"beta", 0.5}}, ""}),
                                   make_coeffs("gbm"), make_obstacle("put"), 512, 7);
    CHECK(rep.all_passed());
}

TEST_CASE("validate_spec flags superlinear growth with a named sample") {
    GeneratorSpec g;  // y^2 violates |g| <= lambda*(gamma + |y| + |z|) once |y| > 2
    g.eval = [](double, double y, const Vec&) { return y * y; };
    g.lambda = 1.0;
    g.gamma = [](double) { return 1.0; };
    const SampleBox box{1.0, 5.0, 5.0, 5.0};
    const auto rep = validate_spec(g, make_coeffs("bm"), make_obstacle("constant"), 2048, 7, box);
    CHECK_FALSE(rep.all_passed());
    const auto& growth = rep.checks.front();
    CHECK_FALSE(growth.passed);
    CHECK(growth.worst_margin < 0.0);
    CHECK(growth.worst_point.find("y=") != std::string::npos);
}

TEST_CASE("validate_spec flags a false A3 declaration and a broken bound") {
    GeneratorSpec g = make_generator("constant", {{{"c", 1.0}}, ""});
    g.satisfies_A3 = true;  // lie: g(t,y,0) = 1
    ObstacleSpec obs = make_obstacle("linear-t", {{{"l0", 0.0}, {"slope", 2.0}, {"upper_bound", 1.0}}, ""});
    const auto rep = validate_spec(g, make_coeffs("bm"), obs, 512, 7);
    CHECK_FALSE(rep.all_passed());
    int failed = 0;
    for (const auto& c : rep.checks) failed += c.passed ? 0 : 1;
    CHECK(failed == 2);  // A3 and the obstacle upper bound
}

TEST_CASE("validate_spec is deterministic in the seed") {
    const auto a = validate_spec(make_generator("abs-z"), make_coeffs("gbm"),
                                 make_obstacle("put"), 256, 99);
    const auto b = validate_spec(make_generator("abs-z"), make_coeffs("gbm"),
                                 make_obstacle("put"), 256, 99);
    CHECK(a.to_string() == b.to_string());
}

TEST_CASE("expression parser") {
    CHECK(Expression("2 + 3*4").eval(0, 0, 0) == doctest::Approx(14.0));
    CHECK(Expression("abs(y) + abs(z)").eval(0, -2.0, 3.0) == doctest::Approx(5.0));
    CHECK(Expression("min(t, max(y, z))").eval(0.5, 0.2, 0.9) == doctest::Approx(0.5));
    CHECK(Expression("-y^2").eval(0, 3.0, 0) == doctest::Approx(-9.0));
    CHECK(Expression("exp(0) + sqrt(4) / 2").eval(0, 0, 0) == doctest::Approx(2.0));
    CHECK(Expression("pow(z, 3)").eval(0, 0, 2.0) == doctest::Approx(8.0));
    CHECK_THROWS_AS(Expression("2 +"), ConfigError);
    CHECK_THROWS_AS(Expression("foo(y)"), ConfigError);
    CHECK_THROWS_AS(Expression("y y"), ConfigError);
}

TEST_CASE("custom-expression generator routes through the parser") {
    const GeneratorSpec g = make_generator("custom-expression", {{{"lambda", 1.0}}, "abs(z) - y"});
    CHECK(g(0.0, 1.0, -2.0) == doctest::Approx(1.0));
}

TEST_CASE("check_solution invariants") {
    DiscreteSolution sol;
    sol.grid = TimeGrid::uniform(0.0, 1.0, 2);
    sol.Y = {{1.0}, {1.0, 1.0}, {1.0, 1.0, 1.0}};
    sol.Z = {{0.0}, {0.0, 0.0}};
    sol.dK = {{0.0}, {0.0, 0.0}};
    sol.L = {{0.0}, {0.0, 0.0}, {0.0, 0.0, 0.0}};
    CHECK(check_solution(sol).ok);

    SUBCASE("negative dK rejected") {
        sol.dK[1][0] = -1e-6;
        CHECK_FALSE(check_solution(sol).ok);
    }
    SUBCASE("Y below the obstacle rejected") {
        sol.Y[1][1] = -0.5;
        CHECK_FALSE(check_solution(sol).ok);
    }
    SUBCASE("terminal level exempt from domination") {
        sol.Y[2][0] = -0.5;  // xi may sit below L at T on stopped formulations
        CHECK(check_solution(sol, 1e-6, 1e-12).ok);
    }
    SUBCASE("Skorokhod defect: K charged far from the barrier rejected") {
        sol.dK[0][0] = 0.1;  // while Y - L = 1
        CHECK_FALSE(check_solution(sol).ok);
    }
}

TEST_CASE("binomial weights sum to one") {
    DiscreteSolution sol;
    sol.Y = {{0.0}, {0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0}};
    for (std::size_t i = 0; i < 4; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j <= i; ++j) s += sol.weight(i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("registry catalog covers the factories") {
    const auto& cat = registry_catalog();
    int gens = 0, obst = 0, sdes = 0;
    for (const auto& e : cat) {
        if (e.category == "generator") {
            ++gens;
            if (e.id != "custom-expression") CHECK_NOTHROW(make_generator(e.id));
        } else if (e.category == "obstacle") {
            ++obst;
            CHECK_NOTHROW(make_obstacle(e.id));
        } else if (e.category == "sde") {
            ++sdes;
            CHECK_NOTHROW(make_coeffs(e.id));
        }
    }
    CHECK(gens >= 6);
    CHECK(obst >= 5);
    CHECK(sdes >= 4);
    CHECK_THROWS_AS(make_generator("nope"), ConfigError);
    CHECK_THROWS_AS(make_obstacle("nope"), ConfigError);
    CHECK_THROWS_AS(make_coeffs("nope"), ConfigError);
    CHECK_THROWS_AS(make_terminal("nope"), ConfigError);
}

TEST_CASE("csv table fixed formatting") {
    CsvTable t({"a", "b"});
    t.row({1.0, 0.5}).row({1e-9, 123456789012.0});
    CHECK(t.to_string() == "a,b\n1,0.5\n1e-09,123456789012\n");
    CHECK_THROWS_AS(t.row({1.0}), ConfigError);
}

TEST_CASE("content hash is stable and content-sensitive") {
    CHECK(content_hash("") == "cbf29ce484222325");
    CHECK(content_hash("abc") == content_hash("abc"));
    CHECK(content_hash("abc") != content_hash("abd"));
}
