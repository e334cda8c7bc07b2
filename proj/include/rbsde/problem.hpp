#pragma once

#include <functional>

#include "rbsde/common.hpp"
#include "rbsde/specs.hpp"
#include "rbsde/time_grid.hpp"

namespace rbsde {

/// RBSDE with parameter (g, T, xi, L) plus the forward dynamics the
/// Markovian solvers simulate under. The terminal condition is a function
/// of the terminal state and must dominate the obstacle there.
struct RBSDEProblem {
    GeneratorSpec gen;
    std::function<double(const Vec& x)> terminal;
    ObstacleSpec obs;
    TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 1);
    SDECoeffs forward;
    double origin_t = 0.0;
    Vec origin_x{0.0};

    double xi(double x) const { return terminal(Vec{x}); }
};

}  // namespace rbsde
