#pragma once

#include <cstddef>

#include "rbsde/common.hpp"

namespace rbsde {

/// Partition of [t0, T] into n_steps intervals. Uniform unless built from
/// explicit nodes.
class TimeGrid {
public:
    static TimeGrid uniform(double t0, double T, std::size_t n_steps) {
        require(t0 >= 0.0 && t0 < T, "TimeGrid: need 0 <= t0 < T");
        require(n_steps >= 1, "TimeGrid: need n_steps >= 1");
        Vec nodes(n_steps + 1);
        const double dt = (T - t0) / static_cast<double>(n_steps);
        for (std::size_t i = 0; i <= n_steps; ++i)
            nodes[i] = t0 + dt * static_cast<double>(i);
        nodes[n_steps] = T;
        return TimeGrid(std::move(nodes));
    }

    static TimeGrid from_nodes(Vec nodes) { return TimeGrid(std::move(nodes)); }

    double t0() const { return nodes_.front(); }
    double horizon() const { return nodes_.back(); }
    std::size_t n_steps() const { return nodes_.size() - 1; }
    double node(std::size_t i) const { return nodes_[i]; }
    double dt(std::size_t i) const { return nodes_[i + 1] - nodes_[i]; }
    const Vec& nodes() const { return nodes_; }

    /// Index of the grid node closest to time t.
    std::size_t nearest_index(double t) const {
        std::size_t best = 0;
        double d = std::abs(nodes_[0] - t);
        for (std::size_t i = 1; i < nodes_.size(); ++i) {
            const double di = std::abs(nodes_[i] - t);
            if (di < d) { d = di; best = i; }
        }
        return best;
    }

    /// First n_steps intervals of this grid.
    TimeGrid prefix(std::size_t n_steps) const {
        require(n_steps >= 1 && n_steps <= this->n_steps(), "TimeGrid::prefix: bad length");
        return TimeGrid(Vec(nodes_.begin(), nodes_.begin() + n_steps + 1));
    }

private:
    explicit TimeGrid(Vec nodes) : nodes_(std::move(nodes)) {
        require(nodes_.size() >= 2, "TimeGrid: need at least 2 nodes");
        require(nodes_.front() >= 0.0, "TimeGrid: t0 must be >= 0");
        for (std::size_t i = 0; i + 1 < nodes_.size(); ++i)
            require(nodes_[i] < nodes_[i + 1], "TimeGrid: nodes must be strictly increasing");
    }

    Vec nodes_;
};

}  // namespace rbsde
