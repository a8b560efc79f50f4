#pragma once

// Uniform time grid on [0, T].

#include <stdexcept>
#include <vector>

namespace meanfield {

class TimeGrid {
public:
    TimeGrid(double horizon, int n_steps)
        : horizon_(horizon), n_steps_(n_steps), dt_(horizon / n_steps) {
        if (!(horizon > 0.0))
            throw std::invalid_argument("TimeGrid: horizon must be positive");
        if (n_steps < 2)
            throw std::invalid_argument("TimeGrid: need at least 2 steps");
    }

    double horizon() const { return horizon_; }
    int n_steps() const { return n_steps_; }
    int n_nodes() const { return n_steps_ + 1; }
    double dt() const { return dt_; }

    // Node k = 0..n_steps; the last node is pinned so that t(n_steps) == horizon exactly.
    double t(int k) const { return k == n_steps_ ? horizon_ : k * dt_; }
    // Midpoint of step k (between nodes k and k+1).
    double t_mid(int k) const { return 0.5 * (t(k) + t(k + 1)); }

    std::vector<double> nodes() const {
        std::vector<double> out(n_nodes());
        for (int k = 0; k < n_nodes(); ++k) out[k] = t(k);
        return out;
    }

    bool same_as(const TimeGrid& o) const {
        return horizon_ == o.horizon_ && n_steps_ == o.n_steps_;
    }

private:
    double horizon_;
    int n_steps_;
    double dt_;
};

inline TimeGrid make_grid(double horizon, int n_steps) { return TimeGrid(horizon, n_steps); }

}  // namespace meanfield
