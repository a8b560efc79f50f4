#pragma once

// Affine Markovian feedback alpha(t,x) = slope(t)*x + intercept(t), sampled on
// the model's time grid.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "meanfield/lq_model.hpp"
#include "meanfield/time_grid.hpp"

namespace meanfield {

struct FeedbackPolicy {
    Sampled slope;
    Sampled intercept;

    FeedbackPolicy() = default;
    FeedbackPolicy(Sampled s, Sampled c) : slope(std::move(s)), intercept(std::move(c)) {
        if (slope.n_nodes() != intercept.n_nodes())
            throw std::invalid_argument("FeedbackPolicy: slope/intercept length mismatch");
    }

    int n_nodes() const { return slope.n_nodes(); }
    double eval(int k, double x) const { return slope[k] * x + intercept[k]; }

    static FeedbackPolicy zero(const TimeGrid& grid) {
        return FeedbackPolicy(Sampled(grid, 0.0), Sampled(grid, 0.0));
    }

    FeedbackPolicy perturbed(const TimeGrid& grid, double dslope, double dintercept) const {
        std::vector<double> s(slope.values()), c(intercept.values());
        for (double& v : s) v += dslope;
        for (double& v : c) v += dintercept;
        return FeedbackPolicy(Sampled(grid, std::move(s)), Sampled(grid, std::move(c)));
    }
};

}  // namespace meanfield
