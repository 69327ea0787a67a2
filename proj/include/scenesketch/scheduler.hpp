#pragma once

#include "scenesketch/geometry.hpp"

#include <vector>

namespace ssk {

// Factor sequence realizing the halving recursion f(j) = f(j-1)/2 sampled at a
// per-layer step: factors[j] = r1 * 2^(-j*step).
struct SimplificationSchedule {
    double r1 = 1.0;
    double step = 1.0;
    int num_levels = 8;
    std::vector<double> factors;
};

// r1 = 1 / clip_loss(S_k): a sparse loss of 1 means no simplification.
double initial_factor(double clip_loss_of_sk);

SimplificationSchedule build_schedule(double r1, double step, int num_levels);

// Per-layer sampling step sizes for layers {2,7,8,11}; other layers need an
// explicit override.
double default_steps(Region region, int layer);

} // namespace ssk
