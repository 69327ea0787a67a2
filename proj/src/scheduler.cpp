#include "scenesketch/scheduler.hpp"

#include <cmath>
#include <iostream>

namespace ssk {

double initial_factor(double clip_loss_of_sk) {
    constexpr double kEps = 1e-8;
    if (clip_loss_of_sk < kEps) {
        std::cerr << "warning: initial_factor clip loss " << clip_loss_of_sk << " clamped to " << kEps << "\n";
        clip_loss_of_sk = kEps;
    }
    return 1.0 / clip_loss_of_sk;
}

SimplificationSchedule build_schedule(double r1, double step, int num_levels) {
    if (r1 <= 0.0 || step <= 0.0 || num_levels < 1)
        throw std::domain_error("build_schedule: r1 > 0, step > 0, num_levels >= 1 required");
    SimplificationSchedule s;
    s.r1 = r1;
    s.step = step;
    s.num_levels = num_levels;
    s.factors.resize(num_levels);
    for (int j = 0; j < num_levels; ++j)
        s.factors[j] = r1 * std::exp2(-static_cast<double>(j) * step);
    return s;
}

double default_steps(Region region, int layer) {
    // background {2,7,8,11} -> {0.35, 0.45, 0.5, 0.9}
    // foreground {2,7,8,11} -> {0.45, 0.4, 0.5, 0.9}
    const int layers[4] = {2, 7, 8, 11};
    const double bg[4] = {0.35, 0.45, 0.5, 0.9};
    const double fg[4] = {0.45, 0.4, 0.5, 0.9};
    for (int i = 0; i < 4; ++i)
        if (layers[i] == layer)
            return region == Region::Background ? bg[i] : fg[i];
    throw std::invalid_argument("default_steps: no default for layer " + std::to_string(layer) +
                                "; defaults exist for layers 2, 7, 8, 11 (pass an explicit step size)");
}

} // namespace ssk
