#pragma once

#include "scenesketch/image.hpp"

#include <array>
#include <random>

namespace ssk {

// Random perspective + random crop, sampled once and applied identically to
// the sketch render and the target within one loss evaluation. The warp is
// linear in the input pixels (bilinear sampling), so backward() scatters the
// interpolation weights.
class AffineAugment {
public:
    // Homography mapping output coordinates to input coordinates, row major.
    std::array<double, 9> h{1, 0, 0, 0, 1, 0, 0, 0, 1};
    double fill = 1.0; // white, matches the sketch background

    static AffineAugment sample(std::mt19937 &rng, int size, double perspective = 0.3,
                                double crop_min = 0.8, double crop_max = 1.0);

    Image apply(const Image &img) const;
    Image backward(const Image &grad_out, int in_w, int in_h, int in_c) const;
};

} // namespace ssk
