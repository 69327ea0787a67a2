#pragma once

#include "scenesketch/geometry.hpp"
#include "scenesketch/image.hpp"

#include <array>
#include <vector>

namespace ssk {

// Grayscale canvas in [0,1]; 1 = white background, 0 = full ink.
using RasterImage = Image;

struct RasterSettings {
    double softness = 1.0;   // anti-alias falloff in pixels
    double smin_temp = 0.5;  // soft-min temperature over flattened segments (px)
    int segments = 32;       // de Casteljau flattening count
    double cutoff = 14.0;    // bbox inflation, in softness units
    bool parallel = false;   // OpenMP kernel vs serial reference
};

struct StrokeGrad {
    std::array<Vec2, 4> d_points{}; // in normalized coordinates
    double d_width = 0.0;
    double d_prob = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::vector<double> per_parameter; // control coords, then width, prob per stroke
    bool has_nan = false;
};

// Soft-coverage renderer. Each stroke contributes coverage
//   alpha = sigmoid((h - d)/softness) - sigmoid((-h - d)/softness),
// h = width*p/2, d = soft-min distance to the flattened curve, so coverage
// vanishes exactly at p=0 while d(alpha)/dp stays positive (the gating rule).
// Strokes composite multiplicatively: pixel = prod(1 - alpha_s).
class SoftRasterizer {
public:
    explicit SoftRasterizer(RasterSettings settings = {}) : settings_(settings) {}

    const RasterSettings &settings() const { return settings_; }

    RasterImage render(const Sketch &sketch) const;

    // Adjoint: given dLoss/dpixel, returns per-stroke parameter gradients.
    // Recomputes forward state; callers pass the same sketch they rendered.
    std::vector<StrokeGrad> backward(const Sketch &sketch, const Image &d_pixels) const;

    // Compares analytic gradients of sum((1-pixel)^2) against central finite
    // differences (step 1e-3 in each parameter's units; coordinates are
    // stepped in pixels) over every control coordinate, width and
    // probability. Runs without the bbox cutoff so the difference quotient
    // sees the smooth coverage model. Relative error uses
    // max(|fd|, 1e-3*max|fd|) as denominator.
    GradCheckReport gradient_check(const Sketch &sketch) const;

private:
    RasterSettings settings_;
};

} // namespace ssk
