#include "scenesketch/geometry.hpp"

#include <cmath>

namespace ssk {

double Vec2::norm() const { return std::sqrt(x * x + y * y); }

std::string region_name(Region r) {
    switch (r) {
    case Region::Foreground: return "fg";
    case Region::Background: return "bg";
    case Region::Combined: return "combined";
    }
    return "?";
}

CanvasTransform CanvasTransform::inverse() const {
    if (scale == 0.0)
        throw std::invalid_argument("CanvasTransform: scale must be nonzero");
    return {1.0 / scale, {-translation.x / scale, -translation.y / scale}};
}

bool CanvasTransform::is_identity(double tol) const {
    return std::abs(scale - 1.0) <= tol && std::abs(translation.x) <= tol && std::abs(translation.y) <= tol;
}

Vec2 evaluate_bezier(const Stroke &stroke, double t) {
    if (t < 0.0 || t > 1.0)
        throw std::domain_error("evaluate_bezier: t must be in [0,1]");
    const double u = 1.0 - t;
    const double b0 = u * u * u;
    const double b1 = 3.0 * u * u * t;
    const double b2 = 3.0 * u * t * t;
    const double b3 = t * t * t;
    const auto &p = stroke.points;
    return p[0] * b0 + p[1] * b1 + p[2] * b2 + p[3] * b3;
}

Sketch apply_transform(const Sketch &sketch, const CanvasTransform &xf) {
    if (xf.scale <= 0.0)
        throw std::invalid_argument("apply_transform: scale must be positive");
    Sketch out = sketch;
    for (auto &s : out.strokes) {
        for (auto &p : s.points)
            p = xf.apply(p);
        s.width *= xf.scale;
    }
    return out;
}

} // namespace ssk
