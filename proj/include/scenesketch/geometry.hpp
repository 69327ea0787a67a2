#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssk {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2 &o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2 &o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2 &o) const { return x * o.x + y * o.y; }
    double norm() const;
};

enum class Region : std::uint8_t { Foreground, Background, Combined };

std::string region_name(Region r);

// One cubic Bezier stroke. Control points live in normalized [0,1]^2 canvas
// coordinates (they may drift outside during optimization; we do not clamp).
// The rendered width is width * probability.
struct Stroke {
    std::array<Vec2, 4> points{};
    double width = 1.5;       // pixels at render resolution
    double probability = 1.0; // gate p in [0,1]
    Region region = Region::Foreground;
};

struct Sketch {
    std::vector<Stroke> strokes;
    int canvas_size = 224;
    int fidelity_level = 0;   // encoder layer index
    int simplicity_level = 0;
    Region region = Region::Combined;
};

// p -> scale * p + translation, widths multiplied by scale.
struct CanvasTransform {
    double scale = 1.0;
    Vec2 translation{0.0, 0.0};

    CanvasTransform inverse() const;
    Vec2 apply(const Vec2 &p) const { return {scale * p.x + translation.x, scale * p.y + translation.y}; }
    bool is_identity(double tol = 1e-12) const;
};

Vec2 evaluate_bezier(const Stroke &stroke, double t);

Sketch apply_transform(const Sketch &sketch, const CanvasTransform &xf);

} // namespace ssk
