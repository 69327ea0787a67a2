#include "scenesketch/raster.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ssk {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double dsigmoid(double x) {
    double s = sigmoid(x);
    return s * (1.0 - s);
}

struct PolyCache {
    std::vector<Vec2> pts;                   // flattened curve, pixel coords
    std::vector<std::array<double, 4>> basis; // Bernstein basis at each sample
};

PolyCache flatten(const Stroke &stroke, int canvas, int segments) {
    PolyCache pc;
    pc.pts.resize(segments + 1);
    pc.basis.resize(segments + 1);
    for (int i = 0; i <= segments; ++i) {
        double t = static_cast<double>(i) / segments;
        double u = 1.0 - t;
        std::array<double, 4> b{u * u * u, 3 * u * u * t, 3 * u * t * t, t * t * t};
        pc.basis[i] = b;
        Vec2 p{0, 0};
        for (int k = 0; k < 4; ++k)
            p = p + stroke.points[k] * (b[k] * canvas);
        pc.pts[i] = p;
    }
    return pc;
}

// |q - c| has a derivative kink where a pixel centre lies exactly on the
// curve; smoothing with sqrt(r^2 + eps^2) keeps the coverage differentiable
// everywhere at a sub-hundredth-pixel cost.
constexpr double kDistEps = 0.01; // pixels

// Smoothed distance from q to segment [a,b]; t_out is the clamped projection
// parameter.
inline double seg_dist(const Vec2 &q, const Vec2 &a, const Vec2 &b, double &t_out) {
    Vec2 ab = b - a;
    double len2 = ab.dot(ab);
    double t = 0.0;
    if (len2 > 1e-18)
        t = std::clamp((q - a).dot(ab) / len2, 0.0, 1.0);
    t_out = t;
    Vec2 c = a + ab * t;
    return std::sqrt((q - c).dot(q - c) + kDistEps * kDistEps);
}

// Soft-min distance over segments; when w != nullptr also fills per-segment
// soft-min weights and projection parameters for the adjoint.
double soft_distance(const Vec2 &q, const std::vector<Vec2> &pts, double temp,
                     std::vector<double> *w, std::vector<double> *tproj) {
    const int nseg = static_cast<int>(pts.size()) - 1;
    double dmin = 1e300;
    thread_local std::vector<double> dbuf, tbuf;
    dbuf.resize(nseg);
    tbuf.resize(nseg);
    for (int i = 0; i < nseg; ++i) {
        double t;
        dbuf[i] = seg_dist(q, pts[i], pts[i + 1], t);
        tbuf[i] = t;
        dmin = std::min(dmin, dbuf[i]);
    }
    double sum = 0.0;
    for (int i = 0; i < nseg; ++i)
        sum += std::exp(-(dbuf[i] - dmin) / temp);
    if (w) {
        w->resize(nseg);
        for (int i = 0; i < nseg; ++i)
            (*w)[i] = std::exp(-(dbuf[i] - dmin) / temp) / sum;
        *tproj = tbuf;
    }
    return dmin - temp * std::log(sum);
}

struct Cover {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1; // inclusive; x1<x0 means empty
    std::vector<double> alpha;

    int width() const { return x1 - x0 + 1; }
    bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    double a(int x, int y) const { return alpha[static_cast<size_t>(y - y0) * width() + (x - x0)]; }
};

inline double half_width(const Stroke &s) { return 0.5 * s.width * s.probability; }

Cover make_cover(const Stroke &stroke, const PolyCache &pc, int canvas, const RasterSettings &st) {
    Cover cv;
    double margin = half_width(stroke) + st.cutoff * st.softness + st.smin_temp + 1.0;
    double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
    for (const auto &p : pc.pts) {
        minx = std::min(minx, p.x);
        miny = std::min(miny, p.y);
        maxx = std::max(maxx, p.x);
        maxy = std::max(maxy, p.y);
    }
    cv.x0 = std::max(0, static_cast<int>(std::floor(minx - margin)));
    cv.y0 = std::max(0, static_cast<int>(std::floor(miny - margin)));
    cv.x1 = std::min(canvas - 1, static_cast<int>(std::ceil(maxx + margin)));
    cv.y1 = std::min(canvas - 1, static_cast<int>(std::ceil(maxy + margin)));
    if (cv.x1 < cv.x0 || cv.y1 < cv.y0) {
        cv.x1 = cv.x0 - 1;
        return cv;
    }
    const double h = half_width(stroke);
    cv.alpha.resize(static_cast<size_t>(cv.width()) * (cv.y1 - cv.y0 + 1));
    size_t idx = 0;
    for (int y = cv.y0; y <= cv.y1; ++y)
        for (int x = cv.x0; x <= cv.x1; ++x, ++idx) {
            Vec2 q{x + 0.5, y + 0.5};
            double d = soft_distance(q, pc.pts, st.smin_temp, nullptr, nullptr);
            cv.alpha[idx] = sigmoid((h - d) / st.softness) - sigmoid((-h - d) / st.softness);
        }
    return cv;
}

} // namespace

RasterImage SoftRasterizer::render(const Sketch &sketch) const {
    const int canvas = sketch.canvas_size;
    if (canvas <= 0)
        throw std::invalid_argument("render: canvas_size must be positive");
    const int n = static_cast<int>(sketch.strokes.size());
    std::vector<Cover> covers(n);
#pragma omp parallel for schedule(dynamic) if (settings_.parallel)
    for (int s = 0; s < n; ++s) {
        PolyCache pc = flatten(sketch.strokes[s], canvas, settings_.segments);
        covers[s] = make_cover(sketch.strokes[s], pc, canvas, settings_);
    }
    RasterImage img(canvas, canvas, 1, 1.0);
    // Strokes composite in index order so output bits do not depend on the
    // thread count.
    for (int s = 0; s < n; ++s) {
        const Cover &cv = covers[s];
        size_t idx = 0;
        for (int y = cv.y0; y <= cv.y1; ++y)
            for (int x = cv.x0; x <= cv.x1; ++x, ++idx)
                img.at(x, y) *= 1.0 - cv.alpha[idx];
    }
    return img;
}

std::vector<StrokeGrad> SoftRasterizer::backward(const Sketch &sketch, const Image &d_pixels) const {
    const int canvas = sketch.canvas_size;
    if (canvas <= 0)
        throw std::invalid_argument("backward: canvas_size must be positive");
    if (d_pixels.w != canvas || d_pixels.h != canvas || d_pixels.c != 1)
        throw std::invalid_argument("backward: gradient image shape mismatch");
    const int n = static_cast<int>(sketch.strokes.size());

    std::vector<PolyCache> polys(n);
    std::vector<Cover> covers(n);
#pragma omp parallel for schedule(dynamic) if (settings_.parallel)
    for (int s = 0; s < n; ++s) {
        polys[s] = flatten(sketch.strokes[s], canvas, settings_.segments);
        covers[s] = make_cover(sketch.strokes[s], polys[s], canvas, settings_);
    }
    Image value(canvas, canvas, 1, 1.0);
    for (int s = 0; s < n; ++s) {
        const Cover &cv = covers[s];
        size_t idx = 0;
        for (int y = cv.y0; y <= cv.y1; ++y)
            for (int x = cv.x0; x <= cv.x1; ++x, ++idx)
                value.at(x, y) *= 1.0 - cv.alpha[idx];
    }

    std::vector<StrokeGrad> grads(n);
#pragma omp parallel for schedule(dynamic) if (settings_.parallel)
    for (int s = 0; s < n; ++s) {
        const Stroke &stroke = sketch.strokes[s];
        const Cover &cv = covers[s];
        const auto &pts = polys[s].pts;
        const auto &basis = polys[s].basis;
        const double h = half_width(stroke);
        const double soft = settings_.softness;
        StrokeGrad g;
        std::vector<double> w, tproj;
        size_t idx = 0;
        for (int y = cv.y0; y <= cv.y1; ++y)
            for (int x = cv.x0; x <= cv.x1; ++x, ++idx) {
                double dpix = d_pixels.at(x, y);
                if (dpix == 0.0)
                    continue;
                double one_minus = std::max(1.0 - cv.alpha[idx], 1e-12);
                double prod_others = value.at(x, y) / one_minus;
                double d_alpha = -dpix * prod_others;

                Vec2 q{x + 0.5, y + 0.5};
                double d = soft_distance(q, pts, settings_.smin_temp, &w, &tproj);
                double sa = dsigmoid((h - d) / soft) / soft;
                double sb = dsigmoid((-h - d) / soft) / soft;
                double dalpha_dh = sa + sb;
                double dalpha_dd = -sa + sb;

                double dh = d_alpha * dalpha_dh;
                g.d_prob += dh * 0.5 * stroke.width;
                g.d_width += dh * 0.5 * stroke.probability;

                double dd = d_alpha * dalpha_dd;
                if (dd == 0.0)
                    continue;
                const int nseg = static_cast<int>(pts.size()) - 1;
                for (int i = 0; i < nseg; ++i) {
                    if (w[i] < 1e-12)
                        continue;
                    double t = tproj[i];
                    Vec2 c = pts[i] + (pts[i + 1] - pts[i]) * t;
                    Vec2 diff = q - c;
                    // gradient of the smoothed distance; never degenerate
                    double dist = std::sqrt(diff.dot(diff) + kDistEps * kDistEps);
                    Vec2 dir = diff * (1.0 / dist);
                    // envelope theorem: treat the projection parameter as fixed
                    Vec2 ga = dir * (-(1.0 - t) * dd * w[i]);
                    Vec2 gb = dir * (-t * dd * w[i]);
                    for (int k = 0; k < 4; ++k) {
                        g.d_points[k] = g.d_points[k] + ga * (basis[i][k] * canvas);
                        g.d_points[k] = g.d_points[k] + gb * (basis[i + 1][k] * canvas);
                    }
                }
            }
        grads[s] = g;
    }
    return grads;
}

GradCheckReport SoftRasterizer::gradient_check(const Sketch &sketch) const {
    if (sketch.strokes.size() > 8)
        throw std::domain_error("gradient_check: at most 8 strokes");

    // The bbox cutoff truncates alpha tails at ~1e-6; a perturbation that
    // shifts the integer bbox by one pixel turns that into a jump in the
    // difference quotient. The check targets the smooth coverage model, so
    // evaluate both sides without the cutoff (full-canvas covers).
    RasterSettings exact_settings = settings_;
    exact_settings.cutoff = 1e9;
    SoftRasterizer exact(exact_settings);

    auto functional = [&](const Sketch &sk) {
        RasterImage img = exact.render(sk);
        double f = 0.0;
        for (double v : img.px) {
            double ink = 1.0 - v;
            f += ink * ink;
        }
        return f;
    };

    // Analytic gradient of sum((1-pixel)^2).
    RasterImage img = exact.render(sketch);
    Image dpix(img.w, img.h, 1);
    for (size_t i = 0; i < img.px.size(); ++i)
        dpix.px[i] = -2.0 * (1.0 - img.px[i]);
    std::vector<StrokeGrad> an = exact.backward(sketch, dpix);

    const double step = 1e-3;
    // Control coordinates are stored normalized; step them by 1e-3 *pixels*
    // so the difference quotient resolves the soft-min curvature.
    const double coord_step = step / sketch.canvas_size;
    std::vector<double> analytic, fd;
    Sketch work = sketch;
    for (size_t s = 0; s < sketch.strokes.size(); ++s) {
        for (int k = 0; k < 4; ++k)
            for (int axis = 0; axis < 2; ++axis) {
                double &coord = axis == 0 ? work.strokes[s].points[k].x : work.strokes[s].points[k].y;
                double orig = coord;
                coord = orig + coord_step;
                double fp = functional(work);
                coord = orig - coord_step;
                double fm = functional(work);
                coord = orig;
                fd.push_back((fp - fm) / (2 * coord_step));
                analytic.push_back(axis == 0 ? an[s].d_points[k].x : an[s].d_points[k].y);
            }
        {
            double orig = work.strokes[s].width;
            work.strokes[s].width = orig + step;
            double fp = functional(work);
            work.strokes[s].width = orig - step;
            double fm = functional(work);
            work.strokes[s].width = orig;
            fd.push_back((fp - fm) / (2 * step));
            analytic.push_back(an[s].d_width);
        }
        {
            double orig = work.strokes[s].probability;
            work.strokes[s].probability = orig + step;
            double fp = functional(work);
            work.strokes[s].probability = orig - step;
            double fm = functional(work);
            work.strokes[s].probability = orig;
            fd.push_back((fp - fm) / (2 * step));
            analytic.push_back(an[s].d_prob);
        }
    }

    GradCheckReport rep;
    double max_fd = 0.0;
    for (double v : fd)
        max_fd = std::max(max_fd, std::abs(v));
    for (size_t i = 0; i < fd.size(); ++i) {
        if (std::isnan(analytic[i]) || std::isnan(fd[i]))
            rep.has_nan = true;
        double denom = std::max({std::abs(fd[i]), 1e-3 * max_fd, 1e-12});
        double rel = std::abs(analytic[i] - fd[i]) / denom;
        rep.per_parameter.push_back(rel);
        rep.max_rel_error = std::max(rep.max_rel_error, rel);
    }
    return rep;
}

} // namespace ssk
