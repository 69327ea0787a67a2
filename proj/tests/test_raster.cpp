#include "scenesketch/raster.hpp"

#include <doctest.h>

#include <random>

using namespace ssk;

namespace {

Sketch random_sketch(int n, unsigned seed, int canvas = 64) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.15, 0.85);
    std::uniform_real_distribution<double> up(0.2, 1.0);
    Sketch sk;
    sk.canvas_size = canvas;
    for (int i = 0; i < n; ++i) {
        Stroke s;
        for (auto &p : s.points)
            p = {u(rng), u(rng)};
        s.width = 1.5;
        s.probability = up(rng);
        sk.strokes.push_back(s);
    }
    return sk;
}

double ink(const Image &img) {
    double s = 0;
    for (double p : img.px)
        s += 1.0 - p;
    return s;
}

} // namespace

TEST_CASE("empty sketch renders all white") {
    Sketch sk;
    sk.canvas_size = 32;
    Image img = SoftRasterizer().render(sk);
    for (double p : img.px)
        CHECK(p == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("pixels stay in [0,1]") {
    Image img = SoftRasterizer().render(random_sketch(12, 0));
    for (double p : img.px) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
}

TEST_CASE("p=0 renders white but keeps a live probability gradient") {
    Sketch sk = random_sketch(1, 1);
    sk.strokes[0].probability = 0.0;
    SoftRasterizer raster;
    Image img = raster.render(sk);
    for (double p : img.px)
        CHECK(p == doctest::Approx(1.0).epsilon(1e-12));

    // loss that darkens the stroke's path: dL/dpixel = 1 everywhere
    Image d_pixels(img.w, img.h, 1, 1.0);
    auto grads = raster.backward(sk, d_pixels);
    CHECK(std::abs(grads[0].d_prob) > 1e-9);
}

TEST_CASE("gradient check passes on 100 seeded small sketches") {
    int nan_failures = 0;
    double worst = 0.0;
    for (unsigned seed = 0; seed < 100; ++seed) {
        Sketch sk = random_sketch(1 + seed % 4, seed);
        GradCheckReport rep = SoftRasterizer().gradient_check(sk);
        if (rep.has_nan)
            ++nan_failures;
        worst = std::max(worst, rep.max_rel_error);
    }
    CHECK(nan_failures == 0);
    CHECK(worst < 1e-2);
}

TEST_CASE("degenerate coincident-control-point stroke stays finite") {
    Sketch sk;
    sk.canvas_size = 64;
    Stroke s;
    for (auto &p : s.points)
        p = {0.5, 0.5};
    s.probability = 0.8;
    sk.strokes.push_back(s);
    GradCheckReport rep = SoftRasterizer().gradient_check(sk);
    CHECK_FALSE(rep.has_nan);
}

TEST_CASE("decreasing any single probability never adds ink") {
    Sketch sk = random_sketch(5, 3);
    SoftRasterizer raster;
    Image base = raster.render(sk);
    for (size_t i = 0; i < sk.strokes.size(); ++i) {
        Sketch mod = sk;
        mod.strokes[i].probability *= 0.5;
        Image dimmer = raster.render(mod);
        for (size_t px = 0; px < base.px.size(); ++px)
            CHECK(dimmer.px[px] >= base.px[px] - 1e-12);
    }
}

TEST_CASE("whole-pixel translation shifts the image") {
    Sketch sk;
    sk.canvas_size = 64;
    Stroke s;
    s.points = {Vec2{0.3, 0.45}, {0.4, 0.55}, {0.55, 0.45}, {0.7, 0.55}};
    s.probability = 1.0;
    sk.strokes.push_back(s);
    SoftRasterizer raster;
    Image a = raster.render(sk);

    const int k = 3; // pixels
    Sketch shifted = sk;
    for (auto &p : shifted.strokes[0].points)
        p.x += static_cast<double>(k) / sk.canvas_size;
    Image b = raster.render(shifted);
    // compare interior with a margin wider than the soft falloff
    for (int y = 8; y < 56; ++y)
        for (int x = 8; x < 56 - k; ++x)
            CHECK(b.at(x + k, y) == doctest::Approx(a.at(x, y)).epsilon(1e-9));
}

TEST_CASE("rendering is deterministic") {
    Sketch sk = random_sketch(9, 5);
    Image a = SoftRasterizer().render(sk);
    Image b = SoftRasterizer().render(sk);
    CHECK(a.px == b.px);
}

TEST_CASE("serial reference and parallel kernel are bit-identical") {
    RasterSettings serial_cfg, omp_cfg;
    serial_cfg.parallel = false;
    omp_cfg.parallel = true;
    for (unsigned seed = 0; seed < 5; ++seed) {
        Sketch sk = random_sketch(16, seed, 96);
        Image a = SoftRasterizer(serial_cfg).render(sk);
        Image b = SoftRasterizer(omp_cfg).render(sk);
        CHECK(a.px == b.px);
        Image d(a.w, a.h, 1, 0.3);
        auto ga = SoftRasterizer(serial_cfg).backward(sk, d);
        auto gb = SoftRasterizer(omp_cfg).backward(sk, d);
        for (size_t i = 0; i < ga.size(); ++i) {
            CHECK(ga[i].d_prob == gb[i].d_prob);
            for (int k = 0; k < 4; ++k) {
                CHECK(ga[i].d_points[k].x == gb[i].d_points[k].x);
                CHECK(ga[i].d_points[k].y == gb[i].d_points[k].y);
            }
        }
    }
}

TEST_CASE("both kernels pass the same gradient tolerance") {
    RasterSettings omp_cfg;
    omp_cfg.parallel = true;
    Sketch sk = random_sketch(4, 0);
    GradCheckReport serial = SoftRasterizer().gradient_check(sk);
    GradCheckReport par = SoftRasterizer(omp_cfg).gradient_check(sk);
    CHECK(serial.max_rel_error < 1e-2);
    CHECK(par.max_rel_error < 1e-2);
}

TEST_CASE("larger probability always means at least as much ink") {
    Sketch sk = random_sketch(1, 9);
    SoftRasterizer raster;
    double prev = -1.0;
    for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        sk.strokes[0].probability = p;
        double total = ink(raster.render(sk));
        CHECK(total >= prev - 1e-12);
        prev = total;
    }
}

TEST_CASE("invalid canvas or oversized gradient check are rejected") {
    Sketch sk = random_sketch(9, 10);
    CHECK_THROWS(SoftRasterizer().gradient_check(sk)); // > 8 strokes
    Sketch bad = random_sketch(1, 11);
    bad.canvas_size = 0;
    CHECK_THROWS(SoftRasterizer().render(bad));
}
