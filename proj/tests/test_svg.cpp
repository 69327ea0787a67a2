#include "scenesketch/svg.hpp"

#include <doctest.h>

#include <random>

using namespace ssk;

namespace {

Sketch random_sketch(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    Sketch sk;
    for (int i = 0; i < n; ++i) {
        Stroke s;
        for (auto &p : s.points)
            p = {u(rng), u(rng)};
        s.probability = u(rng);
        sk.strokes.push_back(s);
    }
    return sk;
}

} // namespace

TEST_CASE("all strokes visible at p=1, none at p=0") {
    Sketch sk = random_sketch(10, 1);
    for (auto &s : sk.strokes)
        s.probability = 1.0;
    CHECK(import_svg(export_svg(sk, 0.1)).strokes.size() == 10);
    for (auto &s : sk.strokes)
        s.probability = 0.0;
    CHECK(import_svg(export_svg(sk, 0.1)).strokes.empty());
}

TEST_CASE("export-import round trip preserves control points within 1e-6") {
    Sketch sk = random_sketch(64, 2);
    for (auto &s : sk.strokes)
        s.probability = 1.0;
    Sketch back = import_svg(export_svg(sk));
    REQUIRE(back.strokes.size() == 64);
    CHECK(back.canvas_size == sk.canvas_size);
    for (size_t i = 0; i < sk.strokes.size(); ++i)
        for (int k = 0; k < 4; ++k) {
            CHECK(std::abs(back.strokes[i].points[k].x - sk.strokes[i].points[k].x) < 1e-6);
            CHECK(std::abs(back.strokes[i].points[k].y - sk.strokes[i].points[k].y) < 1e-6);
        }
}

TEST_CASE("export-import-export is byte identical") {
    Sketch sk = random_sketch(32, 3);
    std::string first = export_svg(sk, 0.1);
    std::string second = export_svg(import_svg(first), 0.1);
    CHECK(first == second);
}

TEST_CASE("visible stroke count matches threshold rule") {
    Sketch sk = random_sketch(64, 4);
    double threshold = 0.1;
    size_t expected = 0;
    for (const auto &s : sk.strokes)
        if (s.probability >= threshold)
            ++expected;
    CHECK(import_svg(export_svg(sk, threshold)).strokes.size() == expected);
}

TEST_CASE("empty sketch yields a valid empty document") {
    Sketch sk;
    std::string doc = export_svg(sk);
    CHECK(doc.find("<svg") != std::string::npos);
    CHECK(import_svg(doc).strokes.empty());
}

TEST_CASE("hand-written single path parses to the given control points") {
    // Oracle: coordinates parsed by hand, in pixels on a 224 canvas.
    std::string doc =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"224\" height=\"224\">"
        "<path d=\"M 11.2 22.4 C 44.8 56.0, 89.6 112.0, 134.4 168.0\" "
        "stroke=\"black\" fill=\"none\" stroke-width=\"1.5\" stroke-linecap=\"round\"/></svg>";
    Sketch sk = import_svg(doc);
    REQUIRE(sk.strokes.size() == 1);
    CHECK(sk.strokes[0].points[0].x == doctest::Approx(11.2 / 224));
    CHECK(sk.strokes[0].points[0].y == doctest::Approx(22.4 / 224));
    CHECK(sk.strokes[0].points[1].x == doctest::Approx(44.8 / 224));
    CHECK(sk.strokes[0].points[2].y == doctest::Approx(112.0 / 224));
    CHECK(sk.strokes[0].points[3].x == doctest::Approx(134.4 / 224));
    CHECK(sk.strokes[0].points[3].y == doctest::Approx(168.0 / 224));
    CHECK(sk.strokes[0].probability == 1.0);
}

TEST_CASE("imported strokes always get probability 1") {
    Sketch sk = random_sketch(6, 5);
    for (auto &s : sk.strokes)
        s.probability = 0.4;
    Sketch back = import_svg(export_svg(sk, 0.1));
    for (const auto &s : back.strokes)
        CHECK(s.probability == 1.0);
}

TEST_CASE("malformed paths name the offending path index") {
    std::string multi =
        "<svg width=\"224\" height=\"224\"><path d=\"M 0 0 C 1 1, 2 2, 3 3 C 4 4, 5 5, 6 6\" "
        "stroke=\"black\"/></svg>";
    CHECK_THROWS_AS(import_svg(multi), SvgParseError);
    try {
        import_svg(multi);
    } catch (const SvgParseError &e) {
        CHECK(std::string(e.what()).find("0") != std::string::npos);
    }
    std::string quad = "<svg width=\"224\" height=\"224\"><path d=\"M 0 0 Q 1 1, 2 2\"/></svg>";
    CHECK_THROWS_AS(import_svg(quad), SvgParseError);
}

TEST_CASE("stroke-width attribute is width times probability") {
    Sketch sk;
    Stroke s;
    s.points = {Vec2{0.1, 0.1}, {0.3, 0.3}, {0.6, 0.6}, {0.9, 0.9}};
    s.width = 2.0;
    s.probability = 0.5;
    sk.strokes.push_back(s);
    std::string doc = export_svg(sk, 0.1);
    CHECK(doc.find("stroke-width=\"1.000000\"") != std::string::npos);
}
