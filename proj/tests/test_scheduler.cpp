#include "scenesketch/scheduler.hpp"

#include <doctest.h>

#include <cmath>

using namespace ssk;

TEST_CASE("reciprocal initial factor") {
    CHECK(initial_factor(4.0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(initial_factor(1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(initial_factor(0.5) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("tiny clip loss clamps instead of dividing by zero") {
    double r = initial_factor(1e-12);
    CHECK(std::isfinite(r));
    CHECK(r == doctest::Approx(1e8));
}

TEST_CASE("unit step gives pure halving") {
    SimplificationSchedule s = build_schedule(1.0, 1.0, 4);
    REQUIRE(s.factors.size() == 4);
    double expected[] = {1.0, 0.5, 0.25, 0.125};
    for (int j = 0; j < 4; ++j)
        CHECK(std::abs(s.factors[j] - expected[j]) < 1e-12);
}

TEST_CASE("fractional steps follow the closed form") {
    SimplificationSchedule s = build_schedule(1.0, 0.5, 3);
    CHECK(s.factors[1] == doctest::Approx(0.70710678).epsilon(1e-8));
    CHECK(s.factors[2] == doctest::Approx(0.5).epsilon(1e-12));

    SimplificationSchedule t = build_schedule(0.25, 0.9, 2);
    CHECK(t.factors[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(t.factors[1] == doctest::Approx(0.25 * std::exp2(-0.9)).epsilon(1e-12));
    CHECK(t.factors[1] == doctest::Approx(0.13397).epsilon(1e-4));
}

TEST_CASE("factors strictly decrease and log2 is affine in the level index") {
    SimplificationSchedule s = build_schedule(0.7, 0.45, 8);
    for (size_t j = 1; j < s.factors.size(); ++j) {
        CHECK(s.factors[j] < s.factors[j - 1]);
        double slope = std::log2(s.factors[j]) - std::log2(s.factors[j - 1]);
        CHECK(slope == doctest::Approx(-0.45).epsilon(1e-10));
    }
}

TEST_CASE("doubling the step halves the levels needed") {
    SimplificationSchedule fine = build_schedule(1.0, 0.35, 8);
    SimplificationSchedule coarse = build_schedule(1.0, 0.7, 4);
    for (int j = 0; j < 4; ++j)
        CHECK(coarse.factors[j] == doctest::Approx(fine.factors[2 * j]).epsilon(1e-12));
}

TEST_CASE("default step tables") {
    CHECK(default_steps(Region::Background, 2) == doctest::Approx(0.35));
    CHECK(default_steps(Region::Background, 7) == doctest::Approx(0.45));
    CHECK(default_steps(Region::Background, 8) == doctest::Approx(0.5));
    CHECK(default_steps(Region::Background, 11) == doctest::Approx(0.9));
    CHECK(default_steps(Region::Foreground, 2) == doctest::Approx(0.45));
    CHECK(default_steps(Region::Foreground, 7) == doctest::Approx(0.4));
    CHECK(default_steps(Region::Foreground, 8) == doctest::Approx(0.5));
    CHECK(default_steps(Region::Foreground, 11) == doctest::Approx(0.9));
}

TEST_CASE("layers without a default step are a configuration error") {
    CHECK_THROWS_AS(default_steps(Region::Background, 5), std::invalid_argument);
    try {
        default_steps(Region::Foreground, 3);
    } catch (const std::invalid_argument &e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos); // lists the valid layers
    }
}

TEST_CASE("invalid schedule inputs are domain errors") {
    CHECK_THROWS_AS(build_schedule(0.0, 1.0, 4), std::domain_error);
    CHECK_THROWS_AS(build_schedule(1.0, 0.0, 4), std::domain_error);
    CHECK_THROWS_AS(build_schedule(1.0, 1.0, 0), std::domain_error);
}
