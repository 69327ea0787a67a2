#include "scenesketch/losses.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ssk;

TEST_CASE("sparse loss is the mean probability") {
    CHECK(sparse_loss(std::vector<double>(64, 1.0)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(sparse_loss(std::vector<double>(64, 0.0)) == doctest::Approx(0.0).epsilon(1e-15));
    std::vector<double> mixed(64, 0.0);
    for (int i = 0; i < 16; ++i)
        mixed[i] = 1.0;
    CHECK(sparse_loss(mixed) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("out-of-range probabilities are a domain error") {
    CHECK_THROWS_AS(sparse_loss({0.5, 1.2}), std::domain_error);
    CHECK_THROWS_AS(sparse_loss({-0.1}), std::domain_error);
}

TEST_CASE("sparse loss is 1/n-Lipschitz in each probability") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> p(64);
    for (auto &x : p)
        x = u(rng);
    double base = sparse_loss(p);
    for (int i = 0; i < 64; i += 7) {
        std::vector<double> q = p;
        q[i] = u(rng);
        CHECK(std::abs(sparse_loss(q) - base) <= std::abs(q[i] - p[i]) / 64.0 + 1e-15);
    }
}

TEST_CASE("ratio loss at and away from its minimum") {
    CHECK(ratio_loss(0.5, 0.25, 2.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(ratio_loss(1.0, 0.5, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    double d_sparse = 123.0;
    ratio_loss(0.5, 0.25, 2.0, &d_sparse);
    CHECK(std::abs(d_sparse) < 1e-10); // gradient vanishes at the minimum
}

TEST_CASE("ratio loss gradient matches finite differences") {
    double eps = 1e-6, sparse = 0.7, clip = 0.4, r = 1.3;
    double g = 0.0;
    ratio_loss(sparse, clip, r, &g);
    double fd = (ratio_loss(sparse + eps, clip, r) - ratio_loss(sparse - eps, clip, r)) / (2 * eps);
    CHECK(g == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("tiny clip denominator is clamped, not infinite") {
    double v = ratio_loss(0.5, 1e-12, 1.0);
    CHECK(std::isfinite(v));
}

TEST_CASE("objective is the weighted sum of components") {
    LossBreakdown bd = simp_objective(0.2, 0.5, 0.1, {1.0, 1.0, 1.0});
    CHECK(bd.total == doctest::Approx(0.8).epsilon(1e-12));
    LossBreakdown bd2 = simp_objective(0.2, 0.5, 0.1, {2.0, 0.5, 1.5});
    CHECK(bd2.total == doctest::Approx(2.0 * 0.2 + 0.5 * 0.5 + 1.5 * 0.1).epsilon(1e-12));
}

TEST_CASE("NaN components raise instead of propagating") {
    CHECK_THROWS(simp_objective(std::nan(""), 0.5, 0.1, {1, 1, 1}));
}

TEST_CASE("balancing weights: symmetry, the worked two-loss case, positivity") {
    auto equal = gradnorm_weights({1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, 0.12);
    for (double w : equal)
        CHECK(w == doctest::Approx(1.0).epsilon(1e-12));

    // norms (2,1), alpha=0: weights proportional to (1/2, 1), normalized to sum 2.
    auto two = gradnorm_weights({2.0, 1.0}, {1.0, 1.0}, 0.0);
    CHECK(two[0] == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(two[1] == doctest::Approx(4.0 / 3).epsilon(1e-12));

    auto three = gradnorm_weights({0.3, 1.7, 0.9}, {1.1, 0.8, 1.4}, 0.12);
    double sum = 0;
    for (double w : three) {
        CHECK(w > 0.0);
        sum += w;
    }
    CHECK(sum == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("balancing weights are scale invariant in the norms") {
    auto a = gradnorm_weights({0.4, 2.0, 1.1}, {1.0, 0.9, 1.2}, 0.12);
    auto b = gradnorm_weights({0.4 * 37, 2.0 * 37, 1.1 * 37}, {1.0, 0.9, 1.2}, 0.12);
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-10));
}

TEST_CASE("zero gradient norm gets the weight cap") {
    auto w = gradnorm_weights({0.0, 1.0}, {1.0, 1.0}, 0.12, 10.0);
    CHECK(w[0] >= w[1]); // capped loss dominates after normalization
    CHECK(w[0] <= 10.0 + 1e-12);
}

namespace {

Image noise_image(int size, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    Image img(size, size, 1);
    for (auto &p : img.px)
        p = u(rng);
    return img;
}

} // namespace

TEST_CASE("activation-space L2: zero on identical inputs, symmetric, matches manual recomputation") {
    ToyEncoder enc(32, 16, 11, 99);
    std::vector<int> layers{2, 7};
    Image a = noise_image(32, 1), b = noise_image(32, 2);

    CHECK(clip_loss(a, a, layers, enc) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(clip_loss(a, b, layers, enc) == doctest::Approx(clip_loss(b, a, layers, enc)).epsilon(1e-10));

    // independent recomputation from raw activations
    LayerActivations fa = enc.encode(a, layers), fb = enc.encode(b, layers);
    double manual = 0.0;
    for (int l : layers)
        manual += (fa.layers.at(l) - fb.layers.at(l)).squaredNorm();
    CHECK(clip_loss(a, b, layers, enc) == doctest::Approx(manual).epsilon(1e-6));
}

TEST_CASE("mismatched resolutions raise a shape error") {
    ToyEncoder enc(32, 16, 11, 99);
    Image a = noise_image(32, 1), b = noise_image(16, 2);
    CHECK_THROWS(clip_loss(a, b, {2}, enc));
}
