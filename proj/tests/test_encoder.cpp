#include "scenesketch/encoder.hpp"
#include "scenesketch/vit.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

using namespace ssk;

namespace {

Image noise_image(int size, unsigned seed, int channels = 1) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    Image img(size, size, channels);
    for (auto &p : img.px)
        p = u(rng);
    return img;
}

} // namespace

TEST_CASE("patch encoder is deterministic") {
    ToyEncoder enc(32, 16, 11, 5);
    Image img = noise_image(32, 1);
    LayerActivations a = enc.encode(img, {2, 7, 11});
    LayerActivations b = enc.encode(img, {2, 7, 11});
    for (int l : {2, 7, 11})
        CHECK((a.layers.at(l) - b.layers.at(l)).norm() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("white and black images map to distinct activations") {
    ToyEncoder enc(32, 16, 11, 5);
    Image white(32, 32, 1, 1.0), black(32, 32, 1, 0.0);
    LayerActivations a = enc.encode(white, {2}), b = enc.encode(black, {2});
    CHECK((a.layers.at(2) - b.layers.at(2)).norm() > 0.0);
}

TEST_CASE("activation gradients w.r.t. pixels match central differences") {
    ToyEncoder enc(32, 16, 4, 9);
    Image img = noise_image(32, 3);
    Image target = noise_image(32, 4);
    std::vector<int> layers{2, 4};

    auto loss_of = [&](const Image &x) {
        LayerActivations fa = enc.encode(x, layers), fb = enc.encode(target, layers);
        double l = 0;
        for (int li : layers)
            l += (fa.layers.at(li) - fb.layers.at(li)).squaredNorm();
        return l;
    };

    EncodeResult res = enc.encode_with_grad(img, layers);
    LayerActivations tb = enc.encode(target, layers);
    std::map<int, Eigen::VectorXd> act_grads;
    for (int li : layers)
        act_grads[li] = 2.0 * (res.activations.layers.at(li) - tb.layers.at(li));
    Image d_img = res.backward(act_grads);

    std::mt19937 rng(8);
    std::uniform_int_distribution<int> pick(0, 32 * 32 - 1);
    const double eps = 1e-5;
    for (int trial = 0; trial < 5; ++trial) {
        int idx = pick(rng);
        Image up = img, down = img;
        up.px[idx] += eps;
        down.px[idx] -= eps;
        double fd = (loss_of(up) - loss_of(down)) / (2 * eps);
        double denom = std::max({std::abs(fd), std::abs(d_img.px[idx]), 1e-6});
        CHECK(std::abs(d_img.px[idx] - fd) / denom < 1e-3);
    }
}

TEST_CASE("out-of-range layers are configuration errors") {
    ToyEncoder enc(32, 16, 11, 5);
    CHECK_THROWS(enc.encode(noise_image(32, 1), {12}));
    CHECK_THROWS(enc.encode(noise_image(32, 1), {0}));
}

TEST_CASE("fallback saliency: constant photo gives the uniform map") {
    Image flat(32, 32, 3, 0.4);
    Image m = edge_saliency_map(flat);
    double expected = 1.0 / (32.0 * 32.0);
    double sum = 0;
    for (double v : m.px) {
        CHECK(v == doctest::Approx(expected).epsilon(1e-9));
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("relevancy maps are normalized to unit mass") {
    ToyEncoder enc(32, 16, 11, 5);
    Image img = noise_image(32, 6, 3);
    Image m = enc.relevancy_map(img);
    double sum = 0;
    for (double v : m.px) {
        CHECK(v >= 0.0);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("edge saliency concentrates mass on a square's boundary") {
    Image img(64, 64, 1, 1.0);
    for (int y = 20; y < 44; ++y)
        for (int x = 20; x < 44; ++x)
            img.at(x, y) = 0.0;
    Image m = edge_saliency_map(img);
    // mass within a 4-px band around the square boundary vs total
    double band = 0, total = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            double v = m.at(x, y);
            total += v;
            bool near_edge = (x >= 16 && x < 48 && y >= 16 && y < 48) &&
                             !(x >= 24 && x < 40 && y >= 24 && y < 40);
            if (near_edge)
                band += v;
        }
    CHECK(band / total > 0.9);
}

TEST_CASE("transformer encoder gradients match central differences on a tiny model") {
    VitConfig cfg;
    cfg.image_size = 32;
    cfg.patch = 16;
    cfg.width = 24;
    cfg.depth = 3;
    cfg.heads = 2;
    cfg.embed_dim = 16;
    VitEncoder enc(VitWeights::random(cfg, 42));

    Image img = noise_image(32, 10);
    Image target = noise_image(32, 11);
    std::vector<int> layers{1, 2};

    auto loss_of = [&](const Image &x) {
        LayerActivations fa = enc.encode(x, layers), fb = enc.encode(target, layers);
        double l = 0;
        for (int li : layers)
            l += (fa.layers.at(li) - fb.layers.at(li)).squaredNorm();
        return l;
    };

    EncodeResult res = enc.encode_with_grad(img, layers);
    LayerActivations tb = enc.encode(target, layers);
    std::map<int, Eigen::VectorXd> act_grads;
    for (int li : layers)
        act_grads[li] = 2.0 * (res.activations.layers.at(li) - tb.layers.at(li));
    Image d_img = res.backward(act_grads);
    REQUIRE(d_img.w == 32);
    REQUIRE(d_img.c == 1);

    std::mt19937 rng(12);
    std::uniform_int_distribution<int> pick(0, 32 * 32 - 1);
    const double eps = 1e-5;
    for (int trial = 0; trial < 4; ++trial) {
        int idx = pick(rng);
        Image up = img, down = img;
        up.px[idx] += eps;
        down.px[idx] -= eps;
        double fd = (loss_of(up) - loss_of(down)) / (2 * eps);
        double denom = std::max({std::abs(fd), std::abs(d_img.px[idx]), 1e-6});
        CHECK(std::abs(d_img.px[idx] - fd) / denom < 1e-4);
    }
}

TEST_CASE("transformer weights survive a save/load round trip") {
    VitConfig cfg;
    cfg.image_size = 32;
    cfg.patch = 16;
    cfg.width = 16;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.embed_dim = 8;
    VitWeights w = VitWeights::random(cfg, 3);
    std::string path = (std::filesystem::temp_directory_path() / "tiny_vit.bin").string();
    w.save(path);
    VitWeights w2 = VitWeights::load(path);

    VitEncoder a(w), b(w2);
    Image img = noise_image(32, 14);
    LayerActivations fa = a.encode(img, {1}), fb = b.encode(img, {1});
    CHECK((fa.layers.at(1) - fb.layers.at(1)).norm() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK((a.image_embedding(img) - b.image_embedding(img)).norm() == doctest::Approx(0.0));
    std::remove(path.c_str());
}

TEST_CASE("transformer relevancy map is a distribution at photo resolution") {
    VitConfig cfg;
    cfg.image_size = 32;
    cfg.patch = 16;
    cfg.width = 16;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.embed_dim = 8;
    VitEncoder enc(VitWeights::random(cfg, 5));
    Image img = noise_image(48, 15, 3);
    Image m = enc.relevancy_map(img);
    CHECK(m.w == 48);
    CHECK(m.h == 48);
    double sum = 0;
    for (double v : m.px) {
        CHECK(v >= 0.0);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("image embeddings are unit length") {
    ToyEncoder enc(32, 16, 11, 5);
    CHECK(enc.image_embedding(noise_image(32, 16)).norm() == doctest::Approx(1.0).epsilon(1e-9));
}
