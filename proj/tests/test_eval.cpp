#include "scenesketch/evalmetrics.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
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

// Fixture provider with hand-chosen 3-dimensional embeddings.
class FixtureProvider : public EmbeddingProvider {
public:
    Eigen::VectorXd embed_image(const Image &img) const override {
        Eigen::VectorXd v(3);
        // brightness-keyed: bright images align with axis 0, dark with axis 1
        double mean = 0;
        for (double p : img.px)
            mean += p;
        mean /= img.px.size();
        v << mean, 1.0 - mean, 0.3;
        return v / v.norm();
    }
    Eigen::VectorXd embed_text(const std::string &prompt) const override {
        Eigen::VectorXd v(3);
        if (prompt.find("alpha") != std::string::npos)
            v << 1, 0, 0;
        else if (prompt.find("beta") != std::string::npos)
            v << 0, 1, 0;
        else
            v << 0, 0, 1;
        return v;
    }
};

} // namespace

TEST_CASE("edge operator: constant image of any brightness is blank") {
    for (double level : {0.0, 0.3, 1.0}) {
        Image flat(64, 64, 1, level);
        Image edges = xdog_edges(flat);
        for (double v : edges.px)
            CHECK(v == 1.0);
    }
}

TEST_CASE("edge operator localizes a step edge within 3 sigma") {
    Image img(64, 64, 1, 1.0);
    for (int y = 0; y < 64; ++y)
        for (int x = 32; x < 64; ++x)
            img.at(x, y) = 0.0;
    Image edges = xdog_edges(img);
    XdogParams prm;
    double band = 3.0 * prm.k * prm.sigma;
    for (int y = 8; y < 56; ++y)
        for (int x = 0; x < 64; ++x) {
            if (std::abs(x - 31.5) > band + 1)
                CHECK(edges.at(x, y) == 1.0);
        }
    // and something actually fires at the edge
    int dark = 0;
    for (int y = 8; y < 56; ++y)
        for (int x = 0; x < 64; ++x)
            if (edges.at(x, y) == 0.0)
                ++dark;
    CHECK(dark > 0);
}

TEST_CASE("edge operator is deterministic") {
    Image img = noise_image(64, 1);
    CHECK(xdog_edges(img).px == xdog_edges(img).px);
}

TEST_CASE("self multi-scale similarity is exactly 1") {
    Image img = noise_image(224, 2);
    CHECK(ms_ssim(img, img) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("white versus black scores near zero") {
    Image white(224, 224, 1, 1.0), black(224, 224, 1, 0.0);
    CHECK(ms_ssim(white, black) < 0.05);
}

TEST_CASE("multi-scale similarity is symmetric") {
    Image a = noise_image(224, 3), b = noise_image(224, 4);
    CHECK(std::abs(ms_ssim(a, b) - ms_ssim(b, a)) < 1e-9);
}

TEST_CASE("small images fall back to fewer scales without throwing") {
    Image a = noise_image(64, 5), b = noise_image(64, 6);
    double v = ms_ssim(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(ms_ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("class database loading validates files") {
    CHECK_THROWS(load_class_database("/nonexistent/classes.txt", "/nonexistent/templates.txt"));
    namespace fs = std::filesystem;
    std::string cls = (fs::temp_directory_path() / "cls.txt").string();
    std::string tpl = (fs::temp_directory_path() / "tpl.txt").string();
    std::ofstream(cls) << "alpha\nbeta\ngamma\n";
    std::ofstream(tpl) << "a photo of a {}.\n";
    ClassDatabase db = load_class_database(cls, tpl);
    CHECK(db.classes.size() == 3);
    CHECK(db.templates.size() == 1);
    std::ofstream(tpl) << "a photo without placeholder\n";
    CHECK_THROWS(load_class_database(cls, tpl));
    std::remove(cls.c_str());
    std::remove(tpl.c_str());
}

TEST_CASE("top-k ranking matches brute-force cosine ranking") {
    FixtureProvider prov;
    ClassDatabase db;
    db.classes = {"alpha", "beta", "gamma"};
    db.templates = {"a photo of a {}."};
    Eigen::MatrixXd embs = class_embeddings(prov, db);

    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd q(3);
        q << u(rng), u(rng), u(rng);
        q.normalize();
        auto top = top_k_classes(q, embs, 2);
        // brute force
        std::vector<std::pair<double, int>> scored;
        for (int c = 0; c < 3; ++c)
            scored.push_back({embs.row(c).dot(q), c});
        std::stable_sort(scored.begin(), scored.end(),
                         [](auto &a, auto &b) { return a.first > b.first; });
        CHECK(top[0] == scored[0].second);
        CHECK(top[1] == scored[1].second);
    }
}

TEST_CASE("identity fixture is always recognizable") {
    ToyEmbeddingProvider prov;
    ClassDatabase db;
    for (int i = 0; i < 20; ++i)
        db.classes.push_back("class" + std::to_string(i));
    db.templates = {"a photo of a {}.", "a sketch of a {}."};
    Image photo = noise_image(64, 7, 3);
    CHECK(recognizability(photo, photo, db, prov));
}

TEST_CASE("a 5-class list makes every pair recognizable") {
    ToyEmbeddingProvider prov;
    ClassDatabase db;
    db.classes = {"a", "b", "c", "d", "e"};
    db.templates = {"a photo of a {}."};
    Image photo = noise_image(64, 8, 3);
    Image other = noise_image(64, 9, 1);
    CHECK(recognizability(photo, other, db, prov)); // both top-5 sets = full list
}

TEST_CASE("matrix scoring fills all three grids and round trips through CSV") {
    AbstractionMatrix mat;
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(0.2, 0.8);
    for (int layer : {2, 7})
        for (int level : {0, 1}) {
            Sketch sk;
            sk.canvas_size = 64;
            for (int i = 0; i < 6; ++i) {
                Stroke s;
                for (auto &p : s.points)
                    p = {u(rng), u(rng)};
                s.probability = level == 0 ? 1.0 : (i < 3 ? 1.0 : 0.05);
                sk.strokes.push_back(s);
            }
            mat.combined[{layer, level}] = sk;
        }

    Image photo = noise_image(64, 10, 3);
    EvalOptions opt;
    opt.with_recognizability = false;
    MetricReport rep = evaluate_matrix(mat, photo, opt);
    REQUIRE(rep.layers == std::vector<int>{2, 7});
    REQUIRE(rep.levels == std::vector<int>{0, 1});
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            CHECK(rep.ms_ssim_matrix(r, c) >= 0.0);
            CHECK(rep.ms_ssim_matrix(r, c) <= 1.0);
        }
    // level 1 hides 3 of 6 strokes
    CHECK(rep.stroke_count_matrix(0, 0) == 6);
    CHECK(rep.stroke_count_matrix(1, 0) == 3);
    CHECK_FALSE(rep.partial);

    std::string path = (std::filesystem::temp_directory_path() / "metrics_roundtrip.csv").string();
    write_metric_csv(path, rep);
    MetricReport back = read_metric_csv(path);
    CHECK(back.layers == rep.layers);
    CHECK(back.levels == rep.levels);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            CHECK(back.ms_ssim_matrix(r, c) == rep.ms_ssim_matrix(r, c)); // full precision
            CHECK(back.stroke_count_matrix(r, c) == rep.stroke_count_matrix(r, c));
        }
    // identical bytes on re-write
    std::string path2 = (std::filesystem::temp_directory_path() / "metrics_roundtrip2.csv").string();
    write_metric_csv(path2, back);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("missing cells flag the report as partial") {
    AbstractionMatrix mat;
    Sketch sk;
    sk.canvas_size = 64;
    Stroke s;
    s.points = {Vec2{0.2, 0.2}, {0.4, 0.4}, {0.6, 0.6}, {0.8, 0.8}};
    sk.strokes.push_back(s);
    mat.combined[{2, 0}] = sk;
    mat.combined[{7, 1}] = sk; // leaves (2,1) and (7,0) missing in the grid
    EvalOptions opt;
    opt.with_recognizability = false;
    MetricReport rep = evaluate_matrix(mat, noise_image(64, 11, 3), opt);
    CHECK(rep.partial);
    CHECK(rep.missing_cells.size() == 2);
}

TEST_CASE("identical cells give constant grids") {
    AbstractionMatrix mat;
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> u(0.2, 0.8);
    Sketch sk;
    sk.canvas_size = 64;
    for (int i = 0; i < 4; ++i) {
        Stroke s;
        for (auto &p : s.points)
            p = {u(rng), u(rng)};
        sk.strokes.push_back(s);
    }
    for (int layer : {2, 11})
        for (int level : {0, 3})
            mat.combined[{layer, level}] = sk;
    EvalOptions opt;
    opt.with_recognizability = false;
    MetricReport rep = evaluate_matrix(mat, noise_image(64, 12, 3), opt);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            CHECK(rep.ms_ssim_matrix(r, c) == rep.ms_ssim_matrix(0, 0));
            CHECK(rep.stroke_count_matrix(r, c) == 4);
        }
}
