#include "scenesketch/evalmetrics.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace ssk {

namespace {

cv::Mat to_cv_gray(const Image &img) {
    Image g = to_gray(img);
    cv::Mat m(g.h, g.w, CV_64F);
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x)
            m.at<double>(y, x) = g.at(x, y);
    return m;
}

Image from_cv(const cv::Mat &m) {
    Image out(m.cols, m.rows, 1);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x)
            out.at(x, y) = m.at<double>(y, x);
    return out;
}

} // namespace

Image xdog_edges(const Image &photo, const XdogParams &prm) {
    if (photo.empty())
        throw std::invalid_argument("xdog_edges: empty image");
    cv::Mat g = to_cv_gray(photo);
    cv::Mat g1, g2;
    cv::GaussianBlur(g, g1, cv::Size(), prm.sigma, prm.sigma, cv::BORDER_REPLICATE);
    cv::GaussianBlur(g, g2, cv::Size(), prm.k * prm.sigma, prm.k * prm.sigma, cv::BORDER_REPLICATE);
    Image out(photo.w, photo.h, 1);
    for (int y = 0; y < photo.h; ++y)
        for (int x = 0; x < photo.w; ++x) {
            double u = 1.0 + prm.p * (g1.at<double>(y, x) - g2.at<double>(y, x));
            double t = u >= prm.eps ? 1.0 : 1.0 + std::tanh(prm.phi * (u - prm.eps));
            out.at(x, y) = t >= 0.5 ? 1.0 : 0.0;
        }
    return out;
}

namespace {

constexpr double kMsssimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

cv::Mat gauss_filter(const cv::Mat &m) {
    cv::Mat out;
    cv::GaussianBlur(m, out, cv::Size(11, 11), 1.5, 1.5, cv::BORDER_REFLECT);
    return out;
}

double ssim_mean(const cv::Mat &a, const cv::Mat &b) {
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    cv::Mat mu_a = gauss_filter(a), mu_b = gauss_filter(b);
    cv::Mat aa = gauss_filter(a.mul(a)), bb = gauss_filter(b.mul(b)), ab = gauss_filter(a.mul(b));
    cv::Mat var_a = aa - mu_a.mul(mu_a);
    cv::Mat var_b = bb - mu_b.mul(mu_b);
    cv::Mat cov = ab - mu_a.mul(mu_b);
    cv::Mat num = (2 * mu_a.mul(mu_b) + c1).mul(2 * cov + c2);
    cv::Mat den = (mu_a.mul(mu_a) + mu_b.mul(mu_b) + c1).mul(var_a + var_b + c2);
    cv::Mat ssim = num / den;
    return cv::mean(ssim)[0];
}

cv::Mat half(const cv::Mat &m) {
    cv::Mat out;
    cv::resize(m, out, cv::Size(m.cols / 2, m.rows / 2), 0, 0, cv::INTER_AREA);
    return out;
}

} // namespace

double ms_ssim(const Image &ia, const Image &ib) {
    if (ia.w != ib.w || ia.h != ib.h)
        throw std::invalid_argument("ms_ssim: size mismatch");
    cv::Mat a = to_cv_gray(ia), b = to_cv_gray(ib);
    int scales = 5;
    int lim = std::min(ia.w, ia.h);
    while (scales > 1 && (lim >> (scales - 1)) < 11)
        --scales;
    if (scales < 5)
        std::cerr << "ms_ssim: image " << ia.w << "x" << ia.h << " supports only " << scales
                  << " scales; exponents renormalized\n";
    double wsum = 0.0;
    for (int s = 0; s < scales; ++s)
        wsum += kMsssimWeights[s];
    double score = 1.0;
    for (int s = 0; s < scales; ++s) {
        double v = std::clamp(ssim_mean(a, b), 1e-12, 1.0);
        score *= std::pow(v, kMsssimWeights[s] / wsum);
        if (s + 1 < scales) {
            a = half(a);
            b = half(b);
        }
    }
    return std::clamp(score, 0.0, 1.0);
}

ClassDatabase load_class_database(const std::string &classes_path, const std::string &templates_path) {
    ClassDatabase db;
    auto read_lines = [](const std::string &path, const char *what) {
        std::ifstream f(path);
        if (!f)
            throw std::runtime_error(std::string("cannot open ") + what + " file: " + path);
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(f, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
                line.pop_back();
            if (!line.empty() && line[0] != '#')
                lines.push_back(line);
        }
        if (lines.empty())
            throw std::runtime_error(std::string("empty ") + what + " file: " + path);
        return lines;
    };
    db.classes = read_lines(classes_path, "class list");
    db.templates = read_lines(templates_path, "template");
    for (const auto &t : db.templates)
        if (t.find("{}") == std::string::npos)
            throw std::runtime_error("template without {} placeholder in " + templates_path + ": " + t);
    return db;
}

Eigen::VectorXd ToyEmbeddingProvider::embed_image(const Image &img) const {
    int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim_))));
    Image small = resize_bilinear(to_gray(img), side, side);
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i)
        v(i) = i < static_cast<int>(small.px.size()) ? small.px[i] : 0.0;
    v.array() -= v.mean();
    double n = v.norm();
    return n > 1e-12 ? Eigen::VectorXd(v / n) : Eigen::VectorXd::Unit(dim_, 0);
}

Eigen::VectorXd ToyEmbeddingProvider::embed_text(const std::string &prompt) const {
    std::seed_seq seq(prompt.begin(), prompt.end());
    std::mt19937 rng(seq);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i)
        v(i) = nd(rng);
    return v / v.norm();
}

Eigen::MatrixXd class_embeddings(const EmbeddingProvider &provider, const ClassDatabase &db) {
    if (db.classes.empty() || db.templates.empty())
        throw std::runtime_error("class_embeddings: empty class database");
    Eigen::MatrixXd embs;
    for (size_t c = 0; c < db.classes.size(); ++c) {
        Eigen::VectorXd mean;
        for (const auto &tpl : db.templates) {
            std::string prompt = tpl;
            prompt.replace(prompt.find("{}"), 2, db.classes[c]);
            Eigen::VectorXd e = provider.embed_text(prompt);
            if (mean.size() == 0)
                mean = Eigen::VectorXd::Zero(e.size());
            mean += e;
        }
        mean /= static_cast<double>(db.templates.size());
        double n = mean.norm();
        if (n > 1e-12)
            mean /= n;
        if (embs.size() == 0)
            embs.resize(db.classes.size(), mean.size());
        embs.row(c) = mean.transpose();
    }
    return embs;
}

Eigen::MatrixXd load_precomputed_class_embeddings(const std::string &path, const ClassDatabase &db) {
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("cannot open class embedding file: " + path);
    std::map<std::string, Eigen::VectorXd> by_name;
    std::string line;
    while (std::getline(f, line)) {
        auto colon = line.find(':');
        if (colon == std::string::npos)
            continue;
        std::string name = line.substr(0, colon);
        std::istringstream vs(line.substr(colon + 1));
        std::vector<double> vals;
        double x;
        while (vs >> x)
            vals.push_back(x);
        Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
        double n = v.norm();
        if (n > 1e-12)
            v /= n;
        by_name[name] = v;
    }
    Eigen::MatrixXd embs;
    for (size_t c = 0; c < db.classes.size(); ++c) {
        auto it = by_name.find(db.classes[c]);
        if (it == by_name.end())
            throw std::runtime_error("no precomputed embedding for class '" + db.classes[c] + "' in " + path);
        if (embs.size() == 0)
            embs.resize(db.classes.size(), it->second.size());
        if (it->second.size() != embs.cols())
            throw std::runtime_error("embedding dimension mismatch for class '" + db.classes[c] + "'");
        embs.row(c) = it->second.transpose();
    }
    return embs;
}

std::vector<int> top_k_classes(const Eigen::VectorXd &emb, const Eigen::MatrixXd &class_embs, int k) {
    if (class_embs.cols() != emb.size())
        throw std::invalid_argument("top_k_classes: dimension mismatch");
    Eigen::VectorXd sims = class_embs * emb;
    std::vector<int> idx(class_embs.rows());
    for (size_t i = 0; i < idx.size(); ++i)
        idx[i] = static_cast<int>(i);
    k = std::min<int>(k, static_cast<int>(idx.size()));
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
        if (sims(a) != sims(b))
            return sims(a) > sims(b);
        return a < b; // deterministic tie break
    });
    idx.resize(k);
    return idx;
}

bool recognizability(const Image &photo, const Image &sketch_img, const Eigen::MatrixXd &class_embs,
                     const EmbeddingProvider &provider, int top_k, int min_overlap) {
    std::vector<int> tp = top_k_classes(provider.embed_image(photo), class_embs, top_k);
    std::vector<int> ts = top_k_classes(provider.embed_image(sketch_img), class_embs, top_k);
    std::sort(tp.begin(), tp.end());
    std::sort(ts.begin(), ts.end());
    std::vector<int> inter;
    std::set_intersection(tp.begin(), tp.end(), ts.begin(), ts.end(), std::back_inserter(inter));
    return static_cast<int>(inter.size()) >= min_overlap;
}

bool recognizability(const Image &photo, const Image &sketch_img, const ClassDatabase &db,
                     const EmbeddingProvider &provider, int top_k, int min_overlap) {
    return recognizability(photo, sketch_img, class_embeddings(provider, db), provider, top_k, min_overlap);
}

MetricReport evaluate_matrix(const AbstractionMatrix &matrix, const Image &photo, const EvalOptions &opt) {
    if (matrix.combined.empty())
        throw std::invalid_argument("evaluate_matrix: matrix has no combined cells");
    MetricReport rep;
    for (const auto &[key, sk] : matrix.combined) {
        if (std::find(rep.layers.begin(), rep.layers.end(), key.first) == rep.layers.end())
            rep.layers.push_back(key.first);
        if (std::find(rep.levels.begin(), rep.levels.end(), key.second) == rep.levels.end())
            rep.levels.push_back(key.second);
    }
    std::sort(rep.layers.begin(), rep.layers.end());
    std::sort(rep.levels.begin(), rep.levels.end());
    const int R = static_cast<int>(rep.levels.size()), C = static_cast<int>(rep.layers.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.ms_ssim_matrix = Eigen::MatrixXd::Constant(R, C, nan);
    rep.recognizability_matrix = Eigen::MatrixXd::Constant(R, C, nan);
    rep.stroke_count_matrix = Eigen::MatrixXd::Constant(R, C, nan);

    int canvas = matrix.combined.begin()->second.canvas_size;
    Image photo_c = resize_bilinear(photo, canvas, canvas);
    Image edges = xdog_edges(photo_c, opt.xdog);
    SoftRasterizer raster(opt.raster);

    Eigen::MatrixXd cached_embs;
    const Eigen::MatrixXd *embs = opt.class_embs;
    if (opt.with_recognizability) {
        if (!opt.provider)
            throw std::runtime_error("evaluate_matrix: recognizability requested without an embedding provider");
        if (!embs) {
            if (!opt.classes)
                throw std::runtime_error("evaluate_matrix: recognizability requested without a class database");
            cached_embs = class_embeddings(*opt.provider, *opt.classes);
            embs = &cached_embs;
        }
    }

    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) {
            auto it = matrix.combined.find({rep.layers[c], rep.levels[r]});
            if (it == matrix.combined.end()) {
                rep.missing_cells.push_back("combined/L" + std::to_string(rep.layers[c]) + "_S" +
                                            std::to_string(rep.levels[r]));
                rep.partial = true;
                continue;
            }
            const Sketch &sk = it->second;
            Image render = raster.render(sk);
            rep.ms_ssim_matrix(r, c) = ms_ssim(edges, render);
            int visible = 0;
            for (const auto &s : sk.strokes)
                if (s.probability >= opt.drop_threshold)
                    ++visible;
            rep.stroke_count_matrix(r, c) = visible;
            if (opt.with_recognizability)
                rep.recognizability_matrix(r, c) =
                    recognizability(photo_c, render, *embs, *opt.provider) ? 1.0 : 0.0;
        }
    for (const auto &m : matrix.missing_cells)
        if (std::find(rep.missing_cells.begin(), rep.missing_cells.end(), m) == rep.missing_cells.end()) {
            rep.missing_cells.push_back(m);
            rep.partial = true;
        }
    return rep;
}

void write_metric_csv(const std::string &path, const MetricReport &rep) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + path);
    f << "layer,level,ms_ssim,recognizability,stroke_count\n";
    char buf[256];
    for (int r = 0; r < rep.ms_ssim_matrix.rows(); ++r)
        for (int c = 0; c < rep.ms_ssim_matrix.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g\n", rep.layers[c], rep.levels[r],
                          rep.ms_ssim_matrix(r, c), rep.recognizability_matrix(r, c),
                          rep.stroke_count_matrix(r, c));
            f << buf;
        }
    for (const auto &m : rep.missing_cells)
        f << "# missing," << m << "\n";
}

MetricReport read_metric_csv(const std::string &path) {
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(f, line); // header
    struct Row {
        int layer, level;
        double ms, rec, sc;
    };
    std::vector<Row> rows;
    MetricReport rep;
    while (std::getline(f, line)) {
        if (line.rfind("# missing,", 0) == 0) {
            rep.missing_cells.push_back(line.substr(10));
            rep.partial = true;
            continue;
        }
        Row row{};
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf", &row.layer, &row.level, &row.ms, &row.rec,
                        &row.sc) == 5)
            rows.push_back(row);
    }
    for (const auto &row : rows) {
        if (std::find(rep.layers.begin(), rep.layers.end(), row.layer) == rep.layers.end())
            rep.layers.push_back(row.layer);
        if (std::find(rep.levels.begin(), rep.levels.end(), row.level) == rep.levels.end())
            rep.levels.push_back(row.level);
    }
    std::sort(rep.layers.begin(), rep.layers.end());
    std::sort(rep.levels.begin(), rep.levels.end());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.ms_ssim_matrix = Eigen::MatrixXd::Constant(rep.levels.size(), rep.layers.size(), nan);
    rep.recognizability_matrix = rep.ms_ssim_matrix;
    rep.stroke_count_matrix = rep.ms_ssim_matrix;
    for (const auto &row : rows) {
        int r = static_cast<int>(std::find(rep.levels.begin(), rep.levels.end(), row.level) - rep.levels.begin());
        int c = static_cast<int>(std::find(rep.layers.begin(), rep.layers.end(), row.layer) - rep.layers.begin());
        rep.ms_ssim_matrix(r, c) = row.ms;
        rep.recognizability_matrix(r, c) = row.rec;
        rep.stroke_count_matrix(r, c) = row.sc;
    }
    return rep;
}

} // namespace ssk
