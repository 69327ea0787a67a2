#include "scenesketch/networks.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace ssk {

namespace {

constexpr double kSeluLambda = 1.0507009873554805;
constexpr double kSeluAlpha = 1.6732632423543772;

inline double selu(double x) { return x > 0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * (std::exp(x) - 1.0); }
inline double dselu(double x) { return x > 0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x); }
inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

Mlp::Mlp(int in_dim, int hidden, int out_dim, unsigned seed, bool sigmoid_output)
    : sigmoid_output_(sigmoid_output) {
    std::mt19937 rng(seed);
    auto init = [&](int rows, int cols) {
        double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Eigen::MatrixXd m(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                m(i, j) = dist(rng);
        return m;
    };
    int dims[4] = {in_dim, hidden, hidden, out_dim};
    for (int l = 0; l < 3; ++l) {
        w_.push_back(init(dims[l + 1], dims[l]));
        b_.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
        dw_.push_back(Eigen::MatrixXd::Zero(dims[l + 1], dims[l]));
        db_.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
    }
    pre_.resize(3);
    post_.resize(3);
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd &x) {
    if (x.size() != w_[0].cols())
        throw std::invalid_argument("Mlp: input size mismatch");
    x_in_ = x;
    Eigen::VectorXd h = x;
    for (int l = 0; l < 3; ++l) {
        pre_[l] = w_[l] * h + b_[l];
        if (l < 2)
            post_[l] = pre_[l].unaryExpr([](double v) { return selu(v); });
        else if (sigmoid_output_)
            post_[l] = pre_[l].unaryExpr([](double v) { return sigm(v); });
        else
            post_[l] = pre_[l];
        h = post_[l];
    }
    return h;
}

Eigen::VectorXd Mlp::backward(const Eigen::VectorXd &d_out) {
    Eigen::VectorXd g = d_out;
    for (int l = 2; l >= 0; --l) {
        if (l == 2 && sigmoid_output_)
            g = (g.array() * post_[l].array() * (1.0 - post_[l].array())).matrix();
        else if (l < 2)
            g = (g.array() * pre_[l].unaryExpr([](double v) { return dselu(v); }).array()).matrix();
        const Eigen::VectorXd &input = l == 0 ? x_in_ : post_[l - 1];
        dw_[l] += g * input.transpose();
        db_[l] += g;
        g = w_[l].transpose() * g;
    }
    return g;
}

void Mlp::zero_grad() {
    for (auto &m : dw_)
        m.setZero();
    for (auto &v : db_)
        v.setZero();
}

std::vector<Eigen::MatrixXd *> Mlp::weight_refs() { return {&w_[0], &w_[1], &w_[2]}; }
std::vector<Eigen::VectorXd *> Mlp::bias_refs() { return {&b_[0], &b_[1], &b_[2]}; }
std::vector<Eigen::MatrixXd *> Mlp::weight_grad_refs() { return {&dw_[0], &dw_[1], &dw_[2]}; }
std::vector<Eigen::VectorXd *> Mlp::bias_grad_refs() { return {&db_[0], &db_[1], &db_[2]}; }

namespace {

void write_mat(std::ostream &os, const Eigen::MatrixXd &m) {
    std::int64_t r = m.rows(), c = m.cols();
    os.write(reinterpret_cast<const char *>(&r), 8);
    os.write(reinterpret_cast<const char *>(&c), 8);
    os.write(reinterpret_cast<const char *>(m.data()), sizeof(double) * m.size());
}

Eigen::MatrixXd read_mat(std::istream &is) {
    std::int64_t r = 0, c = 0;
    is.read(reinterpret_cast<char *>(&r), 8);
    is.read(reinterpret_cast<char *>(&c), 8);
    if (!is || r < 0 || c < 0)
        throw std::runtime_error("corrupt checkpoint");
    Eigen::MatrixXd m(r, c);
    is.read(reinterpret_cast<char *>(m.data()), sizeof(double) * m.size());
    if (!is)
        throw std::runtime_error("corrupt checkpoint");
    return m;
}

} // namespace

void Mlp::save(std::ostream &os) const {
    std::uint8_t sig = sigmoid_output_ ? 1 : 0;
    os.write(reinterpret_cast<const char *>(&sig), 1);
    for (int l = 0; l < 3; ++l) {
        write_mat(os, w_[l]);
        write_mat(os, b_[l]);
    }
}

Mlp Mlp::load(std::istream &is) {
    Mlp m;
    std::uint8_t sig = 0;
    is.read(reinterpret_cast<char *>(&sig), 1);
    m.sigmoid_output_ = sig != 0;
    for (int l = 0; l < 3; ++l) {
        m.w_.push_back(read_mat(is));
        m.b_.push_back(read_mat(is).col(0));
        m.dw_.push_back(Eigen::MatrixXd::Zero(m.w_[l].rows(), m.w_[l].cols()));
        m.db_.push_back(Eigen::VectorXd::Zero(m.b_[l].size()));
    }
    m.pre_.resize(3);
    m.post_.resize(3);
    return m;
}

Eigen::VectorXd LocNet::predict_offsets(const Eigen::VectorXd &z_init) { return net.forward(z_init); }

SimpNet::SimpNet(int n_strokes, int hidden, unsigned seed)
    : net(n_strokes, hidden, n_strokes, seed, /*sigmoid_output=*/true) {
    std::mt19937 rng(seed ^ 0x9e3779b9u);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    input.resize(n_strokes);
    for (int i = 0; i < n_strokes; ++i)
        input(i) = dist(rng);
    // Start from "keep every stroke": zero the head weights and bias the
    // sigmoid so every probability starts at exactly 0.95, and removal has
    // to be learned. Gradients still reach the zeroed weights via d_logit.
    net.weight_refs().back()->setZero();
    net.bias_refs().back()->setConstant(2.9444389791664403); // logit(0.95)
}

Eigen::VectorXd SimpNet::predict_probabilities() { return net.forward(input); }

void Adam::attach(const std::vector<Eigen::MatrixXd *> &weights, const std::vector<Eigen::VectorXd *> &biases) {
    w_ = weights;
    b_ = biases;
    mw_.clear();
    vw_.clear();
    mb_.clear();
    vb_.clear();
    for (auto *m : w_) {
        mw_.push_back(Eigen::MatrixXd::Zero(m->rows(), m->cols()));
        vw_.push_back(Eigen::MatrixXd::Zero(m->rows(), m->cols()));
    }
    for (auto *v : b_) {
        mb_.push_back(Eigen::VectorXd::Zero(v->size()));
        vb_.push_back(Eigen::VectorXd::Zero(v->size()));
    }
    t_ = 0;
}

void Adam::step(const std::vector<Eigen::MatrixXd *> &weight_grads, const std::vector<Eigen::VectorXd *> &bias_grads) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1, t_);
    double bc2 = 1.0 - std::pow(beta2, t_);
    for (size_t i = 0; i < w_.size(); ++i) {
        mw_[i] = beta1 * mw_[i] + (1 - beta1) * (*weight_grads[i]);
        vw_[i] = beta2 * vw_[i] + (1 - beta2) * weight_grads[i]->array().square().matrix();
        w_[i]->array() -= lr * (mw_[i].array() / bc1) / ((vw_[i].array() / bc2).sqrt() + eps);
    }
    for (size_t i = 0; i < b_.size(); ++i) {
        mb_[i] = beta1 * mb_[i] + (1 - beta1) * (*bias_grads[i]);
        vb_[i] = beta2 * vb_[i] + (1 - beta2) * bias_grads[i]->array().square().matrix();
        b_[i]->array() -= lr * (mb_[i].array() / bc1) / ((vb_[i].array() / bc2).sqrt() + eps);
    }
}

void save_checkpoint(const std::string &path, const LocNet &loc, const SimpNet &simp, unsigned seed, int n_strokes) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write checkpoint: " + path);
    const char magic[8] = {'S', 'S', 'C', 'K', 'P', 'T', '0', '1'};
    f.write(magic, 8);
    std::int64_t hdr[2] = {seed, n_strokes};
    f.write(reinterpret_cast<const char *>(hdr), sizeof(hdr));
    loc.net.save(f);
    simp.net.save(f);
    write_mat(f, simp.input);
}

void load_checkpoint(const std::string &path, LocNet &loc, SimpNet &simp, unsigned &seed, int &n_strokes) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "SSCKPT01", 8) != 0)
        throw std::runtime_error("bad checkpoint header: " + path);
    std::int64_t hdr[2];
    f.read(reinterpret_cast<char *>(hdr), sizeof(hdr));
    seed = static_cast<unsigned>(hdr[0]);
    n_strokes = static_cast<int>(hdr[1]);
    loc.net = Mlp::load(f);
    simp.net = Mlp::load(f);
    simp.input = read_mat(f).col(0);
}

} // namespace ssk
