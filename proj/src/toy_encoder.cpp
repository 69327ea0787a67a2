#include "scenesketch/encoder.hpp"
#include "scenesketch/vit.hpp"

#include <cmath>
#include <random>

namespace ssk {

void Encoder::check_layers(const std::vector<int> &layers) const {
    for (int l : layers)
        if (l < 1 || l > depth())
            throw std::invalid_argument("encoder: layer index " + std::to_string(l) +
                                        " out of range [1," + std::to_string(depth()) + "]");
}

namespace {

Eigen::MatrixXd seeded_gaussian(int rows, int cols, std::mt19937 &rng) {
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(cols)));
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = dist(rng);
    return m;
}

} // namespace

ToyEncoder::ToyEncoder(int input_size, int channels, int depth, unsigned seed) : input_size_(input_size) {
    if (input_size % patch_ != 0)
        throw std::invalid_argument("ToyEncoder: input size must be a multiple of 16");
    std::mt19937 rng(seed);
    proj_ = seeded_gaussian(channels, patch_ * patch_, rng);
    layer_maps_.reserve(depth);
    for (int l = 0; l < depth; ++l)
        layer_maps_.push_back(seeded_gaussian(channels, channels, rng));
}

EncodeResult ToyEncoder::encode_with_grad(const Image &img, const std::vector<int> &layers) const {
    check_layers(layers);
    const int source_res = img.h;
    Image gray = to_gray(img);
    const bool resized = gray.w != input_size_ || gray.h != input_size_;
    const int in_w = gray.w, in_h = gray.h;
    if (resized)
        gray = resize_bilinear(gray, input_size_, input_size_);

    const int grid = input_size_ / patch_;
    const int npatch = grid * grid;
    const int C = static_cast<int>(proj_.rows());
    const int D = depth();

    // Patch matrix: one column per patch.
    Eigen::MatrixXd patches(patch_ * patch_, npatch);
    for (int py = 0; py < grid; ++py)
        for (int px = 0; px < grid; ++px) {
            int col = py * grid + px;
            for (int v = 0; v < patch_; ++v)
                for (int u = 0; u < patch_; ++u)
                    patches(v * patch_ + u, col) = gray.at(px * patch_ + u, py * patch_ + v);
        }

    // Forward through all stages up to the deepest requested layer.
    int deepest = 1;
    for (int l : layers)
        deepest = std::max(deepest, l);
    auto stages = std::make_shared<std::vector<Eigen::MatrixXd>>(); // post-tanh, index 0 = projection stage
    stages->reserve(deepest + 1);
    stages->push_back((proj_ * patches).array().tanh().matrix());
    for (int l = 1; l <= deepest; ++l)
        stages->push_back((layer_maps_[l - 1] * stages->back()).array().tanh().matrix());

    EncodeResult res;
    res.activations.source_resolution = source_res;
    for (int l : layers) {
        const Eigen::MatrixXd &m = (*stages)[l];
        res.activations.layers[l] = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    }

    res.backward = [this, stages, deepest, npatch, C, grid, in_w, in_h, resized]
                   (const std::map<int, Eigen::VectorXd> &act_grads) -> Image {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(C, npatch);
        for (int l = deepest; l >= 1; --l) {
            auto it = act_grads.find(l);
            if (it != act_grads.end())
                g += Eigen::Map<const Eigen::MatrixXd>(it->second.data(), C, npatch);
            // through tanh of stage l, then the linear map
            Eigen::MatrixXd pre = (1.0 - (*stages)[l].array().square()).matrix();
            g = layer_maps_[l - 1].transpose() * (g.array() * pre.array()).matrix();
        }
        Eigen::MatrixXd pre0 = (1.0 - (*stages)[0].array().square()).matrix();
        Eigen::MatrixXd gpatch = proj_.transpose() * (g.array() * pre0.array()).matrix();

        Image grad(input_size_, input_size_, 1, 0.0);
        for (int py = 0; py < grid; ++py)
            for (int px = 0; px < grid; ++px) {
                int col = py * grid + px;
                for (int v = 0; v < patch_; ++v)
                    for (int u = 0; u < patch_; ++u)
                        grad.at(px * patch_ + u, py * patch_ + v) = gpatch(v * patch_ + u, col);
            }
        if (resized)
            grad = resize_bilinear_backward(grad, in_w, in_h);
        return grad;
    };
    return res;
}

Image edge_saliency_map(const Image &photo) {
    Image gray = to_gray(photo);
    const int w = gray.w, h = gray.h;
    Image map(w, h, 1, 0.0);
    double total = 0.0;
    for (int y = 1; y + 1 < h; ++y)
        for (int x = 1; x + 1 < w; ++x) {
            double gx = (gray.at(x + 1, y - 1) + 2 * gray.at(x + 1, y) + gray.at(x + 1, y + 1)) -
                        (gray.at(x - 1, y - 1) + 2 * gray.at(x - 1, y) + gray.at(x - 1, y + 1));
            double gy = (gray.at(x - 1, y + 1) + 2 * gray.at(x, y + 1) + gray.at(x + 1, y + 1)) -
                        (gray.at(x - 1, y - 1) + 2 * gray.at(x, y - 1) + gray.at(x + 1, y - 1));
            double m = std::sqrt(gx * gx + gy * gy);
            map.at(x, y) = m;
            total += m;
        }
    if (total <= 1e-12) {
        double u = 1.0 / (static_cast<double>(w) * h);
        for (auto &v : map.px)
            v = u;
    } else {
        for (auto &v : map.px)
            v /= total;
    }
    return map;
}

Image ToyEncoder::relevancy_map(const Image &photo) const { return edge_saliency_map(photo); }

Eigen::VectorXd ToyEncoder::image_embedding(const Image &img) const {
    auto res = encode_with_grad(img, {depth()});
    const int C = static_cast<int>(proj_.rows());
    Eigen::Map<const Eigen::MatrixXd> m(res.activations.layers.at(depth()).data(), C,
                                        res.activations.layers.at(depth()).size() / C);
    Eigen::VectorXd e = m.rowwise().mean();
    double n = e.norm();
    return n > 0 ? Eigen::VectorXd(e / n) : e;
}

std::shared_ptr<Encoder> make_encoder(const EncoderSpec &spec) {
    switch (spec.backend) {
    case EncoderBackend::Toy:
        return std::make_shared<ToyEncoder>();
    case EncoderBackend::ClipVitB32:
        return std::make_shared<VitEncoder>(spec.weights_path);
    }
    throw std::invalid_argument("make_encoder: unknown backend");
}

} // namespace ssk
