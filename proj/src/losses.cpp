#include "scenesketch/losses.hpp"

#include <cmath>
#include <iostream>

namespace ssk {

double clip_loss_vs_activations(const EncodeResult &sketch_enc, const LayerActivations &target,
                                const std::vector<int> &layers, Image *d_sketch) {
    double loss = 0.0;
    std::map<int, Eigen::VectorXd> act_grads;
    for (int l : layers) {
        const Eigen::VectorXd &a = sketch_enc.activations.layers.at(l);
        const Eigen::VectorXd &b = target.layers.at(l);
        if (a.size() != b.size())
            throw std::invalid_argument("clip_loss: activation shape mismatch at layer " + std::to_string(l));
        Eigen::VectorXd diff = a - b;
        loss += diff.squaredNorm();
        if (d_sketch)
            act_grads[l] = 2.0 * diff;
    }
    if (d_sketch)
        *d_sketch = sketch_enc.backward(act_grads);
    return loss;
}

double clip_loss(const Image &sketch_img, const Image &target_img, const std::vector<int> &layers,
                 const Encoder &encoder, Image *d_sketch) {
    if (sketch_img.w != target_img.w || sketch_img.h != target_img.h)
        throw std::invalid_argument("clip_loss: image resolutions differ");
    EncodeResult se = encoder.encode_with_grad(sketch_img, layers);
    LayerActivations ta = encoder.encode(target_img, layers);
    return clip_loss_vs_activations(se, ta, layers, d_sketch);
}

double sparse_loss(const std::vector<double> &probabilities) {
    if (probabilities.empty())
        return 0.0;
    double sum = 0.0;
    for (double p : probabilities) {
        if (p < 0.0 || p > 1.0)
            throw std::domain_error("sparse_loss: probability outside [0,1]");
        sum += p;
    }
    return sum / static_cast<double>(probabilities.size());
}

double ratio_loss(double sparse, double clip, double r, double *d_sparse) {
    constexpr double kEps = 1e-8;
    if (clip < kEps) {
        std::cerr << "warning: ratio_loss clip term " << clip << " clamped to " << kEps << "\n";
        clip = kEps;
    }
    double diff = sparse / clip - r;
    if (d_sparse)
        *d_sparse = 2.0 * diff / clip;
    return diff * diff;
}

LossBreakdown simp_objective(double clip, double sparse, double ratio, const std::vector<double> &weights) {
    if (weights.size() != 3)
        throw std::invalid_argument("simp_objective: expected 3 weights");
    if (!std::isfinite(clip) || !std::isfinite(sparse) || !std::isfinite(ratio))
        throw std::runtime_error("simp_objective: non-finite loss component");
    LossBreakdown b;
    b.clip_loss = clip;
    b.sparse_loss = sparse;
    b.ratio_loss = ratio;
    b.weights = weights;
    b.total = weights[0] * clip + weights[1] * sparse + weights[2] * ratio;
    return b;
}

std::vector<double> gradnorm_weights(const std::vector<double> &grad_norms,
                                     const std::vector<double> &inverse_rates, double alpha,
                                     double weight_cap) {
    const size_t n = grad_norms.size();
    if (n < 2)
        throw std::invalid_argument("gradnorm_weights: need at least 2 losses");
    if (!inverse_rates.empty() && inverse_rates.size() != n)
        throw std::invalid_argument("gradnorm_weights: rate/norm count mismatch");

    std::vector<double> raw(n);
    std::vector<bool> capped(n, false);
    for (size_t i = 0; i < n; ++i) {
        double rate = inverse_rates.empty() ? 1.0 : inverse_rates[i];
        if (grad_norms[i] <= 0.0) {
            std::cerr << "warning: zero gradient norm for loss " << i << ", weight capped at " << weight_cap << "\n";
            capped[i] = true;
            raw[i] = weight_cap;
        } else {
            raw[i] = std::pow(rate, alpha) / grad_norms[i];
        }
    }
    // Normalize the uncapped weights so the total equals the loss count.
    double capped_sum = 0.0, raw_sum = 0.0;
    size_t n_capped = 0;
    for (size_t i = 0; i < n; ++i) {
        if (capped[i]) {
            capped_sum += raw[i];
            ++n_capped;
        } else {
            raw_sum += raw[i];
        }
    }
    std::vector<double> w(n);
    double budget = std::max(static_cast<double>(n) - capped_sum, 1e-6);
    for (size_t i = 0; i < n; ++i) {
        if (capped[i])
            w[i] = raw[i];
        else
            w[i] = std::min(weight_cap, n_capped == n ? raw[i] : raw[i] * budget / raw_sum);
    }
    return w;
}

} // namespace ssk
