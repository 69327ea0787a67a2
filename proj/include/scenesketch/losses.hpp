#pragma once

#include "scenesketch/encoder.hpp"

#include <optional>
#include <vector>

namespace ssk {

struct LossBreakdown {
    double clip_loss = 0.0;
    double sparse_loss = 0.0;
    double ratio_loss = 0.0;
    double total = 0.0;
    std::vector<double> weights; // per-loss GradNorm weights (clip, sparse, ratio)
};

// ||enc_l(sketch) - enc_l(target)||_2^2, summed over the given layers.
// d_sketch, when non-null, receives dLoss/d(sketch pixels); the target side
// is treated as a constant.
double clip_loss(const Image &sketch_img, const Image &target_img, const std::vector<int> &layers,
                 const Encoder &encoder, Image *d_sketch = nullptr);

// Same, against precomputed target activations (targets are re-encoded per
// augmentation, sketch activations carry the gradient).
double clip_loss_vs_activations(const EncodeResult &sketch_enc, const LayerActivations &target,
                                const std::vector<int> &layers, Image *d_sketch = nullptr);

// (sum p_i) / n
double sparse_loss(const std::vector<double> &probabilities);

// (sparse/clip - r)^2 with the clip term detached; d_sparse receives the
// derivative w.r.t. the sparse term when non-null.
double ratio_loss(double sparse, double clip, double r, double *d_sparse = nullptr);

LossBreakdown simp_objective(double clip, double sparse, double ratio, const std::vector<double> &weights);

// Inverse-gradient-magnitude balancing: w_i proportional to rate_i^alpha / g_i,
// normalized so the weights sum to the loss count. Zero norms get the cap.
std::vector<double> gradnorm_weights(const std::vector<double> &grad_norms,
                                     const std::vector<double> &inverse_rates, double alpha,
                                     double weight_cap = 10.0);

} // namespace ssk
