#pragma once

#include "scenesketch/encoder.hpp"

#include <Eigen/Core>
#include <string>
#include <vector>

namespace ssk {

struct VitConfig {
    int image_size = 224;
    int patch = 32;
    int width = 768;
    int depth = 12;
    int heads = 12;
    int embed_dim = 512;

    int grid() const { return image_size / patch; }
    int tokens() const { return grid() * grid() + 1; }
};

struct VitBlockWeights {
    Eigen::VectorXd ln1_g, ln1_b, ln2_g, ln2_b;
    Eigen::MatrixXd qkv_w; // 3W x W
    Eigen::VectorXd qkv_b;
    Eigen::MatrixXd out_w; // W x W
    Eigen::VectorXd out_b;
    Eigen::MatrixXd fc_w; // 4W x W
    Eigen::VectorXd fc_b;
    Eigen::MatrixXd proj_w; // W x 4W
    Eigen::VectorXd proj_b;
};

struct VitWeights {
    VitConfig cfg;
    Eigen::MatrixXd patch_proj; // W x 3*patch*patch, no bias
    Eigen::VectorXd class_embed;
    Eigen::MatrixXd pos_embed; // tokens x W
    Eigen::VectorXd ln_pre_g, ln_pre_b, ln_post_g, ln_post_b;
    std::vector<VitBlockWeights> blocks;
    Eigen::MatrixXd visual_proj; // embed_dim x W

    static VitWeights random(const VitConfig &cfg, unsigned seed);
    static VitWeights load(const std::string &path);
    void save(const std::string &path) const;
};

// CLIP-style vision transformer (QuickGELU, pre-LN) with a hand-written
// adjoint so the perceptual loss can push gradients back to image pixels.
// Layer k (1..depth-1) exposes the token sequence after block k.
class VitEncoder : public Encoder {
public:
    explicit VitEncoder(const std::string &weights_path);
    explicit VitEncoder(VitWeights weights);

    int depth() const override { return weights_.cfg.depth - 1; }
    int input_size() const override { return weights_.cfg.image_size; }
    std::string name() const override { return "clip_vit_b32"; }

    EncodeResult encode_with_grad(const Image &img, const std::vector<int> &layers) const override;
    Image relevancy_map(const Image &photo) const override;
    Eigen::VectorXd image_embedding(const Image &img) const override;

private:
    VitWeights weights_;
};

} // namespace ssk
