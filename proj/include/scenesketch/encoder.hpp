#pragma once

#include "scenesketch/image.hpp"

#include <Eigen/Core>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace ssk {

struct LayerActivations {
    std::map<int, Eigen::VectorXd> layers; // layer index -> flattened activations
    int source_resolution = 0;
};

enum class EncoderBackend { Toy, ClipVitB32 };

struct EncoderSpec {
    EncoderBackend backend = EncoderBackend::Toy;
    std::vector<int> layers_fidelity{2, 7, 8, 11};
    int layer_geometry = 4; // extra foreground layer
    std::string weights_path;
};

// Result of a differentiable encode: activations plus an adjoint closure
// mapping per-layer activation gradients back to image-pixel gradients.
struct EncodeResult {
    LayerActivations activations;
    std::function<Image(const std::map<int, Eigen::VectorXd> &)> backward;
};

class Encoder {
public:
    virtual ~Encoder() = default;

    virtual int depth() const = 0;      // number of usable intermediate layers
    virtual int input_size() const = 0; // square input resolution
    virtual std::string name() const = 0;

    virtual EncodeResult encode_with_grad(const Image &img, const std::vector<int> &layers) const = 0;

    LayerActivations encode(const Image &img, const std::vector<int> &layers) const {
        return encode_with_grad(img, layers).activations;
    }

    // Normalized saliency heatmap (sums to 1) at the photo's resolution.
    virtual Image relevancy_map(const Image &photo) const = 0;

    // Global image embedding for zero-shot recognizability.
    virtual Eigen::VectorXd image_embedding(const Image &img) const = 0;

protected:
    void check_layers(const std::vector<int> &layers) const;
};

// Deterministic seeded random-projection patch encoder: 16x16 patches, a
// linear projection, then `depth` fixed random linear maps with tanh.
// No pretrained weights, differentiable, cheap; the CI stand-in for CLIP.
class ToyEncoder : public Encoder {
public:
    explicit ToyEncoder(int input_size = 224, int channels = 32, int depth = 11, unsigned seed = 1234);

    int depth() const override { return static_cast<int>(layer_maps_.size()); }
    int input_size() const override { return input_size_; }
    std::string name() const override { return "toy"; }

    EncodeResult encode_with_grad(const Image &img, const std::vector<int> &layers) const override;
    Image relevancy_map(const Image &photo) const override;
    Eigen::VectorXd image_embedding(const Image &img) const override;

private:
    int input_size_;
    int patch_ = 16;
    Eigen::MatrixXd proj_;                 // channels x patch*patch
    std::vector<Eigen::MatrixXd> layer_maps_; // channels x channels
};

// Gradient-magnitude fallback saliency (also used by the toy encoder).
Image edge_saliency_map(const Image &photo);

std::shared_ptr<Encoder> make_encoder(const EncoderSpec &spec);

} // namespace ssk
