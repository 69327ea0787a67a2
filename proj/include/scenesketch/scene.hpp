#pragma once

#include "scenesketch/encoder.hpp"
#include "scenesketch/geometry.hpp"
#include "scenesketch/image.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace ssk {

struct SceneDecomposition {
    Image photo;          // RGB
    Image mask;           // binary, 1 = salient object
    Image foreground_img; // masked object on white
    Image background_img; // inpainted background
    CanvasTransform fg_transform; // identity unless rescale_object ran
    bool single_object = false;
};

class SaliencyBackend {
public:
    virtual ~SaliencyBackend() = default;
    // Map in [0,1], thresholded at 0.5 by decompose.
    virtual Image saliency(const Image &photo) const = 0;
};

// User-provided mask file; bypasses any model.
class MaskFileSaliency : public SaliencyBackend {
public:
    explicit MaskFileSaliency(std::string path) : path_(std::move(path)) {}
    Image saliency(const Image &photo) const override;

private:
    std::string path_;
};

// Fallback: gradient-magnitude map blurred and max-normalized. Runs with no
// weights present; a stand-in for a pretrained salient-object detector.
class EdgeSaliency : public SaliencyBackend {
public:
    Image saliency(const Image &photo) const override;
};

class InpaintBackend {
public:
    virtual ~InpaintBackend() = default;
    virtual Image inpaint(const Image &photo, const Image &mask) const = 0;
};

// Iterative boundary-average fill (Jacobi sweeps over the masked region).
class BoundaryAverageInpaint : public InpaintBackend {
public:
    explicit BoundaryAverageInpaint(int max_sweeps = 512, double tol = 1e-4)
        : max_sweeps_(max_sweeps), tol_(tol) {}
    Image inpaint(const Image &photo, const Image &mask) const override;

private:
    int max_sweeps_;
    double tol_;
};

SceneDecomposition decompose(const Image &photo, const SaliencyBackend &saliency,
                             const InpaintBackend &inpaint);

// Centers and uniformly scales a single detected object so its bounding box
// covers ~70% of the image; records the transform for mapping sketches back.
SceneDecomposition rescale_object(const SceneDecomposition &decomp, double target_coverage = 0.7);

std::vector<Stroke> init_strokes(const Image &target_img, const Image &relevancy, int n, unsigned seed,
                                 double base_width = 1.5, Region region = Region::Foreground,
                                 double offset_std = 0.05);

} // namespace ssk
