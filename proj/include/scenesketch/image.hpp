#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssk {

// Dense row-major image, interleaved channels, values nominally in [0,1].
struct Image {
    int w = 0;
    int h = 0;
    int c = 1;
    std::vector<double> px;

    Image() = default;
    Image(int w_, int h_, int c_, double fill = 0.0) : w(w_), h(h_), c(c_), px(static_cast<size_t>(w_) * h_ * c_, fill) {}

    double &at(int x, int y, int ch = 0) { return px[(static_cast<size_t>(y) * w + x) * c + ch]; }
    double at(int x, int y, int ch = 0) const { return px[(static_cast<size_t>(y) * w + x) * c + ch]; }
    size_t size() const { return px.size(); }
    bool empty() const { return px.empty(); }
};

Image to_gray(const Image &img);
Image to_rgb(const Image &img); // replicates a single channel

// Bilinear resize; linear in the input, so the adjoint is a scatter of the
// same interpolation weights.
Image resize_bilinear(const Image &img, int out_w, int out_h);
Image resize_bilinear_backward(const Image &grad_out, int in_w, int in_h);

// 8-bit PNG (or any OpenCV-supported format, by extension).
void write_image(const std::string &path, const Image &img);
Image read_image(const std::string &path);      // RGB in [0,1]
Image read_image_gray(const std::string &path); // single channel in [0,1]

} // namespace ssk
