#include "scenesketch/augment.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace ssk {

namespace {

// Solves the homography with h22 = 1 mapping (sx_i, sy_i) -> (dx_i, dy_i).
std::array<double, 9> solve_homography(const std::array<std::array<double, 2>, 4> &src,
                                       const std::array<std::array<double, 2>, 4> &dst) {
    Eigen::Matrix<double, 8, 8> A = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 1> b;
    for (int i = 0; i < 4; ++i) {
        double x = src[i][0], y = src[i][1], u = dst[i][0], v = dst[i][1];
        A.row(2 * i) << x, y, 1, 0, 0, 0, -x * u, -y * u;
        A.row(2 * i + 1) << 0, 0, 0, x, y, 1, -x * v, -y * v;
        b(2 * i) = u;
        b(2 * i + 1) = v;
    }
    Eigen::Matrix<double, 8, 1> h = A.fullPivLu().solve(b);
    return {h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0};
}

} // namespace

AffineAugment AffineAugment::sample(std::mt19937 &rng, int size, double perspective, double crop_min,
                                    double crop_max) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double S = static_cast<double>(size);
    double scale = crop_min + (crop_max - crop_min) * uni(rng);
    double w = S * scale;
    double x0 = (S - w) * uni(rng);
    double y0 = (S - w) * uni(rng);
    // crop corners with perspective jitter
    std::array<std::array<double, 2>, 4> dst = {{{x0, y0}, {x0 + w, y0}, {x0 + w, y0 + w}, {x0, y0 + w}}};
    double half = perspective * w / 2.0;
    for (auto &c : dst) {
        c[0] += (2.0 * uni(rng) - 1.0) * half;
        c[1] += (2.0 * uni(rng) - 1.0) * half;
    }
    std::array<std::array<double, 2>, 4> src = {{{0, 0}, {S, 0}, {S, S}, {0, S}}};
    AffineAugment a;
    a.h = solve_homography(src, dst);
    return a;
}

Image AffineAugment::apply(const Image &img) const {
    Image out(img.w, img.h, img.c, fill);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double denom = h[6] * x + h[7] * y + h[8];
            double sx = (h[0] * x + h[1] * y + h[2]) / denom;
            double sy = (h[3] * x + h[4] * y + h[5]) / denom;
            int x0 = static_cast<int>(std::floor(sx));
            int y0 = static_cast<int>(std::floor(sy));
            double wx = sx - x0, wy = sy - y0;
            for (int ch = 0; ch < img.c; ++ch) {
                double acc = 0.0;
                for (int dy = 0; dy <= 1; ++dy)
                    for (int dx = 0; dx <= 1; ++dx) {
                        double wgt = (dx ? wx : 1 - wx) * (dy ? wy : 1 - wy);
                        int px = x0 + dx, py = y0 + dy;
                        double v = (px >= 0 && px < img.w && py >= 0 && py < img.h) ? img.at(px, py, ch) : fill;
                        acc += wgt * v;
                    }
                out.at(x, y, ch) = acc;
            }
        }
    return out;
}

Image AffineAugment::backward(const Image &grad_out, int in_w, int in_h, int in_c) const {
    Image grad_in(in_w, in_h, in_c, 0.0);
    for (int y = 0; y < grad_out.h; ++y)
        for (int x = 0; x < grad_out.w; ++x) {
            double denom = h[6] * x + h[7] * y + h[8];
            double sx = (h[0] * x + h[1] * y + h[2]) / denom;
            double sy = (h[3] * x + h[4] * y + h[5]) / denom;
            int x0 = static_cast<int>(std::floor(sx));
            int y0 = static_cast<int>(std::floor(sy));
            double wx = sx - x0, wy = sy - y0;
            for (int ch = 0; ch < in_c; ++ch) {
                double g = grad_out.at(x, y, ch);
                if (g == 0.0)
                    continue;
                for (int dy = 0; dy <= 1; ++dy)
                    for (int dx = 0; dx <= 1; ++dx) {
                        int px = x0 + dx, py = y0 + dy;
                        if (px >= 0 && px < in_w && py >= 0 && py < in_h)
                            grad_in.at(px, py, ch) += g * (dx ? wx : 1 - wx) * (dy ? wy : 1 - wy);
                    }
            }
        }
    return grad_in;
}

} // namespace ssk
