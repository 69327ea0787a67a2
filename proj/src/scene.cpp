#include "scenesketch/scene.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include <opencv2/imgproc.hpp>

namespace ssk {

namespace {

cv::Mat mask_to_cv(const Image &mask) {
    cv::Mat m(mask.h, mask.w, CV_8UC1);
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x)
            m.at<uchar>(y, x) = mask.at(x, y) >= 0.5 ? 255 : 0;
    return m;
}

// "Single object" = one 8-connected component after a 3x3 opening.
bool is_single_object(const Image &mask) {
    cv::Mat m = mask_to_cv(mask);
    cv::Mat kernel = cv::getStructuringElement(cv::MORPH_RECT, {3, 3});
    cv::morphologyEx(m, m, cv::MORPH_OPEN, kernel);
    cv::Mat labels;
    int ncomp = cv::connectedComponents(m, labels, 8);
    return ncomp == 2; // background + exactly one object
}

} // namespace

Image MaskFileSaliency::saliency(const Image &photo) const {
    Image m = read_image_gray(path_);
    if (m.w != photo.w || m.h != photo.h)
        m = resize_bilinear(m, photo.w, photo.h);
    return m;
}

Image EdgeSaliency::saliency(const Image &photo) const {
    Image edges = edge_saliency_map(photo); // sums to 1
    // Blur so thresholding yields solid blobs rather than thin outlines.
    cv::Mat m(edges.h, edges.w, CV_64FC1, edges.px.data());
    cv::Mat blurred;
    int k = std::max(3, (std::min(edges.w, edges.h) / 16) | 1);
    cv::GaussianBlur(m, blurred, {k, k}, 0);
    Image out(edges.w, edges.h, 1);
    double mx = 0.0;
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            mx = std::max(mx, blurred.at<double>(y, x));
    if (mx <= 0.0)
        return Image(edges.w, edges.h, 1, 0.0);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            out.at(x, y) = blurred.at<double>(y, x) / mx;
    return out;
}

Image BoundaryAverageInpaint::inpaint(const Image &photo, const Image &mask) const {
    Image out = photo;
    // initialize holes to the mean of the known region
    double mean[3] = {0, 0, 0};
    long count = 0;
    for (int y = 0; y < photo.h; ++y)
        for (int x = 0; x < photo.w; ++x)
            if (mask.at(x, y) < 0.5) {
                for (int c = 0; c < photo.c; ++c)
                    mean[c] += photo.at(x, y, c);
                ++count;
            }
    if (count == 0)
        return out;
    for (int c = 0; c < photo.c; ++c)
        mean[c] /= count;
    std::vector<std::pair<int, int>> holes;
    for (int y = 0; y < photo.h; ++y)
        for (int x = 0; x < photo.w; ++x)
            if (mask.at(x, y) >= 0.5) {
                holes.emplace_back(x, y);
                for (int c = 0; c < photo.c; ++c)
                    out.at(x, y, c) = mean[c];
            }
    Image next = out;
    for (int sweep = 0; sweep < max_sweeps_; ++sweep) {
        double delta = 0.0;
        for (auto [x, y] : holes) {
            for (int c = 0; c < photo.c; ++c) {
                double acc = 0.0;
                int nn = 0;
                const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    int px = x + dx[k], py = y + dy[k];
                    if (px >= 0 && px < photo.w && py >= 0 && py < photo.h) {
                        acc += out.at(px, py, c);
                        ++nn;
                    }
                }
                double v = nn ? acc / nn : out.at(x, y, c);
                delta = std::max(delta, std::abs(v - out.at(x, y, c)));
                next.at(x, y, c) = v;
            }
        }
        for (auto [x, y] : holes)
            for (int c = 0; c < photo.c; ++c)
                out.at(x, y, c) = next.at(x, y, c);
        if (delta < tol_)
            break;
    }
    return out;
}

SceneDecomposition decompose(const Image &photo, const SaliencyBackend &saliency,
                             const InpaintBackend &inpaint) {
    SceneDecomposition d;
    d.photo = photo;
    Image map = saliency.saliency(photo);
    d.mask = Image(photo.w, photo.h, 1, 0.0);
    long salient = 0;
    for (int y = 0; y < photo.h; ++y)
        for (int x = 0; x < photo.w; ++x) {
            bool on = map.at(x, y) >= 0.5;
            d.mask.at(x, y) = on ? 1.0 : 0.0;
            salient += on;
        }
    d.foreground_img = Image(photo.w, photo.h, photo.c, 1.0);
    if (salient == 0) {
        std::cerr << "warning: empty saliency mask, treating the whole image as background\n";
        d.background_img = photo;
        d.single_object = false;
        return d;
    }
    for (int y = 0; y < photo.h; ++y)
        for (int x = 0; x < photo.w; ++x)
            if (d.mask.at(x, y) >= 0.5)
                for (int c = 0; c < photo.c; ++c)
                    d.foreground_img.at(x, y, c) = photo.at(x, y, c);
    d.background_img = inpaint.inpaint(photo, d.mask);
    d.single_object = is_single_object(d.mask);
    return d;
}

SceneDecomposition rescale_object(const SceneDecomposition &decomp, double target_coverage) {
    SceneDecomposition d = decomp;
    if (!d.single_object) {
        std::cerr << "info: rescale_object skipped (not a single object)\n";
        return d;
    }
    int minx = d.mask.w, miny = d.mask.h, maxx = -1, maxy = -1;
    for (int y = 0; y < d.mask.h; ++y)
        for (int x = 0; x < d.mask.w; ++x)
            if (d.mask.at(x, y) >= 0.5) {
                minx = std::min(minx, x);
                maxx = std::max(maxx, x);
                miny = std::min(miny, y);
                maxy = std::max(maxy, y);
            }
    if (maxx < minx)
        return d;
    double bw = maxx - minx + 1, bh = maxy - miny + 1;
    double img_area = static_cast<double>(d.mask.w) * d.mask.h;
    double bbox_area = bw * bh;
    if (bbox_area >= target_coverage * img_area)
        return d; // already large enough

    double scale = std::sqrt(target_coverage * img_area / bbox_area);
    scale = std::min({scale, d.mask.w / bw, d.mask.h / bh}); // stay inside the canvas

    // normalized: object center -> image center, uniform scale about origin
    double cx = (minx + maxx + 1) * 0.5 / d.mask.w;
    double cy = (miny + maxy + 1) * 0.5 / d.mask.h;
    CanvasTransform xf;
    xf.scale = scale;
    xf.translation = {0.5 - scale * cx, 0.5 - scale * cy};
    d.fg_transform = xf;

    // resample the foreground image through the inverse map, white fill
    CanvasTransform inv = xf.inverse();
    Image warped(d.foreground_img.w, d.foreground_img.h, d.foreground_img.c, 1.0);
    for (int y = 0; y < warped.h; ++y)
        for (int x = 0; x < warped.w; ++x) {
            Vec2 src = inv.apply({(x + 0.5) / warped.w, (y + 0.5) / warped.h});
            double sx = src.x * warped.w - 0.5, sy = src.y * warped.h - 0.5;
            int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            double wx = sx - x0, wy = sy - y0;
            for (int c = 0; c < warped.c; ++c) {
                double acc = 0.0;
                for (int dy = 0; dy <= 1; ++dy)
                    for (int dx = 0; dx <= 1; ++dx) {
                        int px = x0 + dx, py = y0 + dy;
                        double v = (px >= 0 && px < warped.w && py >= 0 && py < warped.h)
                                       ? d.foreground_img.at(px, py, c)
                                       : 1.0;
                        acc += v * (dx ? wx : 1 - wx) * (dy ? wy : 1 - wy);
                    }
                warped.at(x, y, c) = acc;
            }
        }
    d.foreground_img = warped;
    return d;
}

std::vector<Stroke> init_strokes(const Image &target_img, const Image &relevancy, int n, unsigned seed,
                                 double base_width, Region region, double offset_std) {
    (void)target_img;
    const int w = relevancy.w, h = relevancy.h;
    const long npix = static_cast<long>(w) * h;
    if (n < 1)
        throw std::domain_error("init_strokes: n must be >= 1");
    if (n > npix)
        throw std::domain_error("init_strokes: more strokes than pixels");

    std::mt19937 rng(seed);
    std::vector<double> weights(relevancy.px);
    double wsum = 0.0;
    for (auto &v : weights) {
        v = std::max(v, 0.0);
        wsum += v;
    }
    if (wsum <= 0.0)
        std::fill(weights.begin(), weights.end(), 1.0);
    std::vector<long> anchors;
    anchors.reserve(n);
    std::vector<double> live = weights;
    for (int i = 0; i < n; ++i) {
        double total = 0.0;
        for (double v : live)
            total += v;
        if (total <= 0.0)
            live = weights; // support exhausted: continue with replacement
        std::discrete_distribution<long> dist(live.begin(), live.end());
        long idx = dist(rng);
        anchors.push_back(idx);
        live[idx] = 0.0;
    }

    std::normal_distribution<double> offset(0.0, offset_std);
    std::vector<Stroke> strokes;
    strokes.reserve(n);
    for (long idx : anchors) {
        Stroke s;
        s.width = base_width;
        s.probability = 1.0;
        s.region = region;
        Vec2 anchor{(idx % w + 0.5) / w, (idx / w + 0.5) / h};
        s.points[0] = anchor;
        for (int k = 1; k < 4; ++k)
            s.points[k] = {anchor.x + offset(rng), anchor.y + offset(rng)};
        strokes.push_back(s);
    }
    return strokes;
}

} // namespace ssk
