#include "scenesketch/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace ssk {

Image to_gray(const Image &img) {
    if (img.c == 1)
        return img;
    if (img.c != 3)
        throw std::invalid_argument("to_gray: expected 1 or 3 channels");
    Image out(img.w, img.h, 1);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            out.at(x, y) = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
    return out;
}

Image to_rgb(const Image &img) {
    if (img.c == 3)
        return img;
    if (img.c != 1)
        throw std::invalid_argument("to_rgb: expected 1 or 3 channels");
    Image out(img.w, img.h, 3);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < 3; ++ch)
                out.at(x, y, ch) = img.at(x, y);
    return out;
}

namespace {

// Sample positions per align_corners=false convention.
inline void src_coord(int oi, int out_n, int in_n, int &i0, int &i1, double &w1) {
    double s = (oi + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in_n - 1));
    i0 = static_cast<int>(std::floor(s));
    i1 = std::min(i0 + 1, in_n - 1);
    w1 = s - i0;
}

} // namespace

Image resize_bilinear(const Image &img, int out_w, int out_h) {
    if (img.w == out_w && img.h == out_h)
        return img;
    Image out(out_w, out_h, img.c);
    for (int y = 0; y < out_h; ++y) {
        int y0, y1;
        double wy;
        src_coord(y, out_h, img.h, y0, y1, wy);
        for (int x = 0; x < out_w; ++x) {
            int x0, x1;
            double wx;
            src_coord(x, out_w, img.w, x0, x1, wx);
            for (int ch = 0; ch < img.c; ++ch) {
                double v = (1 - wy) * ((1 - wx) * img.at(x0, y0, ch) + wx * img.at(x1, y0, ch)) +
                           wy * ((1 - wx) * img.at(x0, y1, ch) + wx * img.at(x1, y1, ch));
                out.at(x, y, ch) = v;
            }
        }
    }
    return out;
}

Image resize_bilinear_backward(const Image &grad_out, int in_w, int in_h) {
    Image grad_in(in_w, in_h, grad_out.c, 0.0);
    if (grad_out.w == in_w && grad_out.h == in_h)
        return grad_out;
    for (int y = 0; y < grad_out.h; ++y) {
        int y0, y1;
        double wy;
        src_coord(y, grad_out.h, in_h, y0, y1, wy);
        for (int x = 0; x < grad_out.w; ++x) {
            int x0, x1;
            double wx;
            src_coord(x, grad_out.w, in_w, x0, x1, wx);
            for (int ch = 0; ch < grad_out.c; ++ch) {
                double g = grad_out.at(x, y, ch);
                grad_in.at(x0, y0, ch) += (1 - wy) * (1 - wx) * g;
                grad_in.at(x1, y0, ch) += (1 - wy) * wx * g;
                grad_in.at(x0, y1, ch) += wy * (1 - wx) * g;
                grad_in.at(x1, y1, ch) += wy * wx * g;
            }
        }
    }
    return grad_in;
}

void write_image(const std::string &path, const Image &img) {
    cv::Mat m(img.h, img.w, img.c == 1 ? CV_8UC1 : CV_8UC3);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            if (img.c == 1) {
                m.at<uchar>(y, x) = static_cast<uchar>(std::lround(std::clamp(img.at(x, y), 0.0, 1.0) * 255.0));
            } else {
                // OpenCV stores BGR
                cv::Vec3b &v = m.at<cv::Vec3b>(y, x);
                v[2] = static_cast<uchar>(std::lround(std::clamp(img.at(x, y, 0), 0.0, 1.0) * 255.0));
                v[1] = static_cast<uchar>(std::lround(std::clamp(img.at(x, y, 1), 0.0, 1.0) * 255.0));
                v[0] = static_cast<uchar>(std::lround(std::clamp(img.at(x, y, 2), 0.0, 1.0) * 255.0));
            }
        }
    if (!cv::imwrite(path, m))
        throw std::runtime_error("cannot write image: " + path);
}

Image read_image(const std::string &path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
    if (m.empty())
        throw std::runtime_error("cannot read image: " + path);
    Image img(m.cols, m.rows, 3);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            const cv::Vec3b &v = m.at<cv::Vec3b>(y, x);
            img.at(x, y, 0) = v[2] / 255.0;
            img.at(x, y, 1) = v[1] / 255.0;
            img.at(x, y, 2) = v[0] / 255.0;
        }
    return img;
}

Image read_image_gray(const std::string &path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
    if (m.empty())
        throw std::runtime_error("cannot read image: " + path);
    Image img(m.cols, m.rows, 1);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x)
            img.at(x, y) = m.at<uchar>(y, x) / 255.0;
    return img;
}

} // namespace ssk
