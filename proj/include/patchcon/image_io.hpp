#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "patchcon/raster.hpp"

namespace patchcon {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline cv::Mat wrap(Raster<float>& r) {
    return cv::Mat(r.rows(), r.cols(), CV_32FC(r.channels()), r.data().data());
}
inline cv::Mat wrap(const Raster<float>& r) {
    return cv::Mat(r.rows(), r.cols(), CV_32FC(r.channels()), const_cast<float*>(r.data().data()));
}
inline cv::Mat wrap(const Raster<std::uint8_t>& r) {
    return cv::Mat(r.rows(), r.cols(), CV_8UC(r.channels()), const_cast<std::uint8_t*>(r.data().data()));
}

}  // namespace detail

/// Reads a color image as RGB floats in [0, 1].
inline Image read_image(const fs::path& path) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError("cannot read image: " + path.string());
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    Image out(rgb.rows, rgb.cols, 3);
    rgb.convertTo(detail::wrap(out), CV_32FC3, 1.0 / 255.0);
    return out;
}

struct MaskReadResult {
    Mask mask;
    bool was_binary = true;  // source held only {0, 1} or {0, 255}
};

/// Reads a single-channel mask; any nonzero value becomes 1.
inline MaskReadResult read_mask(const fs::path& path) {
    cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (gray.empty()) throw IoError("cannot read mask: " + path.string());
    MaskReadResult r{Mask(gray.rows, gray.cols), true};
    for (int y = 0; y < gray.rows; ++y) {
        const auto* row = gray.ptr<std::uint8_t>(y);
        for (int x = 0; x < gray.cols; ++x) {
            const std::uint8_t v = row[x];
            if (v != 0 && v != 1 && v != 255) r.was_binary = false;
            r.mask.at(y, x) = v != 0;
        }
    }
    return r;
}

inline void write_png(const fs::path& path, const cv::Mat& m) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), m)) throw IoError("cannot write image: " + path.string());
}

/// Writes a binary mask as 0/255 grayscale.
inline void write_mask(const fs::path& path, const Mask& mask) {
    cv::Mat out;
    detail::wrap(mask).convertTo(out, CV_8U, 255.0);
    write_png(path, out);
}

/// Writes an RGB float image in [0, 1] as 8-bit.
inline void write_image(const fs::path& path, const Image& image) {
    cv::Mat rgb8, bgr8;
    detail::wrap(image).convertTo(rgb8, CV_8UC3, 255.0);
    cv::cvtColor(rgb8, bgr8, cv::COLOR_RGB2BGR);
    write_png(path, bgr8);
}

inline void write_rgb8(const fs::path& path, const Raster<std::uint8_t>& rgb) {
    cv::Mat bgr;
    cv::cvtColor(detail::wrap(rgb), bgr, cv::COLOR_RGB2BGR);
    write_png(path, bgr);
}

inline Image resize_image(const Image& image, int rows, int cols) {
    if (image.rows() == rows && image.cols() == cols) return image;
    Image out(rows, cols, image.channels());
    const int interp = (rows < image.rows() && cols < image.cols()) ? cv::INTER_AREA : cv::INTER_LINEAR;
    cv::Mat dst = detail::wrap(out);
    cv::resize(detail::wrap(image), dst, cv::Size(cols, rows), 0, 0, interp);
    return out;
}

inline Mask resize_mask(const Mask& mask, int rows, int cols) {
    if (mask.rows() == rows && mask.cols() == cols) return mask;
    Mask out(rows, cols);
    cv::Mat dst(rows, cols, CV_8UC1, out.data().data());
    cv::resize(detail::wrap(mask), dst, cv::Size(cols, rows), 0, 0, cv::INTER_NEAREST);
    return out;
}

}  // namespace patchcon
