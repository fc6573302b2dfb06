#pragma once

#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "effocr/errors.hpp"
#include "effocr/image.hpp"

namespace effocr {

/// Reads an image file as grayscale in [0,1]. Color inputs are reduced with
/// the 0.299/0.587/0.114 luminance weights. Values land exactly on the
/// 8-bit grid (k/255), matching the renderer's quantization.
inline ImageCrop load_image(const std::string& path) {
    const cv::Mat mat = cv::imread(path, cv::IMREAD_GRAYSCALE);
    if (mat.empty()) throw IoError("cannot read image: " + path);
    ImageCrop img(mat.cols, mat.rows, 0.0f);
    for (int y = 0; y < mat.rows; ++y)
        for (int x = 0; x < mat.cols; ++x)
            img.at(x, y) = static_cast<float>(mat.at<uint8_t>(y, x)) / 255.0f;
    return img;
}

/// Writes a grayscale image as 8-bit PNG.
inline void save_image(const ImageCrop& img, const std::string& path) {
    cv::Mat mat(img.height, img.width, CV_8UC1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            mat.at<uint8_t>(y, x) =
                static_cast<uint8_t>(std::clamp(img.at(x, y), 0.0f, 1.0f) * 255.0f + 0.5f);
    if (!cv::imwrite(path, mat)) throw IoError("cannot write image: " + path);
}

/// Interleaved 8-bit RGB buffer for visualization output.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels; // r, g, b per pixel

    RgbImage() = default;
    RgbImage(int w, int h, uint8_t r = 255, uint8_t g = 255, uint8_t b = 255)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3) {
        for (size_t i = 0; i < pixels.size(); i += 3) {
            pixels[i] = r;
            pixels[i + 1] = g;
            pixels[i + 2] = b;
        }
    }

    void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        const size_t i = (static_cast<size_t>(y) * width + x) * 3;
        pixels[i] = r;
        pixels[i + 1] = g;
        pixels[i + 2] = b;
    }
};

inline void save_image(const RgbImage& img, const std::string& path) {
    cv::Mat mat(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const size_t i = (static_cast<size_t>(y) * img.width + x) * 3;
            mat.at<cv::Vec3b>(y, x) =
                cv::Vec3b(img.pixels[i + 2], img.pixels[i + 1], img.pixels[i]); // BGR
        }
    }
    if (!cv::imwrite(path, mat)) throw IoError("cannot write image: " + path);
}

} // namespace effocr
