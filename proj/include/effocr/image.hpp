#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "effocr/errors.hpp"
#include "effocr/geometry.hpp"

namespace effocr {

/// Where a crop came from, carried through the pipeline so detectors and
/// exporters can map local coordinates back to the page.
struct CropProvenance {
    std::string page_id;
    int line_index = -1;
    int word_index = -1;
    int char_index = -1;
    // Top-left of this crop in page pixel coordinates.
    int origin_x = 0;
    int origin_y = 0;
};

/// Grayscale image, values in [0,1], row-major.
struct ImageCrop {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;
    std::optional<CropProvenance> provenance;

    ImageCrop() = default;
    ImageCrop(int w, int h, float fill = 1.0f)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

    float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    float at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    bool empty() const { return width <= 0 || height <= 0; }
};

/// Luminance weights for color inputs.
inline float luminance(float r, float g, float b) {
    return 0.299f * r + 0.587f * g + 0.114f * b;
}

/// Bilinear resize with half-pixel centers.
inline ImageCrop resize_bilinear(const ImageCrop& src, int out_w, int out_h) {
    ImageCrop dst(out_w, out_h, 0.0f);
    if (src.empty() || out_w <= 0 || out_h <= 0) return dst;
    const float sx = static_cast<float>(src.width) / out_w;
    const float sy = static_cast<float>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        float fy = (y + 0.5f) * sy - 0.5f;
        fy = std::clamp(fy, 0.0f, static_cast<float>(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const float wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            float fx = (x + 0.5f) * sx - 0.5f;
            fx = std::clamp(fx, 0.0f, static_cast<float>(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const float wx = fx - x0;
            const float top = src.at(x0, y0) * (1.0f - wx) + src.at(x1, y0) * wx;
            const float bot = src.at(x0, y1) * (1.0f - wx) + src.at(x1, y1) * wx;
            dst.at(x, y) = top * (1.0f - wy) + bot * wy;
        }
    }
    return dst;
}

/// Pads the shorter dimension symmetrically (extra pixel goes to the
/// bottom/right) until the image is square.
inline ImageCrop pad_to_square(const ImageCrop& src, float fill = 1.0f) {
    if (src.width == src.height) return src;
    const int side = std::max(src.width, src.height);
    ImageCrop dst(side, side, fill);
    const int off_x = (side - src.width) / 2;
    const int off_y = (side - src.height) / 2;
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) dst.at(x + off_x, y + off_y) = src.at(x, y);
    dst.provenance = src.provenance;
    return dst;
}

/// Extracts the given integer rectangle, clamped to the image bounds.
inline ImageCrop crop(const ImageCrop& src, const IntRect& r) {
    const int x0 = std::clamp(r.x0, 0, src.width);
    const int y0 = std::clamp(r.y0, 0, src.height);
    const int x1 = std::clamp(r.x1, 0, src.width);
    const int y1 = std::clamp(r.y1, 0, src.height);
    if (x0 >= x1 || y0 >= y1) {
        throw DegenerateBox("crop rectangle is empty after clamping");
    }
    ImageCrop dst(x1 - x0, y1 - y0, 0.0f);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) dst.at(x - x0, y - y0) = src.at(x, y);
    return dst;
}

/// Copies src into dst with its top-left at (x, y); off-image parts are dropped.
inline void paste(ImageCrop& dst, const ImageCrop& src, int x, int y) {
    for (int sy = 0; sy < src.height; ++sy) {
        const int dy = y + sy;
        if (dy < 0 || dy >= dst.height) continue;
        for (int sx = 0; sx < src.width; ++sx) {
            const int dx = x + sx;
            if (dx < 0 || dx >= dst.width) continue;
            dst.at(dx, dy) = src.at(sx, sy);
        }
    }
}

inline bool images_equal(const ImageCrop& a, const ImageCrop& b) {
    return a.width == b.width && a.height == b.height && a.pixels == b.pixels;
}

} // namespace effocr
