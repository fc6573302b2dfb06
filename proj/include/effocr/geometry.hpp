#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "effocr/errors.hpp"

namespace effocr {

/// Axis-aligned pixel rectangle, origin top-left, x0 < x1 and y0 < y1.
struct BBox {
    float x0 = 0.0f;
    float y0 = 0.0f;
    float x1 = 0.0f;
    float y1 = 0.0f;

    float width() const { return x1 - x0; }
    float height() const { return y1 - y0; }
    float area() const { return width() * height(); }
    float center_x() const { return 0.5f * (x0 + x1); }
    float center_y() const { return 0.5f * (y0 + y1); }

    bool valid() const {
        return std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) && std::isfinite(y1) &&
               x0 < x1 && y0 < y1;
    }

    /// Center-containment test, half-open on the far edges.
    bool contains(float px, float py) const {
        return px >= x0 && px < x1 && py >= y0 && py < y1;
    }

    bool operator==(const BBox& o) const = default;
};

enum class ObjectClass { Line, Word, Char };

/// Writing direction: horizontal rows read top-to-bottom, or vertical
/// columns read right-to-left.
enum class Orientation { Horizontal, Vertical };

inline const char* object_class_name(ObjectClass c) {
    switch (c) {
        case ObjectClass::Line: return "line";
        case ObjectClass::Word: return "word";
        case ObjectClass::Char: return "char";
    }
    return "?";
}

/// Detector output: box + class + confidence in [0,1].
struct DetectedObject {
    BBox bbox;
    ObjectClass cls = ObjectClass::Line;
    float confidence = 0.0f;

    bool operator==(const DetectedObject& o) const = default;
};

/// Intersection over union. Boxes touching only on an edge score 0.
inline float iou(const BBox& a, const BBox& b) {
    const float ix0 = std::max(a.x0, b.x0);
    const float iy0 = std::max(a.y0, b.y0);
    const float ix1 = std::min(a.x1, b.x1);
    const float iy1 = std::min(a.y1, b.y1);
    const float iw = ix1 - ix0;
    const float ih = iy1 - iy0;
    if (iw <= 0.0f || ih <= 0.0f) return 0.0f;
    const float inter = iw * ih;
    const float uni = a.area() + b.area() - inter;
    if (uni <= 0.0f) return 0.0f;
    return inter / uni;
}

namespace detail {
// Confidence descending; ties broken by smaller x0, then smaller y0, so the
// result does not depend on input order.
inline bool detection_order(const DetectedObject& a, const DetectedObject& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.bbox.x0 != b.bbox.x0) return a.bbox.x0 < b.bbox.x0;
    if (a.bbox.y0 != b.bbox.y0) return a.bbox.y0 < b.bbox.y0;
    if (a.bbox.x1 != b.bbox.x1) return a.bbox.x1 < b.bbox.x1;
    if (a.bbox.y1 != b.bbox.y1) return a.bbox.y1 < b.bbox.y1;
    return static_cast<int>(a.cls) < static_cast<int>(b.cls);
}
} // namespace detail

/// Greedy class-wise non-maximum suppression. Keeps a box iff its IoU with
/// every already-kept box of the same class is <= iou_thresh. Output is
/// sorted by confidence descending and is a subset of the input.
inline std::vector<DetectedObject> nms(std::vector<DetectedObject> dets, float iou_thresh) {
    std::sort(dets.begin(), dets.end(), detail::detection_order);
    std::vector<DetectedObject> kept;
    kept.reserve(dets.size());
    for (const auto& d : dets) {
        bool suppressed = false;
        for (const auto& k : kept) {
            if (k.cls == d.cls && iou(k.bbox, d.bbox) > iou_thresh) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

/// Clamps a box to [0,width]x[0,height]. Throws DegenerateBox when the
/// clipped box has zero width or height (detection fully outside the image).
inline BBox clip(const BBox& b, int width, int height) {
    BBox c;
    c.x0 = std::clamp(b.x0, 0.0f, static_cast<float>(width));
    c.y0 = std::clamp(b.y0, 0.0f, static_cast<float>(height));
    c.x1 = std::clamp(b.x1, 0.0f, static_cast<float>(width));
    c.y1 = std::clamp(b.y1, 0.0f, static_cast<float>(height));
    if (c.x0 >= c.x1 || c.y0 >= c.y1) {
        throw DegenerateBox("clip produced a zero-area box from (" + std::to_string(b.x0) + "," +
                            std::to_string(b.y0) + "," + std::to_string(b.x1) + "," +
                            std::to_string(b.y1) + ")");
    }
    return c;
}

/// Integer pixel rectangle, produced only at crop time.
struct IntRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
};

/// Rasterization rule: floor for x0/y0, ceil for x1/y1.
inline IntRect raster(const BBox& b) {
    return IntRect{static_cast<int>(std::floor(b.x0)), static_cast<int>(std::floor(b.y0)),
                   static_cast<int>(std::ceil(b.x1)), static_cast<int>(std::ceil(b.y1))};
}

} // namespace effocr
