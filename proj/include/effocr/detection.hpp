#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "effocr/coco.hpp"
#include "effocr/errors.hpp"
#include "effocr/geometry.hpp"
#include "effocr/image.hpp"
#include "effocr/onnx.hpp"

namespace effocr {

enum class DetectorKind { ModelFile, GroundTruth };
enum class ConfMode { Product, ClassOnly };

struct DetectorSpec {
    DetectorKind kind = DetectorKind::GroundTruth;
    std::string model_path;      // ModelFile
    std::string annotation_path; // GroundTruth: COCO JSON
    float conf_thresh = 0.25f;   // conventional YOLO-family defaults
    float iou_thresh = 0.45f;
    int input_h = 640;
    int input_w = 640;
    std::vector<std::string> classes; // model class index -> line/word/char
    ConfMode conf_mode = ConfMode::Product;
};

inline ObjectClass class_from_name(const std::string& name) {
    if (name == "line") return ObjectClass::Line;
    if (name == "word") return ObjectClass::Word;
    if (name == "char") return ObjectClass::Char;
    throw ConfigError("detector: unknown class name \"" + name +
                      "\"; allowed: line, word, char");
}

inline void validate_detector_spec(const DetectorSpec& spec) {
    if (spec.conf_thresh < 0.0f || spec.conf_thresh > 1.0f)
        throw ConfigError("detector: conf_thresh must be in [0,1]");
    if (spec.iou_thresh < 0.0f || spec.iou_thresh > 1.0f)
        throw ConfigError("detector: iou_thresh must be in [0,1]");
    if (spec.kind == DetectorKind::ModelFile) {
        if (spec.model_path.empty()) throw ConfigError("detector: model_path required");
        if (spec.classes.empty()) throw ConfigError("detector: classes required");
        for (const auto& c : spec.classes) class_from_name(c);
        if (spec.input_h <= 0 || spec.input_w <= 0)
            throw ConfigError("detector: input_size must be positive");
    } else {
        if (spec.annotation_path.empty())
            throw ConfigError("detector: annotation_path required for ground_truth detectors");
    }
}

/// One output row of a YOLO-family detection head, in model input coordinates.
struct RawDetection {
    float cx = 0.0f;
    float cy = 0.0f;
    float w = 0.0f;
    float h = 0.0f;
    float objectness = 0.0f;
    std::vector<float> class_scores;
};

/// Aspect-preserving resize with centered gray padding; stores the inverse.
struct Letterbox {
    float scale = 1.0f;
    float pad_x = 0.0f;
    float pad_y = 0.0f;
};

inline Letterbox compute_letterbox(int src_w, int src_h, int in_w, int in_h) {
    Letterbox lb;
    lb.scale = std::min(static_cast<float>(in_w) / src_w, static_cast<float>(in_h) / src_h);
    lb.pad_x = 0.5f * (in_w - src_w * lb.scale);
    lb.pad_y = 0.5f * (in_h - src_h * lb.scale);
    return lb;
}

inline ImageCrop letterbox_image(const ImageCrop& src, int in_w, int in_h, float fill = 0.5f) {
    const Letterbox lb = compute_letterbox(src.width, src.height, in_w, in_h);
    const int scaled_w = std::max(1, static_cast<int>(std::round(src.width * lb.scale)));
    const int scaled_h = std::max(1, static_cast<int>(std::round(src.height * lb.scale)));
    ImageCrop resized = resize_bilinear(src, scaled_w, scaled_h);
    ImageCrop canvas(in_w, in_h, fill);
    paste(canvas, resized, static_cast<int>(std::round(lb.pad_x)),
          static_cast<int>(std::round(lb.pad_y)));
    return canvas;
}

/// Center/size to corner form, letterbox undo, confidence thresholding,
/// clipping, then class-wise NMS. Rows clipped entirely outside the image
/// are dropped.
inline std::vector<DetectedObject> decode(const std::vector<RawDetection>& raw,
                                          const DetectorSpec& spec, int orig_w, int orig_h) {
    const Letterbox lb = compute_letterbox(orig_w, orig_h, spec.input_w, spec.input_h);
    std::vector<DetectedObject> dets;
    dets.reserve(raw.size());
    for (const auto& r : raw) {
        if (r.class_scores.empty() || r.w <= 0.0f || r.h <= 0.0f) continue;
        const auto best =
            std::max_element(r.class_scores.begin(), r.class_scores.end());
        const size_t cls_idx = static_cast<size_t>(best - r.class_scores.begin());
        const float conf =
            spec.conf_mode == ConfMode::Product ? r.objectness * (*best) : *best;
        if (conf < spec.conf_thresh) continue;
        if (cls_idx >= spec.classes.size()) continue;
        BBox b{r.cx - 0.5f * r.w, r.cy - 0.5f * r.h, r.cx + 0.5f * r.w, r.cy + 0.5f * r.h};
        b.x0 = (b.x0 - lb.pad_x) / lb.scale;
        b.x1 = (b.x1 - lb.pad_x) / lb.scale;
        b.y0 = (b.y0 - lb.pad_y) / lb.scale;
        b.y1 = (b.y1 - lb.pad_y) / lb.scale;
        try {
            b = clip(b, orig_w, orig_h);
        } catch (const DegenerateBox&) {
            continue;
        }
        dets.push_back({b, class_from_name(spec.classes[cls_idx]), conf});
    }
    return nms(std::move(dets), spec.iou_thresh);
}

/// Line/word/char localization. ModelFile runs an ONNX detection head whose
/// output is N x (4 + 1 + C) rows; GroundTruth serves COCO annotations and is
/// the oracle for end-to-end tests. Immutable after construction.
class Detector {
public:
    static Detector make(const DetectorSpec& spec) {
        validate_detector_spec(spec);
        Detector d;
        d.spec_ = spec;
        if (spec.kind == DetectorKind::ModelFile) {
            d.model_ = std::make_shared<onnx::Model>(onnx::Model::load(spec.model_path));
        } else {
            d.coco_ = std::make_shared<CocoDocument>(parse_coco(spec.annotation_path));
        }
        return d;
    }

    /// GroundTruth detector over an already-parsed document (eval manifests
    /// merge several files into one).
    static Detector make_ground_truth(const DetectorSpec& spec, CocoDocument doc) {
        Detector d;
        d.spec_ = spec;
        d.spec_.kind = DetectorKind::GroundTruth;
        d.coco_ = std::make_shared<CocoDocument>(std::move(doc));
        return d;
    }

    const DetectorSpec& spec() const { return spec_; }

    /// Line boxes in page coordinates, confidence >= conf_thresh.
    std::vector<DetectedObject> detect_lines(const ImageCrop& page) const {
        if (spec_.kind == DetectorKind::GroundTruth)
            return ground_truth_boxes(page, ObjectClass::Line);
        std::vector<DetectedObject> dets = run_model(page);
        std::erase_if(dets, [](const DetectedObject& d) { return d.cls != ObjectClass::Line; });
        return dets;
    }

    /// Word and char boxes in line-local coordinates. With no_words the word
    /// list is empty.
    std::pair<std::vector<DetectedObject>, std::vector<DetectedObject>> localize(
        const ImageCrop& line, bool no_words) const {
        std::vector<DetectedObject> dets;
        if (spec_.kind == DetectorKind::GroundTruth) {
            dets = ground_truth_boxes(line, ObjectClass::Word);
            auto chars = ground_truth_boxes(line, ObjectClass::Char);
            dets.insert(dets.end(), chars.begin(), chars.end());
        } else {
            dets = run_model(line);
        }
        std::vector<DetectedObject> words, chars;
        for (auto& d : dets) {
            if (d.cls == ObjectClass::Word) {
                if (!no_words) words.push_back(d);
            } else if (d.cls == ObjectClass::Char) {
                chars.push_back(d);
            }
        }
        return {std::move(words), std::move(chars)};
    }

private:
    DetectorSpec spec_;
    std::shared_ptr<const onnx::Model> model_;
    std::shared_ptr<const CocoDocument> coco_;

    std::vector<DetectedObject> run_model(const ImageCrop& img) const {
        onnx::Tensor input;
        const ImageCrop boxed = letterbox_image(img, spec_.input_w, spec_.input_h);
        input.dims = {1, 1, boxed.height, boxed.width};
        input.floats = boxed.pixels;
        const onnx::Tensor out = model_->run(input);
        const size_t row = 5 + spec_.classes.size();
        if (out.numel() % row != 0)
            throw ShapeMismatch("detector: output size " + std::to_string(out.numel()) +
                                " is not a multiple of row width " + std::to_string(row));
        const size_t n = out.numel() / row;
        std::vector<RawDetection> raw(n);
        for (size_t i = 0; i < n; ++i) {
            const float* p = out.floats.data() + i * row;
            raw[i].cx = p[0];
            raw[i].cy = p[1];
            raw[i].w = p[2];
            raw[i].h = p[3];
            raw[i].objectness = p[4];
            raw[i].class_scores.assign(p + 5, p + row);
        }
        return decode(raw, spec_, img.width, img.height);
    }

    const CocoImage* find_image(const std::string& page_id) const {
        for (const auto& img : coco_->images) {
            if (img.file_name == page_id) return &img;
        }
        for (const auto& img : coco_->images) {
            const std::filesystem::path p(img.file_name);
            if (p.filename().string() == page_id || p.stem().string() == page_id) return &img;
        }
        return nullptr;
    }

    // Annotations pass through untouched (confidence 1.0). For line queries
    // the crop is the page; for word/char queries the crop is a line whose
    // provenance origin maps page coordinates to line-local ones.
    std::vector<DetectedObject> ground_truth_boxes(const ImageCrop& img, ObjectClass want) const {
        if (!img.provenance || img.provenance->page_id.empty())
            throw MissingAnnotation("ground-truth detector needs crop provenance with a page id");
        const std::string& page_id = img.provenance->page_id;
        const CocoImage* coco_img = find_image(page_id);
        if (!coco_img)
            throw MissingAnnotation("no annotations for image \"" + page_id + "\" in " +
                                    spec_.annotation_path);
        const float ox = static_cast<float>(img.provenance->origin_x);
        const float oy = static_cast<float>(img.provenance->origin_y);
        std::vector<DetectedObject> out;
        for (const auto& a : coco_->annotations) {
            if (a.image_id != coco_img->id) continue;
            const auto cls = coco_->category_class(a.category_id);
            if (!cls || *cls != want) continue;
            if (want != ObjectClass::Line) {
                // keep only annotations whose center falls inside this crop
                const float cx = a.bbox.center_x() - ox;
                const float cy = a.bbox.center_y() - oy;
                if (cx < 0.0f || cx >= img.width || cy < 0.0f || cy >= img.height) continue;
            }
            BBox b{a.bbox.x0 - ox, a.bbox.y0 - oy, a.bbox.x1 - ox, a.bbox.y1 - oy};
            try {
                b = clip(b, img.width, img.height);
            } catch (const DegenerateBox&) {
                continue;
            }
            out.push_back({b, want, 1.0f});
        }
        return out;
    }
};

} // namespace effocr
