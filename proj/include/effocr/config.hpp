#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "effocr/detection.hpp"
#include "effocr/encoder.hpp"
#include "effocr/errors.hpp"
#include "effocr/geometry.hpp"

namespace effocr {

/// Index paths and retrieval knobs as they appear in the config file; the
/// engine loads the actual indexes at construction.
struct RecognitionSettings {
    float word_fallback_threshold = 0.82f;
    std::string word_index_path;
    std::string char_index_path;
    bool insert_spaces = true;
    int k = 1;
    float unreadable_threshold = 0.05f;
};

struct PipelineConfig {
    DetectorSpec line_detector;
    DetectorSpec localizer;
    EncoderSpec word_encoder;
    EncoderSpec char_encoder;
    RecognitionSettings recognition;
    Orientation orientation = Orientation::Horizontal;
    bool no_words = false;
    int workers = 1;
    int queue_capacity = 8;
};

/// Paths that do not resolve as given fall back to $EFFOCR_MODEL_DIR/<path>.
inline std::string resolve_model_path(const std::string& path) {
    if (path.empty()) return path;
    namespace fs = std::filesystem;
    if (fs::exists(path)) return path;
    if (const char* dir = std::getenv("EFFOCR_MODEL_DIR")) {
        const fs::path candidate = fs::path(dir) / path;
        if (fs::exists(candidate)) return candidate.string();
    }
    return path;
}

inline void validate_pipeline_config(const PipelineConfig& cfg) {
    if (cfg.workers < 1) throw ConfigError("pipeline: workers must be >= 1");
    if (cfg.queue_capacity < 1) throw ConfigError("pipeline: queue_capacity must be >= 1");
    if (cfg.orientation == Orientation::Vertical && !cfg.no_words)
        throw ConfigError("pipeline: vertical orientation requires no_words");
    if (cfg.recognition.char_index_path.empty())
        throw ConfigError("pipeline: recognition.char_index is required");
    if (!cfg.no_words && cfg.recognition.word_index_path.empty())
        throw ConfigError("pipeline: recognition.word_index is required unless no_words is set");
    if (cfg.no_words && !cfg.recognition.word_index_path.empty())
        throw ConfigError("pipeline: recognition.word_index must be absent with no_words");
    if (cfg.recognition.word_fallback_threshold < -1.0f)
        throw ConfigError("pipeline: word_fallback_threshold must be >= -1");
    if (cfg.recognition.k < 1) throw ConfigError("pipeline: recognition.k must be >= 1");
    validate_detector_spec(cfg.line_detector);
    validate_detector_spec(cfg.localizer);
    validate_encoder_spec(cfg.char_encoder);
    if (!cfg.recognition.word_index_path.empty()) validate_encoder_spec(cfg.word_encoder);
}

namespace config_detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key \"" + path + "." + it.key() + "\"");
    }
}

template <typename T>
inline T get(const json& obj, const std::string& key, const T& def, const std::string& path) {
    if (!obj.contains(key)) return def;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: wrong type at " + path + "." + key);
    }
}

template <typename T>
inline T get_required(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) throw ConfigError("config: missing key \"" + path + "." + key + "\"");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: wrong type at " + path + "." + key);
    }
}

inline std::pair<int, int> get_input_size(const json& obj, const std::string& path, int def_h,
                                          int def_w) {
    if (!obj.contains("input_size")) return {def_h, def_w};
    const json& v = obj.at("input_size");
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
        throw ConfigError("config: " + path + ".input_size must be [H, W]");
    return {v[0].get<int>(), v[1].get<int>()};
}

inline DetectorSpec parse_detector(const json& obj, const std::string& path) {
    if (!obj.is_object()) throw ConfigError("config: " + path + " must be an object");
    reject_unknown_keys(obj,
                        {"kind", "model_path", "annotation_path", "conf_thresh", "iou_thresh",
                         "input_size", "classes", "conf_mode"},
                        path);
    DetectorSpec spec;
    const std::string kind = get_required<std::string>(obj, "kind", path);
    if (kind == "model_file")
        spec.kind = DetectorKind::ModelFile;
    else if (kind == "ground_truth")
        spec.kind = DetectorKind::GroundTruth;
    else
        throw ConfigError("config: " + path + ".kind must be model_file or ground_truth");
    spec.model_path = resolve_model_path(get<std::string>(obj, "model_path", "", path));
    spec.annotation_path = resolve_model_path(get<std::string>(obj, "annotation_path", "", path));
    spec.conf_thresh = get<float>(obj, "conf_thresh", spec.conf_thresh, path);
    spec.iou_thresh = get<float>(obj, "iou_thresh", spec.iou_thresh, path);
    std::tie(spec.input_h, spec.input_w) = get_input_size(obj, path, spec.input_h, spec.input_w);
    spec.classes = get<std::vector<std::string>>(obj, "classes", {}, path);
    const std::string mode = get<std::string>(obj, "conf_mode", "product", path);
    if (mode == "product")
        spec.conf_mode = ConfMode::Product;
    else if (mode == "class_only")
        spec.conf_mode = ConfMode::ClassOnly;
    else
        throw ConfigError("config: " + path + ".conf_mode must be product or class_only");
    return spec;
}

inline EncoderSpec parse_encoder(const json& obj, const std::string& path) {
    if (!obj.is_object()) throw ConfigError("config: " + path + " must be an object");
    reject_unknown_keys(obj, {"kind", "input_size", "mean", "std", "model_path", "dim"}, path);
    EncoderSpec spec;
    const std::string kind = get<std::string>(obj, "kind", "stub", path);
    if (kind == "stub") {
        spec.kind = EncoderKind::Stub;
    } else if (kind == "model_file") {
        spec.kind = EncoderKind::ModelFile;
        spec.input_h = spec.input_w = 32;
        spec.dim = 0; // must be given explicitly
    } else {
        throw ConfigError("config: " + path + ".kind must be stub or model_file");
    }
    std::tie(spec.input_h, spec.input_w) = get_input_size(obj, path, spec.input_h, spec.input_w);
    spec.mean = get<float>(obj, "mean", spec.mean, path);
    spec.std_dev = get<float>(obj, "std", spec.std_dev, path);
    spec.model_path = resolve_model_path(get<std::string>(obj, "model_path", "", path));
    if (spec.kind == EncoderKind::ModelFile)
        spec.dim = get_required<int>(obj, "dim", path);
    else
        spec.dim = get<int>(obj, "dim", spec.dim, path);
    return spec;
}

inline RecognitionSettings parse_recognition(const json& obj, const std::string& path) {
    if (!obj.is_object()) throw ConfigError("config: " + path + " must be an object");
    reject_unknown_keys(obj,
                        {"word_fallback_threshold", "word_index", "char_index", "insert_spaces",
                         "k", "unreadable_threshold"},
                        path);
    RecognitionSettings r;
    r.word_fallback_threshold = get<float>(obj, "word_fallback_threshold",
                                           r.word_fallback_threshold, path);
    if (obj.contains("word_index") && !obj.at("word_index").is_null())
        r.word_index_path = resolve_model_path(get<std::string>(obj, "word_index", "", path));
    r.char_index_path =
        resolve_model_path(get_required<std::string>(obj, "char_index", path));
    r.insert_spaces = get<bool>(obj, "insert_spaces", r.insert_spaces, path);
    r.k = get<int>(obj, "k", r.k, path);
    r.unreadable_threshold = get<float>(obj, "unreadable_threshold", r.unreadable_threshold, path);
    return r;
}

} // namespace config_detail

/// Parses a pipeline config from JSON. Unknown keys are rejected at every
/// level; the result is validated.
inline PipelineConfig parse_pipeline_config(const nlohmann::json& root,
                                            const std::string& context = "config") {
    using namespace config_detail;
    if (!root.is_object()) throw ConfigError("config: " + context + ": root must be an object");
    reject_unknown_keys(root,
                        {"line_detector", "localizer", "word_encoder", "char_encoder",
                         "recognition", "orientation", "no_words", "workers", "queue_capacity"},
                        context);
    PipelineConfig cfg;
    if (!root.contains("line_detector"))
        throw ConfigError("config: missing key \"" + context + ".line_detector\"");
    cfg.line_detector = parse_detector(root.at("line_detector"), context + ".line_detector");
    if (!root.contains("localizer"))
        throw ConfigError("config: missing key \"" + context + ".localizer\"");
    cfg.localizer = parse_detector(root.at("localizer"), context + ".localizer");
    if (root.contains("word_encoder"))
        cfg.word_encoder = parse_encoder(root.at("word_encoder"), context + ".word_encoder");
    if (root.contains("char_encoder"))
        cfg.char_encoder = parse_encoder(root.at("char_encoder"), context + ".char_encoder");
    if (!root.contains("recognition"))
        throw ConfigError("config: missing key \"" + context + ".recognition\"");
    cfg.recognition = parse_recognition(root.at("recognition"), context + ".recognition");
    const std::string orientation =
        get<std::string>(root, "orientation", "horizontal", context);
    if (orientation == "horizontal")
        cfg.orientation = Orientation::Horizontal;
    else if (orientation == "vertical")
        cfg.orientation = Orientation::Vertical;
    else
        throw ConfigError("config: " + context + ".orientation must be horizontal or vertical");
    cfg.no_words = get<bool>(root, "no_words", cfg.no_words, context);
    cfg.workers = get<int>(root, "workers", cfg.workers, context);
    cfg.queue_capacity = get<int>(root, "queue_capacity", cfg.queue_capacity, context);
    validate_pipeline_config(cfg);
    return cfg;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open file: " + path);
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: " + path + ": invalid JSON: " + e.what());
    }
    return parse_pipeline_config(root, path);
}

} // namespace effocr
