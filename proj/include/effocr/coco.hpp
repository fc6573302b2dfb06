#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "effocr/errors.hpp"
#include "effocr/geometry.hpp"

namespace effocr {

struct CocoImage {
    int64_t id = 0;
    std::string file_name;
    int width = 0;
    int height = 0;
};

struct CocoAnnotation {
    int64_t id = 0;
    int64_t image_id = 0;
    int64_t category_id = 0;
    BBox bbox; // converted from [x, y, w, h] at the boundary
    std::string text;
    bool has_text = false;
};

struct CocoCategory {
    int64_t id = 0;
    std::string name; // one of line/word/char
};

struct CocoDocument {
    std::vector<CocoImage> images;
    std::vector<CocoAnnotation> annotations;
    std::vector<CocoCategory> categories;

    std::optional<ObjectClass> category_class(int64_t category_id) const {
        for (const auto& c : categories) {
            if (c.id == category_id) {
                if (c.name == "line") return ObjectClass::Line;
                if (c.name == "word") return ObjectClass::Word;
                if (c.name == "char") return ObjectClass::Char;
            }
        }
        return std::nullopt;
    }
};

namespace coco_detail {

using nlohmann::json;

inline const json& require(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw SchemaError("coco: missing field at " + path + "." + key);
    return *it;
}

template <typename T>
inline T as(const json& v, const std::string& path) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw SchemaError("coco: wrong type at " + path);
    }
}

} // namespace coco_detail

/// Parses and validates a COCO JSON document. Category names are restricted
/// to line/word/char; referential integrity is enforced. Error messages
/// carry the JSON path of the offending element.
inline CocoDocument parse_coco_json(const nlohmann::json& root, const std::string& context) {
    using coco_detail::as;
    using coco_detail::require;
    if (!root.is_object()) throw SchemaError("coco: " + context + ": root is not an object");

    CocoDocument doc;
    const nlohmann::json& images = require(root, "images", context);
    const nlohmann::json& annotations = require(root, "annotations", context);
    const nlohmann::json& categories = require(root, "categories", context);
    if (!images.is_array() || !annotations.is_array() || !categories.is_array())
        throw SchemaError("coco: " + context + ": images/annotations/categories must be arrays");

    std::map<int64_t, bool> image_ids, category_ids, annotation_ids;

    for (size_t i = 0; i < categories.size(); ++i) {
        const std::string path = context + ".categories[" + std::to_string(i) + "]";
        const auto& c = categories[i];
        CocoCategory cat;
        cat.id = as<int64_t>(require(c, "id", path), path + ".id");
        cat.name = as<std::string>(require(c, "name", path), path + ".name");
        if (cat.name != "line" && cat.name != "word" && cat.name != "char")
            throw SchemaError("coco: bad category name \"" + cat.name + "\" at " + path +
                              ".name; allowed: line, word, char");
        if (category_ids.count(cat.id))
            throw SchemaError("coco: duplicate category id at " + path + ".id");
        category_ids[cat.id] = true;
        doc.categories.push_back(std::move(cat));
    }

    for (size_t i = 0; i < images.size(); ++i) {
        const std::string path = context + ".images[" + std::to_string(i) + "]";
        const auto& im = images[i];
        CocoImage img;
        img.id = as<int64_t>(require(im, "id", path), path + ".id");
        img.file_name = as<std::string>(require(im, "file_name", path), path + ".file_name");
        img.width = as<int>(require(im, "width", path), path + ".width");
        img.height = as<int>(require(im, "height", path), path + ".height");
        if (img.width <= 0 || img.height <= 0)
            throw SchemaError("coco: non-positive image size at " + path);
        if (image_ids.count(img.id))
            throw SchemaError("coco: duplicate image id at " + path + ".id");
        image_ids[img.id] = true;
        doc.images.push_back(std::move(img));
    }

    for (size_t i = 0; i < annotations.size(); ++i) {
        const std::string path = context + ".annotations[" + std::to_string(i) + "]";
        const auto& an = annotations[i];
        CocoAnnotation a;
        a.id = as<int64_t>(require(an, "id", path), path + ".id");
        a.image_id = as<int64_t>(require(an, "image_id", path), path + ".image_id");
        a.category_id = as<int64_t>(require(an, "category_id", path), path + ".category_id");
        if (!image_ids.count(a.image_id))
            throw SchemaError("coco: annotation references absent image_id " +
                              std::to_string(a.image_id) + " at " + path + ".image_id");
        if (!category_ids.count(a.category_id))
            throw SchemaError("coco: annotation references absent category_id " +
                              std::to_string(a.category_id) + " at " + path + ".category_id");
        const auto& bbox = require(an, "bbox", path);
        if (!bbox.is_array() || bbox.size() != 4)
            throw SchemaError("coco: bbox must be [x, y, w, h] at " + path + ".bbox");
        const float x = as<float>(bbox[0], path + ".bbox[0]");
        const float y = as<float>(bbox[1], path + ".bbox[1]");
        const float w = as<float>(bbox[2], path + ".bbox[2]");
        const float h = as<float>(bbox[3], path + ".bbox[3]");
        if (w <= 0.0f || h <= 0.0f)
            throw SchemaError("coco: non-positive bbox size at " + path + ".bbox");
        a.bbox = BBox{x, y, x + w, y + h};
        if (an.contains("text")) {
            a.text = as<std::string>(an["text"], path + ".text");
            a.has_text = true;
        }
        if (annotation_ids.count(a.id))
            throw SchemaError("coco: duplicate annotation id at " + path + ".id");
        annotation_ids[a.id] = true;
        doc.annotations.push_back(std::move(a));
    }
    return doc;
}

inline CocoDocument parse_coco(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open coco file: " + path);
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("coco: " + path + ": invalid JSON: " + e.what());
    }
    return parse_coco_json(root, path);
}

inline nlohmann::json coco_to_json(const CocoDocument& doc) {
    nlohmann::json root;
    root["images"] = nlohmann::json::array();
    root["annotations"] = nlohmann::json::array();
    root["categories"] = nlohmann::json::array();
    for (const auto& img : doc.images) {
        root["images"].push_back({{"id", img.id},
                                  {"file_name", img.file_name},
                                  {"width", img.width},
                                  {"height", img.height}});
    }
    for (const auto& a : doc.annotations) {
        nlohmann::json j = {{"id", a.id},
                            {"image_id", a.image_id},
                            {"category_id", a.category_id},
                            {"bbox", {a.bbox.x0, a.bbox.y0, a.bbox.width(), a.bbox.height()}},
                            {"area", a.bbox.area()},
                            {"iscrowd", 0}};
        if (a.has_text) j["text"] = a.text;
        root["annotations"].push_back(std::move(j));
    }
    for (const auto& c : doc.categories) {
        root["categories"].push_back({{"id", c.id}, {"name", c.name}});
    }
    return root;
}

inline void save_coco(const CocoDocument& doc, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open coco file for writing: " + path);
    out << coco_to_json(doc).dump(2) << "\n";
    if (!out) throw IoError("failed writing coco file: " + path);
}

/// Merges documents into one, reassigning ids; image file_names must be
/// unique across inputs.
inline CocoDocument merge_coco(const std::vector<CocoDocument>& docs) {
    CocoDocument out;
    out.categories = {{1, "line"}, {2, "word"}, {3, "char"}};
    std::map<std::string, int64_t> name_to_cat = {{"line", 1}, {"word", 2}, {"char", 3}};
    int64_t next_image = 1, next_ann = 1;
    std::map<std::string, bool> seen_names;
    for (const auto& doc : docs) {
        std::map<int64_t, int64_t> image_remap;
        std::map<int64_t, std::string> cat_names;
        for (const auto& c : doc.categories) cat_names[c.id] = c.name;
        for (const auto& img : doc.images) {
            if (seen_names.count(img.file_name))
                throw SchemaError("coco merge: duplicate image file_name \"" + img.file_name +
                                  "\"");
            seen_names[img.file_name] = true;
            CocoImage copy = img;
            copy.id = next_image++;
            image_remap[img.id] = copy.id;
            out.images.push_back(std::move(copy));
        }
        for (const auto& a : doc.annotations) {
            CocoAnnotation copy = a;
            copy.id = next_ann++;
            copy.image_id = image_remap.at(a.image_id);
            copy.category_id = name_to_cat.at(cat_names.at(a.category_id));
            out.annotations.push_back(std::move(copy));
        }
    }
    return out;
}

} // namespace effocr
