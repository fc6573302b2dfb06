#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "effocr/coco.hpp"
#include "effocr/errors.hpp"
#include "effocr/fonts.hpp"
#include "effocr/image_io.hpp"
#include "effocr/pipeline.hpp"

namespace effocr {

struct ExportSelection {
    bool lines = true;
    bool words = true;
    bool chars = true;
    bool assembled_text = true;
};

inline void validate_selection(const ExportSelection& sel) {
    if (!sel.lines && !sel.words && !sel.chars && !sel.assembled_text)
        throw ConfigError("export: nothing selected");
}

struct ExportedFiles {
    std::vector<std::string> coco_paths;
    std::vector<std::string> text_paths;
};

namespace export_detail {

inline std::string sanitize_id(const std::string& id) {
    std::string out;
    out.reserve(id.size());
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '_';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? std::string("image") : out;
}

inline BBox to_page(const BBox& local, const TranscribedLine& line) {
    const float ox = static_cast<float>(line.origin_x);
    const float oy = static_cast<float>(line.origin_y);
    return BBox{local.x0 + ox, local.y0 + oy, local.x1 + ox, local.y1 + oy};
}

} // namespace export_detail

/// Writes one COCO file per selected level (text stored under a top-level
/// "text" key per annotation) and one UTF-8 .txt of assembled text per image.
/// Failed results are skipped. Category ids are fixed: line=1, word=2, char=3.
inline ExportedFiles export_results(const std::vector<JobResult>& results,
                                    const ExportSelection& sel, const std::string& out_dir) {
    validate_selection(sel);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    ExportedFiles out;

    std::vector<const JobResult*> ok;
    for (const auto& r : results)
        if (r.status == JobStatus::Ok) ok.push_back(&r);

    struct Level {
        bool selected;
        const char* file;
        int64_t category_id;
        const char* category_name;
    };
    const Level levels[] = {{sel.lines, "coco_lines.json", 1, "line"},
                            {sel.words, "coco_words.json", 2, "word"},
                            {sel.chars, "coco_chars.json", 3, "char"}};

    for (const Level& level : levels) {
        if (!level.selected) continue;
        CocoDocument doc;
        doc.categories = {{level.category_id, level.category_name}};
        int64_t next_ann = 1;
        for (size_t i = 0; i < ok.size(); ++i) {
            const JobResult& r = *ok[i];
            const int64_t image_id = static_cast<int64_t>(i) + 1;
            doc.images.push_back({image_id, r.image_id, r.image_width, r.image_height});
            for (const auto& line : r.transcription.lines) {
                auto add = [&](const BBox& b, const std::string& text) {
                    CocoAnnotation a;
                    a.id = next_ann++;
                    a.image_id = image_id;
                    a.category_id = level.category_id;
                    a.bbox = b;
                    a.text = text;
                    a.has_text = true;
                    doc.annotations.push_back(std::move(a));
                };
                if (level.category_id == 1) {
                    add(line.bbox, line.text);
                    continue;
                }
                for (const auto& token : line.tokens) {
                    const bool word_level = token.source == TokenSource::WordMatch ||
                                            token.source == TokenSource::CharFallback;
                    if (level.category_id == 2 && word_level) {
                        add(export_detail::to_page(token.bbox, line), token.text);
                    } else if (level.category_id == 3) {
                        if (token.source == TokenSource::CharOnly) {
                            add(export_detail::to_page(token.bbox, line), token.text);
                        } else if (token.source == TokenSource::CharFallback) {
                            for (const auto& piece : token.chars)
                                add(export_detail::to_page(piece.bbox, line), piece.text);
                        }
                    }
                }
            }
        }
        const std::string path = (fs::path(out_dir) / level.file).string();
        save_coco(doc, path);
        out.coco_paths.push_back(path);
    }

    if (sel.assembled_text) {
        for (const JobResult* r : ok) {
            const std::string path =
                (fs::path(out_dir) / (export_detail::sanitize_id(r->image_id) + ".txt")).string();
            std::ofstream txt(path, std::ios::trunc | std::ios::binary);
            if (!txt) throw IoError("cannot write " + path);
            txt << r->transcription.full_text << "\n";
            out.text_paths.push_back(path);
        }
    }
    return out;
}

namespace export_detail {

inline void draw_rect(RgbImage& img, const IntRect& r, uint8_t cr, uint8_t cg, uint8_t cb) {
    for (int x = r.x0; x < r.x1; ++x) {
        img.set(x, r.y0, cr, cg, cb);
        img.set(x, r.y1 - 1, cr, cg, cb);
    }
    for (int y = r.y0; y < r.y1; ++y) {
        img.set(r.x0, y, cr, cg, cb);
        img.set(r.x1 - 1, y, cr, cg, cb);
    }
}

inline void blend_text(RgbImage& img, const ImageCrop& text, int x, int y) {
    for (int sy = 0; sy < text.height; ++sy) {
        for (int sx = 0; sx < text.width; ++sx) {
            const float v = text.at(sx, sy);
            if (v < 0.999f) {
                const uint8_t g = static_cast<uint8_t>(std::clamp(v, 0.0f, 1.0f) * 255.0f + 0.5f);
                img.set(x + sx, y + sy, g, g, g);
            }
        }
    }
}

} // namespace export_detail

/// Side-by-side composite: original page with color-coded boxes on the left
/// (line red, word green, char blue), rendered text on the right, 2x the
/// input width. Deterministic pixels for fixed inputs.
inline void visualize(const ImageCrop& page, const PageTranscription& transcription,
                      const Font& font, const std::string& out_path) {
    using namespace export_detail;
    RgbImage out(page.width * 2, page.height);
    for (int y = 0; y < page.height; ++y) {
        for (int x = 0; x < page.width; ++x) {
            const uint8_t g =
                static_cast<uint8_t>(std::clamp(page.at(x, y), 0.0f, 1.0f) * 255.0f + 0.5f);
            out.set(x, y, g, g, g);
        }
    }
    for (const auto& line : transcription.lines) {
        draw_rect(out, raster(line.bbox), 220, 40, 40);
        for (const auto& token : line.tokens) {
            const BBox page_box = to_page(token.bbox, line);
            if (token.source != TokenSource::CharOnly)
                draw_rect(out, raster(page_box), 40, 160, 40);
            for (const auto& piece : token.chars)
                draw_rect(out, raster(to_page(piece.bbox, line)), 40, 80, 220);
            if (token.source == TokenSource::CharOnly && token.chars.empty())
                draw_rect(out, raster(page_box), 40, 80, 220);
        }
        if (!line.text.empty()) {
            const IntRect r = raster(line.bbox);
            const int h = std::clamp(r.height(), 8, 72);
            const ImageCrop text_img = font.render_text_line(line.text, h);
            blend_text(out, text_img, page.width + std::max(r.x0, 0), r.y0);
        }
    }
    save_image(out, out_path);
}

} // namespace effocr
