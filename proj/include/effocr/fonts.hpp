#pragma once

// TrueType glyph rendering without external font libraries: sfnt table
// parsing (cmap formats 4 and 12, glyf with composite glyphs), quadratic
// outline flattening, and an anti-aliased scanline fill. Enough to render
// black-on-white exemplar crops and text lines from .ttf files. CFF-based
// fonts ('OTTO') are rejected.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "effocr/errors.hpp"
#include "effocr/image.hpp"
#include "effocr/utf8.hpp"

namespace effocr {

namespace ttf_detail {

struct Reader {
    const std::vector<uint8_t>* buf;

    uint8_t u8(size_t off) const {
        if (off + 1 > buf->size()) throw FontLoadError("font file truncated");
        return (*buf)[off];
    }
    uint16_t u16(size_t off) const {
        if (off + 2 > buf->size()) throw FontLoadError("font file truncated");
        return static_cast<uint16_t>(((*buf)[off] << 8) | (*buf)[off + 1]);
    }
    int16_t i16(size_t off) const { return static_cast<int16_t>(u16(off)); }
    uint32_t u32(size_t off) const {
        if (off + 4 > buf->size()) throw FontLoadError("font file truncated");
        return (static_cast<uint32_t>((*buf)[off]) << 24) |
               (static_cast<uint32_t>((*buf)[off + 1]) << 16) |
               (static_cast<uint32_t>((*buf)[off + 2]) << 8) | (*buf)[off + 3];
    }
};

struct GlyphPoint {
    float x = 0.0f;
    float y = 0.0f;
    bool on_curve = true;
};

using Contour = std::vector<GlyphPoint>;

struct Segment {
    float x0, y0, x1, y1;
};

// Fixed subdivision keeps rendering deterministic; affine transforms commute
// with flattening at fixed parameter steps.
constexpr int kQuadSteps = 16;

inline void flatten_quad(const GlyphPoint& a, const GlyphPoint& c, const GlyphPoint& e,
                         std::vector<Segment>& out) {
    float px = a.x, py = a.y;
    for (int j = 1; j <= kQuadSteps; ++j) {
        const float t = static_cast<float>(j) / kQuadSteps;
        const float u = 1.0f - t;
        const float x = u * u * a.x + 2.0f * t * u * c.x + t * t * e.x;
        const float y = u * u * a.y + 2.0f * t * u * c.y + t * t * e.y;
        out.push_back({px, py, x, y});
        px = x;
        py = y;
    }
}

inline void contour_to_segments(const Contour& contour, std::vector<Segment>& out) {
    const size_t n = contour.size();
    if (n < 2) return;
    std::vector<GlyphPoint> p;
    p.reserve(n + 2);
    size_t start = n;
    for (size_t i = 0; i < n; ++i) {
        if (contour[i].on_curve) {
            start = i;
            break;
        }
    }
    if (start == n) {
        // All points off-curve: start at the implied midpoint of the last and
        // first control points.
        GlyphPoint mid{0.5f * (contour[n - 1].x + contour[0].x),
                       0.5f * (contour[n - 1].y + contour[0].y), true};
        p.push_back(mid);
        for (size_t i = 0; i < n; ++i) p.push_back(contour[i]);
    } else {
        for (size_t i = 0; i < n; ++i) p.push_back(contour[(start + i) % n]);
    }
    p.push_back(p[0]); // close

    GlyphPoint cur = p[0];
    size_t i = 1;
    while (i < p.size()) {
        if (p[i].on_curve) {
            out.push_back({cur.x, cur.y, p[i].x, p[i].y});
            cur = p[i];
            ++i;
        } else {
            const GlyphPoint ctrl = p[i];
            GlyphPoint end;
            if (i + 1 < p.size()) {
                if (p[i + 1].on_curve) {
                    end = p[i + 1];
                    i += 2;
                } else {
                    end = {0.5f * (ctrl.x + p[i + 1].x), 0.5f * (ctrl.y + p[i + 1].y), true};
                    i += 1;
                }
            } else {
                end = p[0];
                i += 1;
            }
            flatten_quad(cur, ctrl, end, out);
            cur = end;
        }
    }
}

// Ink values snap to the 8-bit grid so renders survive PNG round trips
// bit-exactly; retrieval against crops cut from saved pages depends on it.
inline float quantize(float coverage) {
    const float v = std::clamp(1.0f - coverage, 0.0f, 1.0f);
    return std::round(v * 255.0f) / 255.0f;
}

// Non-zero winding scanline fill, 4 subrows per pixel row with exact
// horizontal span coverage.
inline std::vector<float> rasterize_coverage(const std::vector<Segment>& segs, int w, int h) {
    std::vector<float> cov(static_cast<size_t>(w) * h, 0.0f);
    constexpr int kSubrows = 4;
    constexpr float kSubWeight = 1.0f / kSubrows;
    std::vector<std::pair<float, int>> crossings;
    for (int y = 0; y < h; ++y) {
        for (int s = 0; s < kSubrows; ++s) {
            const float ys = y + (s + 0.5f) / kSubrows;
            crossings.clear();
            for (const auto& e : segs) {
                if (e.y0 == e.y1) continue;
                int dir;
                if (e.y0 < e.y1) {
                    if (ys < e.y0 || ys >= e.y1) continue;
                    dir = 1;
                } else {
                    if (ys < e.y1 || ys >= e.y0) continue;
                    dir = -1;
                }
                const float x = e.x0 + (ys - e.y0) * (e.x1 - e.x0) / (e.y1 - e.y0);
                crossings.emplace_back(x, dir);
            }
            std::sort(crossings.begin(), crossings.end());
            int wind = 0;
            float span_start = 0.0f;
            for (const auto& [x, dir] : crossings) {
                if (wind != 0) {
                    const float a = std::max(span_start, 0.0f);
                    const float b = std::min(x, static_cast<float>(w));
                    if (b > a) {
                        int px0 = static_cast<int>(std::floor(a));
                        int px1 = static_cast<int>(std::ceil(b));
                        for (int px = px0; px < px1 && px < w; ++px) {
                            const float overlap =
                                std::min(b, static_cast<float>(px + 1)) -
                                std::max(a, static_cast<float>(px));
                            if (overlap > 0.0f)
                                cov[static_cast<size_t>(y) * w + px] += overlap * kSubWeight;
                        }
                    }
                }
                const int prev = wind;
                wind += dir;
                if (prev == 0 && wind != 0) span_start = x;
            }
        }
    }
    for (float& c : cov) c = std::clamp(c, 0.0f, 1.0f);
    return cov;
}

} // namespace ttf_detail

/// A loaded TrueType font. Immutable after load; all render calls are pure
/// and safe to run concurrently.
class Font {
public:
    static Font load(const std::string& path) {
        Font f;
        f.path_ = path;
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FontLoadError("cannot open font file: " + path);
        f.data_ = std::vector<uint8_t>((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
        if (f.data_.size() < 12) throw FontLoadError("font file too small: " + path);
        f.parse();
        return f;
    }

    const std::string& path() const { return path_; }
    int units_per_em() const { return units_per_em_; }
    int ascender() const { return ascender_; }
    int descender() const { return descender_; }

    bool has_glyph(char32_t cp) const { return glyph_index(cp) != 0; }

    /// Black text on a white square canvas, ink scaled to fit with a 10%
    /// margin and centered. Throws MissingGlyph for uncovered codepoints.
    ImageCrop render_exemplar(const std::string& text, int canvas) const {
        if (canvas < 16) throw ConfigError("render_exemplar: canvas must be >= 16");
        const std::vector<char32_t> cps = utf8_decode(text);
        std::vector<ttf_detail::Segment> segs;
        float pen = 0.0f;
        for (char32_t cp : cps) {
            const uint16_t gid = glyph_index(cp);
            if (gid == 0)
                throw MissingGlyph("font " + path_ + " lacks glyph for U+" + hex_cp(cp) +
                                       " in \"" + text + "\"",
                                   cp);
            append_glyph_segments(gid, pen, 0.0f, segs);
            pen += static_cast<float>(advance(gid));
        }
        ImageCrop out(canvas, canvas, 1.0f);
        if (segs.empty()) return out;

        float bx0 = segs[0].x0, by0 = segs[0].y0, bx1 = segs[0].x0, by1 = segs[0].y0;
        for (const auto& s : segs) {
            bx0 = std::min({bx0, s.x0, s.x1});
            bx1 = std::max({bx1, s.x0, s.x1});
            by0 = std::min({by0, s.y0, s.y1});
            by1 = std::max({by1, s.y0, s.y1});
        }
        const float bw = bx1 - bx0, bh = by1 - by0;
        if (bw <= 0.0f && bh <= 0.0f) return out;
        const float inner = 0.8f * canvas;
        const float scale = inner / std::max(std::max(bw, bh), 1.0f);
        const float cx = 0.5f * (bx0 + bx1), cy = 0.5f * (by0 + by1);
        const float half = 0.5f * canvas;
        for (auto& s : segs) {
            s.x0 = (s.x0 - cx) * scale + half;
            s.x1 = (s.x1 - cx) * scale + half;
            s.y0 = half - (s.y0 - cy) * scale;
            s.y1 = half - (s.y1 - cy) * scale;
        }
        const std::vector<float> cov = ttf_detail::rasterize_coverage(segs, canvas, canvas);
        for (size_t i = 0; i < cov.size(); ++i) out.pixels[i] = ttf_detail::quantize(cov[i]);
        return out;
    }

    /// A full line of text at the given pixel height. Codepoints without a
    /// glyph render as the font's .notdef glyph instead of throwing.
    ImageCrop render_text_line(const std::string& text, int line_height) const {
        line_height = std::max(line_height, 4);
        const std::vector<char32_t> cps = utf8_decode(text);
        const float em_span = static_cast<float>(std::max(ascender_ - descender_, 1));
        const float scale = 0.8f * line_height / em_span;
        const float margin = 0.1f * line_height;
        const float baseline = margin + ascender_ * scale;

        std::vector<ttf_detail::Segment> segs;
        float pen = 0.0f;
        for (char32_t cp : cps) {
            const uint16_t gid = glyph_index(cp);
            append_glyph_segments(gid, pen, 0.0f, segs);
            pen += static_cast<float>(advance(gid));
        }
        const int width = std::max(
            static_cast<int>(std::ceil(pen * scale + 2.0f * margin)), 1);
        for (auto& s : segs) {
            s.x0 = margin + s.x0 * scale;
            s.x1 = margin + s.x1 * scale;
            s.y0 = baseline - s.y0 * scale;
            s.y1 = baseline - s.y1 * scale;
        }
        ImageCrop out(width, line_height, 1.0f);
        const std::vector<float> cov = ttf_detail::rasterize_coverage(segs, width, line_height);
        for (size_t i = 0; i < cov.size(); ++i) out.pixels[i] = ttf_detail::quantize(cov[i]);
        return out;
    }

private:
    std::string path_;
    std::vector<uint8_t> data_;
    size_t glyf_off_ = 0;
    size_t hmtx_off_ = 0;
    size_t cmap_sub_off_ = 0;
    int cmap_format_ = 0;
    std::vector<uint32_t> loca_;
    int units_per_em_ = 1000;
    int ascender_ = 800;
    int descender_ = -200;
    uint16_t num_glyphs_ = 0;
    uint16_t num_hmetrics_ = 0;

    static std::string hex_cp(char32_t cp) {
        static const char* digits = "0123456789ABCDEF";
        std::string s;
        for (int i = 5; i >= 0; --i) s.push_back(digits[(cp >> (i * 4)) & 0xF]);
        size_t strip = 0;
        while (strip + 4 < s.size() && s[strip] == '0') ++strip;
        return s.substr(strip);
    }

    void parse() {
        ttf_detail::Reader r{&data_};
        const uint32_t tag = r.u32(0);
        if (tag == 0x4F54544F) // 'OTTO'
            throw FontLoadError("CFF-outline font not supported: " + path_);
        if (tag != 0x00010000 && tag != 0x74727565) // 'true'
            throw FontLoadError("not a TrueType font: " + path_);
        const uint16_t num_tables = r.u16(4);
        std::map<uint32_t, std::pair<size_t, size_t>> tables;
        for (uint16_t i = 0; i < num_tables; ++i) {
            const size_t rec = 12 + static_cast<size_t>(i) * 16;
            tables[r.u32(rec)] = {r.u32(rec + 8), r.u32(rec + 12)};
        }
        auto require = [&](uint32_t t, const char* name) {
            auto it = tables.find(t);
            if (it == tables.end())
                throw FontLoadError("font missing required table " + std::string(name) + ": " +
                                    path_);
            return it->second.first;
        };
        const size_t head = require(0x68656164, "head");
        const size_t maxp = require(0x6D617870, "maxp");
        const size_t hhea = require(0x68686561, "hhea");
        const size_t loca = require(0x6C6F6361, "loca");
        const size_t cmap = require(0x636D6170, "cmap");
        glyf_off_ = require(0x676C7966, "glyf");
        hmtx_off_ = require(0x686D7478, "hmtx");

        units_per_em_ = r.u16(head + 18);
        const int16_t loca_format = r.i16(head + 50);
        num_glyphs_ = r.u16(maxp + 4);
        ascender_ = r.i16(hhea + 4);
        descender_ = r.i16(hhea + 6);
        num_hmetrics_ = r.u16(hhea + 34);
        if (num_glyphs_ == 0 || num_hmetrics_ == 0)
            throw FontLoadError("font has no glyphs: " + path_);

        loca_.resize(static_cast<size_t>(num_glyphs_) + 1);
        for (size_t i = 0; i <= num_glyphs_; ++i) {
            loca_[i] = loca_format == 0 ? static_cast<uint32_t>(r.u16(loca + i * 2)) * 2
                                        : r.u32(loca + i * 4);
        }
        parse_cmap(cmap);
    }

    void parse_cmap(size_t cmap) {
        ttf_detail::Reader r{&data_};
        const uint16_t n = r.u16(cmap + 2);
        size_t best4 = 0, best12 = 0;
        for (uint16_t i = 0; i < n; ++i) {
            const size_t rec = cmap + 4 + static_cast<size_t>(i) * 8;
            const size_t sub = cmap + r.u32(rec + 4);
            const uint16_t format = r.u16(sub);
            if (format == 12 && best12 == 0) best12 = sub;
            if (format == 4 && best4 == 0) best4 = sub;
        }
        if (best12) {
            cmap_sub_off_ = best12;
            cmap_format_ = 12;
        } else if (best4) {
            cmap_sub_off_ = best4;
            cmap_format_ = 4;
        } else {
            throw FontLoadError("font has no usable cmap subtable (format 4 or 12): " + path_);
        }
    }

    uint16_t glyph_index(char32_t cp) const {
        ttf_detail::Reader r{&data_};
        if (cmap_format_ == 12) {
            const uint32_t n_groups = r.u32(cmap_sub_off_ + 12);
            size_t lo = 0, hi = n_groups;
            while (lo < hi) {
                const size_t mid = (lo + hi) / 2;
                const size_t g = cmap_sub_off_ + 16 + mid * 12;
                const uint32_t start = r.u32(g), end = r.u32(g + 4);
                if (cp < start) {
                    hi = mid;
                } else if (cp > end) {
                    lo = mid + 1;
                } else {
                    const uint32_t gid = r.u32(g + 8) + (cp - start);
                    return gid < num_glyphs_ ? static_cast<uint16_t>(gid) : 0;
                }
            }
            return 0;
        }
        if (cp > 0xFFFF) return 0;
        const size_t sub = cmap_sub_off_;
        const uint16_t seg_count = r.u16(sub + 6) / 2;
        const size_t end_codes = sub + 14;
        const size_t start_codes = end_codes + seg_count * 2 + 2;
        const size_t id_deltas = start_codes + seg_count * 2;
        const size_t id_range_offsets = id_deltas + seg_count * 2;
        size_t lo = 0, hi = seg_count;
        while (lo < hi) {
            const size_t mid = (lo + hi) / 2;
            if (r.u16(end_codes + mid * 2) < cp)
                lo = mid + 1;
            else
                hi = mid;
        }
        if (lo >= seg_count) return 0;
        const uint16_t start = r.u16(start_codes + lo * 2);
        if (cp < start) return 0;
        const int16_t delta = r.i16(id_deltas + lo * 2);
        const uint16_t range_off = r.u16(id_range_offsets + lo * 2);
        uint16_t gid;
        if (range_off == 0) {
            gid = static_cast<uint16_t>((cp + delta) & 0xFFFF);
        } else {
            const size_t addr = id_range_offsets + lo * 2 + range_off + 2 * (cp - start);
            const uint16_t g = r.u16(addr);
            gid = g == 0 ? 0 : static_cast<uint16_t>((g + delta) & 0xFFFF);
        }
        return gid < num_glyphs_ ? gid : 0;
    }

    int advance(uint16_t gid) const {
        ttf_detail::Reader r{&data_};
        const uint16_t idx = gid < num_hmetrics_ ? gid : static_cast<uint16_t>(num_hmetrics_ - 1);
        return r.u16(hmtx_off_ + static_cast<size_t>(idx) * 4);
    }

    struct Affine {
        float a = 1.0f, b = 0.0f, c = 0.0f, d = 1.0f, dx = 0.0f, dy = 0.0f;
        ttf_detail::GlyphPoint apply(const ttf_detail::GlyphPoint& p) const {
            return {a * p.x + c * p.y + dx, b * p.x + d * p.y + dy, p.on_curve};
        }
    };

    void glyph_contours(uint16_t gid, const Affine& xf, int depth,
                        std::vector<ttf_detail::Contour>& out) const {
        if (gid >= num_glyphs_ || depth > 6) return;
        const uint32_t start = loca_[gid], end = loca_[gid + 1];
        if (end <= start) return; // empty glyph (e.g. space)
        ttf_detail::Reader r{&data_};
        size_t off = glyf_off_ + start;
        const int16_t n_contours = r.i16(off);
        off += 10; // skip bbox
        if (n_contours >= 0) {
            std::vector<uint16_t> end_pts(n_contours);
            for (int i = 0; i < n_contours; ++i) end_pts[i] = r.u16(off + i * 2);
            off += static_cast<size_t>(n_contours) * 2;
            const uint16_t instr_len = r.u16(off);
            off += 2 + instr_len;
            const size_t n_points = n_contours > 0 ? end_pts.back() + 1 : 0;

            std::vector<uint8_t> flags;
            flags.reserve(n_points);
            while (flags.size() < n_points) {
                const uint8_t f = r.u8(off++);
                flags.push_back(f);
                if (f & 0x08) {
                    const uint8_t repeat = r.u8(off++);
                    for (uint8_t k = 0; k < repeat && flags.size() < n_points; ++k)
                        flags.push_back(f);
                }
            }
            std::vector<float> xs(n_points), ys(n_points);
            int v = 0;
            for (size_t i = 0; i < n_points; ++i) {
                const uint8_t f = flags[i];
                if (f & 0x02) {
                    const uint8_t d8 = r.u8(off++);
                    v += (f & 0x10) ? d8 : -static_cast<int>(d8);
                } else if (!(f & 0x10)) {
                    v += r.i16(off);
                    off += 2;
                }
                xs[i] = static_cast<float>(v);
            }
            v = 0;
            for (size_t i = 0; i < n_points; ++i) {
                const uint8_t f = flags[i];
                if (f & 0x04) {
                    const uint8_t d8 = r.u8(off++);
                    v += (f & 0x20) ? d8 : -static_cast<int>(d8);
                } else if (!(f & 0x20)) {
                    v += r.i16(off);
                    off += 2;
                }
                ys[i] = static_cast<float>(v);
            }
            size_t p0 = 0;
            for (int ci = 0; ci < n_contours; ++ci) {
                ttf_detail::Contour contour;
                for (size_t p = p0; p <= end_pts[ci]; ++p)
                    contour.push_back(xf.apply({xs[p], ys[p], (flags[p] & 0x01) != 0}));
                out.push_back(std::move(contour));
                p0 = end_pts[ci] + 1;
            }
        } else {
            // Composite glyph: recurse into components with their transforms.
            while (true) {
                const uint16_t flags = r.u16(off);
                const uint16_t comp_gid = r.u16(off + 2);
                off += 4;
                float arg1, arg2;
                if (flags & 0x0001) {
                    arg1 = static_cast<float>(r.i16(off));
                    arg2 = static_cast<float>(r.i16(off + 2));
                    off += 4;
                } else {
                    arg1 = static_cast<float>(static_cast<int8_t>(r.u8(off)));
                    arg2 = static_cast<float>(static_cast<int8_t>(r.u8(off + 1)));
                    off += 2;
                }
                if (!(flags & 0x0002))
                    throw FontLoadError("composite glyph with point-matching args: " + path_);
                Affine comp;
                auto f2dot14 = [&](size_t o) { return r.i16(o) / 16384.0f; };
                if (flags & 0x0008) {
                    comp.a = comp.d = f2dot14(off);
                    off += 2;
                } else if (flags & 0x0040) {
                    comp.a = f2dot14(off);
                    comp.d = f2dot14(off + 2);
                    off += 4;
                } else if (flags & 0x0080) {
                    comp.a = f2dot14(off);
                    comp.b = f2dot14(off + 2);
                    comp.c = f2dot14(off + 4);
                    comp.d = f2dot14(off + 6);
                    off += 8;
                }
                comp.dx = arg1;
                comp.dy = arg2;
                // Compose: first the component transform, then the parent's.
                Affine total;
                total.a = xf.a * comp.a + xf.c * comp.b;
                total.b = xf.b * comp.a + xf.d * comp.b;
                total.c = xf.a * comp.c + xf.c * comp.d;
                total.d = xf.b * comp.c + xf.d * comp.d;
                total.dx = xf.a * comp.dx + xf.c * comp.dy + xf.dx;
                total.dy = xf.b * comp.dx + xf.d * comp.dy + xf.dy;
                glyph_contours(comp_gid, total, depth + 1, out);
                if (!(flags & 0x0020)) break;
            }
        }
    }

    void append_glyph_segments(uint16_t gid, float pen_x, float pen_y,
                               std::vector<ttf_detail::Segment>& out) const {
        Affine xf;
        xf.dx = pen_x;
        xf.dy = pen_y;
        std::vector<ttf_detail::Contour> contours;
        glyph_contours(gid, xf, 0, contours);
        for (const auto& c : contours) ttf_detail::contour_to_segments(c, out);
    }
};

/// Process-wide font cache so repeated renders do not re-read files.
inline std::shared_ptr<const Font> load_font_cached(const std::string& path) {
    static std::mutex mu;
    static std::map<std::string, std::shared_ptr<const Font>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(path);
    if (it != cache.end()) return it->second;
    auto font = std::make_shared<const Font>(Font::load(path));
    cache[path] = font;
    return font;
}

/// Convenience wrapper over Font::render_exemplar using the cache.
inline ImageCrop render_exemplar(const std::string& font_path, const std::string& text,
                                 int canvas) {
    return load_font_cached(font_path)->render_exemplar(text, canvas);
}

} // namespace effocr
