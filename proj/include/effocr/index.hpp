#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <zlib.h>

#include "effocr/encoder.hpp"
#include "effocr/errors.hpp"
#include "effocr/fonts.hpp"

namespace effocr {

/// A labeled embedding of a font-rendered glyph or word.
struct Exemplar {
    std::string label;
    std::string font_id;
    Embedding embedding;
};

struct QueryHit {
    std::string label;
    std::string font_id;
    float similarity = 0.0f;
};

constexpr uint32_t kIndexFormatVersion = 1;

/// Cosine-metric retrieval over exemplar embeddings. Exact search: the index
/// is small enough that a linear scan is the contract, and any accelerated
/// variant must match it. Immutable after construction; concurrent queries
/// need no synchronization.
class ExemplarIndex {
public:
    ExemplarIndex(int dim, std::string encoder_fingerprint, std::vector<Exemplar> entries)
        : dim_(dim),
          encoder_fingerprint_(std::move(encoder_fingerprint)),
          entries_(std::move(entries)) {
        if (dim_ <= 0) throw ConfigError("index: dim must be > 0");
        if (entries_.empty()) throw EmptyIndex("index: no entries");
        for (const auto& e : entries_) {
            if (e.label.empty()) throw ConfigError("index: empty label");
            if (e.embedding.dim() != dim_)
                throw DimensionMismatch("index: entry dim " + std::to_string(e.embedding.dim()) +
                                        " != index dim " + std::to_string(dim_));
        }
    }

    int dim() const { return dim_; }
    size_t size() const { return entries_.size(); }
    const std::vector<Exemplar>& entries() const { return entries_; }
    const std::string& encoder_fingerprint() const { return encoder_fingerprint_; }

    /// Exact top-k by cosine similarity, ties broken by label codepoint
    /// order then font_id.
    std::vector<QueryHit> query(const Embedding& q, int k) const {
        if (q.dim() != dim_)
            throw DimensionMismatch("query: embedding dim " + std::to_string(q.dim()) +
                                    " != index dim " + std::to_string(dim_));
        if (k < 1) throw ConfigError("query: k must be >= 1");
        k = std::min<int>(k, static_cast<int>(entries_.size()));
        std::vector<std::pair<float, size_t>> scored(entries_.size());
        for (size_t i = 0; i < entries_.size(); ++i)
            scored[i] = {std::clamp(dot(q, entries_[i].embedding), -1.0f, 1.0f), i};
        auto better = [this](const std::pair<float, size_t>& a, const std::pair<float, size_t>& b) {
            if (a.first != b.first) return a.first > b.first;
            const Exemplar& ea = entries_[a.second];
            const Exemplar& eb = entries_[b.second];
            if (ea.label != eb.label) return ea.label < eb.label; // UTF-8 order == codepoint order
            return ea.font_id < eb.font_id;
        };
        std::partial_sort(scored.begin(), scored.begin() + k, scored.end(), better);
        std::vector<QueryHit> hits;
        hits.reserve(k);
        for (int i = 0; i < k; ++i) {
            const Exemplar& e = entries_[scored[i].second];
            hits.push_back({e.label, e.font_id, scored[i].first});
        }
        return hits;
    }

    void verify_fingerprint(const std::string& encoder_fp) const {
        if (encoder_fp != encoder_fingerprint_)
            throw FingerprintMismatch("index was built with encoder fingerprint " +
                                      encoder_fingerprint_ + ", queried with " + encoder_fp);
    }

    // --- serialization ----------------------------------------------------
    // Little-endian: magic "EFXI", version u32, dim u32, count u64,
    // fingerprint (u32 len + UTF-8), per entry label/font_id (u32 len +
    // UTF-8) and dim float32 values, then CRC32 of all preceding bytes.

    void save(const std::string& path) const {
        std::string bytes = serialize();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open index file for writing: " + path);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("failed writing index file: " + path);
    }

    std::string serialize() const {
        std::string b;
        b.reserve(64 + entries_.size() * (16 + static_cast<size_t>(dim_) * 4));
        b.append("EFXI", 4);
        put_u32(b, kIndexFormatVersion);
        put_u32(b, static_cast<uint32_t>(dim_));
        put_u64(b, entries_.size());
        put_str(b, encoder_fingerprint_);
        for (const auto& e : entries_) {
            put_str(b, e.label);
            put_str(b, e.font_id);
            const size_t off = b.size();
            b.resize(off + static_cast<size_t>(dim_) * 4);
            std::memcpy(b.data() + off, e.embedding.values.data(),
                        static_cast<size_t>(dim_) * 4);
        }
        const uint32_t crc = static_cast<uint32_t>(
            crc32(0L, reinterpret_cast<const Bytef*>(b.data()), static_cast<uInt>(b.size())));
        put_u32(b, crc);
        return b;
    }

    static ExemplarIndex load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open index file: " + path);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return deserialize(bytes, path);
    }

    static ExemplarIndex deserialize(const std::string& b, const std::string& context = "") {
        const std::string where = context.empty() ? "index" : context;
        size_t off = 0;
        auto need = [&](size_t n) {
            if (off + n > b.size()) throw CorruptIndex(where + ": truncated index file");
            off += n;
            return off - n;
        };
        if (b.size() < 4 || b.compare(0, 4, "EFXI") != 0)
            throw CorruptIndex(where + ": bad magic");
        off = 4;
        const uint32_t version = get_u32(b, need(4));
        if (version != kIndexFormatVersion)
            throw VersionMismatch(where + ": index format version " + std::to_string(version) +
                                  ", expected " + std::to_string(kIndexFormatVersion));
        const uint32_t dim = get_u32(b, need(4));
        const uint64_t count = get_u64(b, need(8));
        if (dim == 0 || dim > (1u << 20)) throw CorruptIndex(where + ": implausible dim");
        const std::string fp = get_str(b, need);
        std::vector<Exemplar> entries;
        entries.reserve(static_cast<size_t>(count));
        for (uint64_t i = 0; i < count; ++i) {
            Exemplar e;
            e.label = get_str(b, need);
            e.font_id = get_str(b, need);
            if (e.label.empty()) throw CorruptIndex(where + ": empty label in entry");
            e.embedding.values.resize(dim);
            const size_t voff = need(static_cast<size_t>(dim) * 4);
            std::memcpy(e.embedding.values.data(), b.data() + voff, static_cast<size_t>(dim) * 4);
            entries.push_back(std::move(e));
        }
        const size_t payload_end = off;
        const uint32_t stored_crc = get_u32(b, need(4));
        if (off != b.size()) throw CorruptIndex(where + ": trailing bytes after checksum");
        const uint32_t crc = static_cast<uint32_t>(crc32(
            0L, reinterpret_cast<const Bytef*>(b.data()), static_cast<uInt>(payload_end)));
        if (crc != stored_crc) throw CorruptIndex(where + ": checksum mismatch");
        return ExemplarIndex(static_cast<int>(dim), fp, std::move(entries));
    }

private:
    int dim_;
    std::string encoder_fingerprint_;
    std::vector<Exemplar> entries_;

    static void put_u32(std::string& b, uint32_t v) {
        char buf[4];
        std::memcpy(buf, &v, 4);
        b.append(buf, 4);
    }
    static void put_u64(std::string& b, uint64_t v) {
        char buf[8];
        std::memcpy(buf, &v, 8);
        b.append(buf, 8);
    }
    static void put_str(std::string& b, const std::string& s) {
        put_u32(b, static_cast<uint32_t>(s.size()));
        b.append(s);
    }
    static uint32_t get_u32(const std::string& b, size_t off) {
        uint32_t v;
        std::memcpy(&v, b.data() + off, 4);
        return v;
    }
    static uint64_t get_u64(const std::string& b, size_t off) {
        uint64_t v;
        std::memcpy(&v, b.data() + off, 8);
        return v;
    }
    template <typename Need>
    static std::string get_str(const std::string& b, Need need) {
        const uint32_t len = get_u32(b, need(4));
        if (len > (1u << 24)) throw CorruptIndex("implausible string length in index file");
        const size_t soff = need(len);
        return b.substr(soff, len);
    }
};

/// Labels whose rendered exemplars produced bit-identical embeddings; such
/// labels cannot be told apart by retrieval.
struct CollisionGroup {
    std::vector<std::string> labels;
};

struct IndexBuildResult {
    ExemplarIndex index;
    std::vector<CollisionGroup> collisions;
};

/// Renders one exemplar per (label, font) pair and embeds it. Pairs whose
/// font lacks a glyph are skipped; order is label-major, then font order.
inline IndexBuildResult build_index(const Encoder& encoder,
                                    const std::vector<std::string>& labels,
                                    const std::vector<std::string>& font_paths, int canvas) {
    if (labels.empty()) throw ConfigError("build_index: no labels");
    if (font_paths.empty()) throw EmptyIndex("build_index: no fonts given");
    std::vector<std::shared_ptr<const Font>> fonts;
    fonts.reserve(font_paths.size());
    for (const auto& p : font_paths) fonts.push_back(load_font_cached(p));

    std::vector<Exemplar> entries;
    for (const auto& label : labels) {
        for (size_t fi = 0; fi < fonts.size(); ++fi) {
            ImageCrop crop;
            try {
                crop = fonts[fi]->render_exemplar(label, canvas);
            } catch (const MissingGlyph&) {
                continue;
            }
            Exemplar e;
            e.label = label;
            e.font_id = font_paths[fi];
            e.embedding = encoder.embed(crop);
            entries.push_back(std::move(e));
        }
    }
    if (entries.empty())
        throw EmptyIndex("build_index: zero (label, font) pairs rendered successfully");

    // Group bit-identical embeddings across distinct labels.
    std::map<std::string, std::vector<size_t>> by_bits;
    for (size_t i = 0; i < entries.size(); ++i) {
        const auto& v = entries[i].embedding.values;
        std::string key(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
        by_bits[key].push_back(i);
    }
    std::vector<CollisionGroup> collisions;
    for (const auto& [key, idxs] : by_bits) {
        std::vector<std::string> distinct;
        for (size_t i : idxs) {
            const std::string& l = entries[i].label;
            if (std::find(distinct.begin(), distinct.end(), l) == distinct.end())
                distinct.push_back(l);
        }
        if (distinct.size() > 1) {
            std::sort(distinct.begin(), distinct.end());
            collisions.push_back({std::move(distinct)});
        }
    }
    std::sort(collisions.begin(), collisions.end(),
              [](const CollisionGroup& a, const CollisionGroup& b) {
                  return a.labels < b.labels;
              });
    for (const auto& g : collisions) {
        std::cerr << "build_index: labels share an identical embedding:";
        for (const auto& l : g.labels) std::cerr << " \"" << l << "\"";
        std::cerr << "\n";
    }
    return IndexBuildResult{
        ExemplarIndex(encoder.dim(), encoder.fingerprint(), std::move(entries)),
        std::move(collisions)};
}

} // namespace effocr
