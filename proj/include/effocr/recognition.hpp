#pragma once

#include <algorithm>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "effocr/encoder.hpp"
#include "effocr/errors.hpp"
#include "effocr/geometry.hpp"
#include "effocr/image.hpp"
#include "effocr/index.hpp"

namespace effocr {

/// Replacement marker for crops retrieval cannot place anywhere near an
/// exemplar; keeps garbage visible downstream instead of guessing.
inline constexpr const char* kUnreadableMarker = "□"; // WHITE SQUARE

struct RecognitionConfig {
    float word_fallback_threshold = 0.82f; // tau; tuneable, engine default
    std::shared_ptr<const ExemplarIndex> word_index; // present iff word recognition enabled
    std::shared_ptr<const ExemplarIndex> char_index; // always required
    bool insert_spaces = true;
    int k = 1; // neighbors retrieved; top-1 drives output
    float unreadable_threshold = 0.05f;
};

enum class TokenSource { WordMatch, CharFallback, CharOnly };

inline const char* token_source_name(TokenSource s) {
    switch (s) {
        case TokenSource::WordMatch: return "word_match";
        case TokenSource::CharFallback: return "char_fallback";
        case TokenSource::CharOnly: return "char_only";
    }
    return "?";
}

/// One recognized character inside a token (char path only).
struct CharPiece {
    std::string text;
    BBox bbox; // line-local
    float similarity = 0.0f;
};

struct RecognizedToken {
    std::string text;
    BBox bbox; // line-local
    TokenSource source = TokenSource::CharOnly;
    float similarity = 0.0f; // top-1 of the deciding query
    bool low_confidence = false;
    std::vector<CharPiece> chars; // filled on the char path
};

/// Char-to-word assignment: each char goes to the word containing its
/// center (highest IoU on overlap ties); chars in no word are orphans.
struct CharAssignment {
    std::vector<std::vector<size_t>> word_chars; // per word, char indices in reading order
    std::vector<size_t> orphans;                 // char indices in reading order
};

namespace detail {

inline bool reading_before(const BBox& a, const BBox& b, Orientation orientation) {
    if (orientation == Orientation::Horizontal) {
        if (a.x0 != b.x0) return a.x0 < b.x0;
        return a.y0 < b.y0;
    }
    if (a.y0 != b.y0) return a.y0 < b.y0;
    return a.x0 < b.x0;
}

} // namespace detail

inline CharAssignment assign_chars(const std::vector<BBox>& words, const std::vector<BBox>& chars,
                                   Orientation orientation) {
    CharAssignment out;
    out.word_chars.resize(words.size());
    for (size_t ci = 0; ci < chars.size(); ++ci) {
        const float cx = chars[ci].center_x();
        const float cy = chars[ci].center_y();
        int best = -1;
        float best_iou = -1.0f;
        for (size_t wi = 0; wi < words.size(); ++wi) {
            if (!words[wi].contains(cx, cy)) continue;
            const float overlap = iou(words[wi], chars[ci]);
            if (overlap > best_iou) {
                best_iou = overlap;
                best = static_cast<int>(wi);
            }
        }
        if (best >= 0)
            out.word_chars[static_cast<size_t>(best)].push_back(ci);
        else
            out.orphans.push_back(ci);
    }
    auto by_reading_order = [&](size_t a, size_t b) {
        return detail::reading_before(chars[a], chars[b], orientation);
    };
    for (auto& list : out.word_chars) std::sort(list.begin(), list.end(), by_reading_order);
    std::sort(out.orphans.begin(), out.orphans.end(), by_reading_order);
    return out;
}

namespace detail {

inline void check_fingerprints(const RecognitionConfig& cfg, const Encoder* word_enc,
                               const Encoder& char_enc) {
    if (!cfg.char_index) throw ConfigError("recognition: char_index is required");
    cfg.char_index->verify_fingerprint(char_enc.fingerprint());
    if (cfg.word_index) {
        if (!word_enc)
            throw ConfigError("recognition: word_index present but no word encoder given");
        cfg.word_index->verify_fingerprint(word_enc->fingerprint());
    }
}

inline std::pair<std::string, float> top1_char(const Embedding& q, const RecognitionConfig& cfg) {
    const int k = std::min<int>(cfg.k, static_cast<int>(cfg.char_index->size()));
    const QueryHit hit = cfg.char_index->query(q, std::max(k, 1)).front();
    if (hit.similarity < cfg.unreadable_threshold) return {kUnreadableMarker, hit.similarity};
    return {hit.label, hit.similarity};
}

} // namespace detail

/// Word recognition with character fallback: accept the word-index top-1
/// only at cosine similarity >= tau, otherwise recognize the word's chars
/// one by one. Without a word index the char path is taken directly.
/// word_enc may be null when cfg has no word index.
inline RecognizedToken recognize_word(const ImageCrop& word_crop,
                                      const std::vector<ImageCrop>& char_crops,
                                      const std::vector<BBox>& char_boxes,
                                      const RecognitionConfig& cfg, const Encoder* word_enc,
                                      const Encoder& char_enc) {
    detail::check_fingerprints(cfg, word_enc, char_enc);
    if (char_crops.size() != char_boxes.size())
        throw ConfigError("recognize_word: char_crops and char_boxes must align");
    RecognizedToken token;

    float word_sim = 0.0f;
    std::string word_label;
    bool have_word_hit = false;
    if (cfg.word_index) {
        const Embedding q = word_enc->embed(word_crop);
        const int k = std::min<int>(cfg.k, static_cast<int>(cfg.word_index->size()));
        const QueryHit hit = cfg.word_index->query(q, std::max(k, 1)).front();
        word_sim = hit.similarity;
        word_label = hit.label;
        have_word_hit = true;
        if (word_sim >= cfg.word_fallback_threshold) {
            token.text = word_label;
            token.source = TokenSource::WordMatch;
            token.similarity = word_sim;
            return token;
        }
    }

    if (char_crops.empty()) {
        if (have_word_hit) {
            // Word box with no chars inside and similarity below tau: emit the
            // word hit anyway, flagged low-confidence.
            token.text = word_label;
            token.source = TokenSource::WordMatch;
            token.similarity = word_sim;
            token.low_confidence = true;
        } else {
            token.text = kUnreadableMarker;
            token.source = TokenSource::CharOnly;
            token.similarity = 0.0f;
            token.low_confidence = true;
        }
        return token;
    }

    const std::vector<Embedding> qs = char_enc.embed_batch(char_crops);
    float min_sim = 1.0f;
    for (size_t i = 0; i < qs.size(); ++i) {
        const auto [label, sim] = detail::top1_char(qs[i], cfg);
        token.text += label;
        token.chars.push_back({label, char_boxes[i], sim});
        min_sim = std::min(min_sim, sim);
    }
    token.source = have_word_hit ? TokenSource::CharFallback : TokenSource::CharOnly;
    token.similarity = have_word_hit ? word_sim : min_sim;
    return token;
}

/// assign_chars, then recognize each word (orphan chars become single-char
/// tokens); tokens come back in reading order with line-local boxes.
inline std::vector<RecognizedToken> recognize_line(const ImageCrop& line,
                                                   const std::vector<DetectedObject>& words,
                                                   const std::vector<DetectedObject>& chars,
                                                   const RecognitionConfig& cfg,
                                                   const Encoder* word_enc,
                                                   const Encoder& char_enc,
                                                   Orientation orientation) {
    detail::check_fingerprints(cfg, word_enc, char_enc);
    std::vector<BBox> word_boxes, char_boxes;
    word_boxes.reserve(words.size());
    char_boxes.reserve(chars.size());
    for (const auto& w : words) word_boxes.push_back(w.bbox);
    for (const auto& c : chars) char_boxes.push_back(c.bbox);

    const CharAssignment assignment = assign_chars(word_boxes, char_boxes, orientation);

    std::vector<RecognizedToken> tokens;
    for (size_t wi = 0; wi < word_boxes.size(); ++wi) {
        const ImageCrop word_crop = crop(line, raster(word_boxes[wi]));
        std::vector<ImageCrop> char_crops;
        std::vector<BBox> assigned_boxes;
        for (size_t ci : assignment.word_chars[wi]) {
            char_crops.push_back(crop(line, raster(char_boxes[ci])));
            assigned_boxes.push_back(char_boxes[ci]);
        }
        RecognizedToken token =
            recognize_word(word_crop, char_crops, assigned_boxes, cfg, word_enc, char_enc);
        token.bbox = word_boxes[wi];
        tokens.push_back(std::move(token));
    }
    for (size_t ci : assignment.orphans) {
        const ImageCrop char_crop = crop(line, raster(char_boxes[ci]));
        const auto [label, sim] = detail::top1_char(char_enc.embed(char_crop), cfg);
        RecognizedToken token;
        token.text = label;
        token.bbox = char_boxes[ci];
        token.source = TokenSource::CharOnly;
        token.similarity = sim;
        token.chars.push_back({label, char_boxes[ci], sim});
        tokens.push_back(std::move(token));
    }
    std::sort(tokens.begin(), tokens.end(),
              [orientation](const RecognizedToken& a, const RecognizedToken& b) {
                  return detail::reading_before(a.bbox, b.bbox, orientation);
              });
    return tokens;
}

/// Mining support for recognizer training: which wrong labels rank highly
/// for a labeled crop.
struct HardNegative {
    std::string gold;
    std::vector<std::string> confusions; // retrieval order, deduplicated
};

inline std::vector<HardNegative> export_hard_negatives(
    const std::vector<std::pair<ImageCrop, std::string>>& labeled, const ExemplarIndex& index,
    const Encoder& enc, int k) {
    index.verify_fingerprint(enc.fingerprint());
    std::vector<HardNegative> out;
    out.reserve(labeled.size());
    for (const auto& [crop_img, gold] : labeled) {
        const Embedding q = enc.embed(crop_img);
        const int kk = std::min<int>(std::max(k, 1), static_cast<int>(index.size()));
        const std::vector<QueryHit> hits = index.query(q, kk);
        HardNegative hn;
        hn.gold = gold;
        for (const auto& h : hits) {
            if (h.label == gold) continue;
            if (std::find(hn.confusions.begin(), hn.confusions.end(), h.label) ==
                hn.confusions.end())
                hn.confusions.push_back(h.label);
        }
        out.push_back(std::move(hn));
    }
    return out;
}

/// One record per line: gold<TAB>confusion,confusion,...
inline void write_hard_negatives(const std::vector<HardNegative>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot open hard-negative file for writing: " + path);
    for (const auto& r : rows) {
        out << r.gold << '\t';
        for (size_t i = 0; i < r.confusions.size(); ++i) {
            if (i) out << ',';
            out << r.confusions[i];
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing hard-negative file: " + path);
}

} // namespace effocr
