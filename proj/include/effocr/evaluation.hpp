#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <unicode/unorm2.h>
#include <unicode/ustring.h>

#include <json.hpp>

#include "effocr/errors.hpp"
#include "effocr/pipeline.hpp"
#include "effocr/utf8.hpp"

namespace effocr {

/// Minimal insertions + deletions + substitutions between two code point
/// sequences (two-row dynamic program).
inline int levenshtein(const std::vector<char32_t>& a, const std::vector<char32_t>& b) {
    const size_t n = a.size(), m = b.size();
    if (n == 0) return static_cast<int>(m);
    if (m == 0) return static_cast<int>(n);
    std::vector<int> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (size_t j = 1; j <= m; ++j) {
            const int cost = a[i - 1] == b[j - 1] ? 0 : 1;
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

/// Operates on Unicode code points, not bytes.
inline int levenshtein(const std::string& a, const std::string& b) {
    return levenshtein(utf8_decode(a), utf8_decode(b));
}

/// Token-sequence edit distance for WER.
inline int levenshtein_tokens(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
    const size_t n = a.size(), m = b.size();
    if (n == 0) return static_cast<int>(m);
    if (m == 0) return static_cast<int>(n);
    std::vector<int> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (size_t j = 1; j <= m; ++j) {
            const int cost = a[i - 1] == b[j - 1] ? 0 : 1;
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

/// NFC normalization via ICU; composed and decomposed accents score alike.
inline std::string nfc(const std::string& s) {
    if (s.empty()) return s;
    UErrorCode status = U_ZERO_ERROR;
    const UNormalizer2* norm = unorm2_getNFCInstance(&status);
    if (U_FAILURE(status)) throw Error("icu: cannot obtain NFC normalizer");

    std::vector<UChar> utf16(s.size() + 1);
    int32_t len16 = 0;
    u_strFromUTF8(utf16.data(), static_cast<int32_t>(utf16.size()), &len16, s.data(),
                  static_cast<int32_t>(s.size()), &status);
    if (U_FAILURE(status)) return s; // not valid UTF-8; score as-is

    std::vector<UChar> out16(static_cast<size_t>(len16) * 2 + 16);
    const int32_t out_len = unorm2_normalize(norm, utf16.data(), len16, out16.data(),
                                             static_cast<int32_t>(out16.size()), &status);
    if (U_FAILURE(status)) return s;

    std::string out(static_cast<size_t>(out_len) * 4 + 8, '\0');
    int32_t len8 = 0;
    u_strToUTF8(out.data(), static_cast<int32_t>(out.size()), &len8, out16.data(), out_len,
                &status);
    if (U_FAILURE(status)) return s;
    out.resize(static_cast<size_t>(len8));
    return out;
}

inline std::vector<std::string> split_whitespace(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

struct EvalRecord {
    std::string image_id;
    std::string prediction;
    std::string gold;
};

struct RecordScore {
    std::string image_id;
    bool failed = false;
    std::string failure_reason;
    bool empty_gold = false;
    int64_t distance = 0;
    int64_t gold_len = 0;
    int64_t word_distance = 0;
    int64_t gold_words = 0;
    double record_cer = 0.0;
};

struct EvalReport {
    double cer = 0.0; // micro: sum of distances / sum of gold lengths
    double wer = 0.0;
    int64_t distance_sum = 0;
    int64_t gold_len_sum = 0;
    int64_t word_distance_sum = 0;
    int64_t gold_word_sum = 0;
    int records = 0;
    int scored_records = 0;
    int empty_gold_records = 0;
    int failed_records = 0;
    std::vector<RecordScore> per_record;
};

namespace eval_detail {

inline std::string strip_whitespace(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s)
        if (c != ' ' && c != '\t' && c != '\n' && c != '\r') out.push_back(c);
    return out;
}

} // namespace eval_detail

/// Micro-averaged character and word error rates. Both strings are
/// NFC-normalized first. Empty-gold records are excluded from the
/// denominators but counted and reported.
inline EvalReport cer(const std::vector<EvalRecord>& records, bool ignore_whitespace = false) {
    if (records.empty()) throw ConfigError("cer: no records");
    EvalReport report;
    report.records = static_cast<int>(records.size());
    for (const auto& rec : records) {
        std::string pred = nfc(rec.prediction);
        std::string gold = nfc(rec.gold);
        if (ignore_whitespace) {
            pred = eval_detail::strip_whitespace(pred);
            gold = eval_detail::strip_whitespace(gold);
        }
        RecordScore score;
        score.image_id = rec.image_id;
        const std::vector<char32_t> gold_cps = utf8_decode(gold);
        score.gold_len = static_cast<int64_t>(gold_cps.size());
        if (gold_cps.empty()) {
            score.empty_gold = true;
            ++report.empty_gold_records;
            report.per_record.push_back(std::move(score));
            continue;
        }
        score.distance = levenshtein(utf8_decode(pred), gold_cps);
        const std::vector<std::string> gold_tokens = split_whitespace(gold);
        score.gold_words = static_cast<int64_t>(gold_tokens.size());
        score.word_distance = levenshtein_tokens(split_whitespace(pred), gold_tokens);
        score.record_cer = static_cast<double>(score.distance) / score.gold_len;
        report.distance_sum += score.distance;
        report.gold_len_sum += score.gold_len;
        report.word_distance_sum += score.word_distance;
        report.gold_word_sum += score.gold_words;
        ++report.scored_records;
        report.per_record.push_back(std::move(score));
    }
    if (report.gold_len_sum == 0)
        throw AllGoldEmpty("cer: total gold length is zero");
    report.cer = static_cast<double>(report.distance_sum) / report.gold_len_sum;
    report.wer = report.gold_word_sum > 0
                     ? static_cast<double>(report.word_distance_sum) / report.gold_word_sum
                     : 0.0;
    return report;
}

struct ManifestRecord {
    std::string image_id;
    std::string image_path;
    std::string gold_text;
    std::string coco_path; // optional
};

/// UTF-8 JSON list of {image_id, image_path, gold_text, optional coco_path}.
inline std::vector<ManifestRecord> parse_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("manifest: cannot open file: " + path);
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("manifest: " + path + ": invalid JSON: " + e.what());
    }
    if (!root.is_array()) throw ManifestError("manifest: " + path + ": root must be an array");
    std::vector<ManifestRecord> out;
    std::set<std::string> seen_ids;
    for (size_t i = 0; i < root.size(); ++i) {
        const std::string ctx = path + "[" + std::to_string(i) + "]";
        const auto& item = root[i];
        if (!item.is_object()) throw ManifestError("manifest: " + ctx + " must be an object");
        for (auto it = item.begin(); it != item.end(); ++it) {
            if (it.key() != "image_id" && it.key() != "image_path" && it.key() != "gold_text" &&
                it.key() != "coco_path")
                throw ManifestError("manifest: unknown key \"" + ctx + "." + it.key() + "\"");
        }
        ManifestRecord rec;
        auto get_string = [&](const char* key, bool required) -> std::string {
            if (!item.contains(key)) {
                if (required)
                    throw ManifestError("manifest: missing " + ctx + "." + key);
                return {};
            }
            if (!item.at(key).is_string())
                throw ManifestError("manifest: " + ctx + "." + key + " must be a string");
            return item.at(key).get<std::string>();
        };
        rec.image_id = get_string("image_id", true);
        rec.image_path = get_string("image_path", true);
        if (!item.contains("gold_text"))
            throw ManifestError("manifest: missing gold for " + ctx + " (gold_text)");
        rec.gold_text = get_string("gold_text", true);
        rec.coco_path = get_string("coco_path", false);
        if (!seen_ids.insert(rec.image_id).second)
            throw ManifestError("manifest: duplicate image_id \"" + rec.image_id + "\" at " +
                                ctx);
        out.push_back(std::move(rec));
    }
    return out;
}

struct EvalRunResult {
    EvalReport report;
    std::vector<JobResult> job_results;
    std::string report_path;
    std::string records_path;
};

namespace eval_detail {

inline std::string tsv_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\\': out += "\\\\"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

} // namespace eval_detail

/// Runs inference on the manifest's images, aligns predictions with gold by
/// image_id, and scores them. A per-record TSV and a JSON report are written
/// when out_dir is nonempty. Missing image files are a ManifestError up
/// front; images that fail during inference become failed records and are
/// excluded from the score sums.
inline EvalRunResult eval_run(const std::string& manifest_path, const PipelineConfig& cfg,
                              const std::string& out_dir = "", bool ignore_whitespace = false) {
    namespace fs = std::filesystem;
    const std::vector<ManifestRecord> manifest = parse_manifest(manifest_path);
    for (const auto& rec : manifest) {
        if (!fs::exists(rec.image_path))
            throw ManifestError("manifest: missing image file \"" + rec.image_path +
                                "\" for image_id \"" + rec.image_id + "\"");
        if (!rec.coco_path.empty() && !fs::exists(rec.coco_path))
            throw ManifestError("manifest: missing coco file \"" + rec.coco_path +
                                "\" for image_id \"" + rec.image_id + "\"");
    }

    // Ground-truth detectors with no annotation source of their own read the
    // manifest's coco files, merged into one document.
    const bool needs_manifest_gt =
        (cfg.line_detector.kind == DetectorKind::GroundTruth &&
         cfg.line_detector.annotation_path.empty()) ||
        (cfg.localizer.kind == DetectorKind::GroundTruth && cfg.localizer.annotation_path.empty());
    std::optional<CocoDocument> merged;
    if (needs_manifest_gt) {
        std::vector<std::string> paths;
        for (const auto& rec : manifest) {
            if (rec.coco_path.empty())
                throw ManifestError("manifest: record \"" + rec.image_id +
                                    "\" needs coco_path for ground-truth detection");
            if (std::find(paths.begin(), paths.end(), rec.coco_path) == paths.end())
                paths.push_back(rec.coco_path);
        }
        std::vector<CocoDocument> docs;
        docs.reserve(paths.size());
        for (const auto& p : paths) docs.push_back(parse_coco(p));
        merged = merge_coco(docs);
    }

    Engine engine(cfg, std::move(merged));
    std::vector<std::pair<std::string, std::string>> images;
    images.reserve(manifest.size());
    for (const auto& rec : manifest) images.emplace_back(rec.image_id, rec.image_path);
    EvalRunResult run;
    run.job_results = engine.infer(images);

    std::vector<EvalRecord> scored;
    std::vector<RecordScore> failed;
    std::map<std::string, const JobResult*> by_id;
    for (const auto& r : run.job_results) by_id[r.image_id] = &r;
    for (const auto& rec : manifest) {
        const JobResult* jr = by_id.at(rec.image_id);
        if (jr->status == JobStatus::Failed) {
            RecordScore score;
            score.image_id = rec.image_id;
            score.failed = true;
            score.failure_reason = jr->failure_reason;
            failed.push_back(std::move(score));
            continue;
        }
        scored.push_back({rec.image_id, jr->transcription.full_text, rec.gold_text});
    }
    if (scored.empty() && !failed.empty())
        throw ManifestError("eval: every image failed inference");
    run.report = cer(scored, ignore_whitespace);
    run.report.failed_records += static_cast<int>(failed.size());
    run.report.records += static_cast<int>(failed.size());
    for (auto& f : failed) run.report.per_record.push_back(std::move(f));

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        run.records_path = (fs::path(out_dir) / "records.tsv").string();
        std::ofstream tsv(run.records_path, std::ios::trunc | std::ios::binary);
        if (!tsv) throw IoError("cannot write " + run.records_path);
        tsv << "image_id\tstatus\tdistance\tgold_len\tcer\tprediction\tgold\n";
        std::map<std::string, const EvalRecord*> preds;
        for (const auto& s : scored) preds[s.image_id] = &s;
        for (const auto& score : run.report.per_record) {
            tsv << score.image_id << '\t' << (score.failed ? "failed" : "ok") << '\t'
                << score.distance << '\t' << score.gold_len << '\t' << score.record_cer << '\t';
            if (score.failed) {
                tsv << eval_detail::tsv_escape(score.failure_reason) << "\t\n";
            } else {
                const EvalRecord* p = preds.count(score.image_id) ? preds[score.image_id] : nullptr;
                tsv << (p ? eval_detail::tsv_escape(p->prediction) : "") << '\t'
                    << (p ? eval_detail::tsv_escape(p->gold) : "") << '\n';
            }
        }

        nlohmann::json j;
        j["cer"] = run.report.cer;
        j["wer"] = run.report.wer;
        j["distance_sum"] = run.report.distance_sum;
        j["gold_len_sum"] = run.report.gold_len_sum;
        j["records"] = run.report.records;
        j["scored_records"] = run.report.scored_records;
        j["empty_gold_records"] = run.report.empty_gold_records;
        j["failed_records"] = run.report.failed_records;
        run.report_path = (fs::path(out_dir) / "report.json").string();
        std::ofstream rep(run.report_path, std::ios::trunc | std::ios::binary);
        if (!rep) throw IoError("cannot write " + run.report_path);
        rep << j.dump(2) << "\n";
    }
    return run;
}

} // namespace effocr
