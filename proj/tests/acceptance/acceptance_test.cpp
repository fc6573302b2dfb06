// Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <thread>

#include "effocr/effocr.hpp"

#include "../support/onnx_builder.hpp"
#include "../support/synthetic.hpp"
#include "../support/test_util.hpp"

using namespace effocr;

namespace {

const std::string kSafeCharset = "abdeghkmnqrt234679XYZ";

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Embedding unit(std::vector<float> v) {
    double s = 0;
    for (float x : v) s += static_cast<double>(x) * x;
    const float inv = static_cast<float>(1.0 / std::sqrt(s));
    for (float& x : v) x *= inv;
    return Embedding{std::move(v)};
}

Embedding random_unit(std::mt19937& rng, int dim) {
    std::normal_distribution<float> dist(0.0f, 1.0f);
    std::vector<float> v(dim);
    for (float& x : v) x = dist(rng);
    return unit(std::move(v));
}

PipelineConfig ground_truth_char_pipeline(const std::string& coco_path,
                                          const std::string& index_path,
                                          Orientation orientation, int workers = 1) {
    PipelineConfig cfg;
    cfg.line_detector.kind = DetectorKind::GroundTruth;
    cfg.line_detector.annotation_path = coco_path;
    cfg.localizer = cfg.line_detector;
    cfg.recognition.char_index_path = index_path;
    cfg.recognition.insert_spaces = false;
    cfg.orientation = orientation;
    cfg.no_words = true;
    cfg.workers = workers;
    return cfg;
}

std::string save_char_index(const std::string& path, const std::string& charset) {
    const Encoder enc = Encoder::make(EncoderSpec{});
    auto built =
        build_index(enc, testutil::single_char_labels(charset), {testutil::dejavu_sans()}, 32);
    EXPECT_TRUE(built.collisions.empty()) << "charset has colliding renders";
    built.index.save(path);
    return path;
}

} // namespace

// Criterion 1: build a char index over >= 62 alphanumeric labels with the
// stub encoder, re-render every glyph, retrieve: top-1 accuracy 100%
// excluding labels flagged embedding-identical at build. Under 10 s.
TEST(Acceptance, C1_ExactRenderClosure) {
    const auto t0 = std::chrono::steady_clock::now();
    const Encoder enc = Encoder::make(EncoderSpec{});
    const auto labels = testutil::single_char_labels(testutil::kAlnum62);
    const auto built = build_index(enc, labels, {testutil::dejavu_sans()}, 32);
    ASSERT_EQ(built.index.size(), 62u);

    std::set<std::string> excluded;
    for (const auto& g : built.collisions)
        for (const auto& l : g.labels) excluded.insert(l);

    const auto font = load_font_cached(testutil::dejavu_sans());
    int checked = 0, correct = 0;
    for (const auto& label : labels) {
        if (excluded.count(label)) continue;
        const ImageCrop crop = font->render_exemplar(label, 32);
        const auto hits = built.index.query(enc.embed(crop), 1);
        ++checked;
        if (hits[0].label == label) ++correct;
    }
    EXPECT_GE(checked, 62 - static_cast<int>(excluded.size()));
    EXPECT_EQ(correct, checked) << "top-1 accuracy below 100%";
    const double elapsed = seconds_since(t0);
    EXPECT_LT(elapsed, 10.0);
    std::printf("    C1: %d/%d labels correct, %zu excluded, %.2fs\n", correct, checked,
                excluded.size(), elapsed);
}

// Criterion 2: 50 synthetic single-column pages per orientation (5-10 lines
// each, known text), ground-truth boxes, stub encoder, same-font index;
// eval reports CER exactly 0.0 for horizontal and vertical. Under 60 s.
TEST(Acceptance, C2_EndToEndSyntheticPages) {
    const auto t0 = std::chrono::steady_clock::now();
    testutil::TempDir tmp("acc_c2");
    const std::string index_path = save_char_index(tmp.file("chars.efxi"), kSafeCharset);

    for (const Orientation orientation : {Orientation::Horizontal, Orientation::Vertical}) {
        const bool horizontal = orientation == Orientation::Horizontal;
        const std::string sub = tmp.file(horizontal ? "h" : "v");
        const auto corpus = testutil::make_char_corpus(testutil::dejavu_sans(), kSafeCharset, 50,
                                                       orientation, horizontal ? 20260 : 20261);
        const auto written = testutil::write_corpus(corpus, sub);
        const PipelineConfig cfg =
            ground_truth_char_pipeline(written.coco_path, index_path, orientation);
        const EvalRunResult run = eval_run(written.manifest_path, cfg, sub + "_out");
        EXPECT_EQ(run.report.failed_records, 0);
        EXPECT_EQ(run.report.scored_records, 50);
        EXPECT_EQ(run.report.distance_sum, 0);
        EXPECT_DOUBLE_EQ(run.report.cer, 0.0)
            << (horizontal ? "horizontal" : "vertical") << " CER not exactly zero";
    }
    const double elapsed = seconds_since(t0);
    EXPECT_LT(elapsed, 60.0);
    std::printf("    C2: CER 0.0 on 50 horizontal + 50 vertical pages, %.2fs\n", elapsed);
}

// Criterion 3: query equals brute-force full scan exactly for 500 random
// unit queries against a 1,000-entry random index, k in {1, 5, 25}.
TEST(Acceptance, C3_RetrievalOracle) {
    constexpr int kDim = 64;
    std::mt19937 rng(33550336);
    std::vector<Exemplar> entries;
    for (int i = 0; i < 1000; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "L%04d", i);
        entries.push_back({buf, "f", random_unit(rng, kDim)});
    }
    const ExemplarIndex index(kDim, "fp", std::move(entries));

    int mismatches = 0;
    for (int q = 0; q < 500; ++q) {
        const Embedding query = random_unit(rng, kDim);
        for (const int k : {1, 5, 25}) {
            // independent scan
            std::vector<std::pair<float, const Exemplar*>> scored;
            for (const auto& e : index.entries()) {
                float s = 0.0f;
                for (int d = 0; d < kDim; ++d) s += query.values[d] * e.embedding.values[d];
                scored.emplace_back(std::clamp(s, -1.0f, 1.0f), &e);
            }
            std::stable_sort(scored.begin(), scored.end(),
                             [](const auto& a, const auto& b) {
                                 if (a.first != b.first) return a.first > b.first;
                                 if (a.second->label != b.second->label)
                                     return a.second->label < b.second->label;
                                 return a.second->font_id < b.second->font_id;
                             });
            const auto hits = index.query(query, k);
            ASSERT_EQ(hits.size(), static_cast<size_t>(k));
            for (int i = 0; i < k; ++i) {
                if (hits[i].label != scored[i].second->label ||
                    hits[i].similarity != scored[i].first)
                    ++mismatches;
            }
        }
    }
    EXPECT_EQ(mismatches, 0);
    std::printf("    C3: 500 queries x k in {1,5,25} match the scan oracle exactly\n");
}

// Criterion 4: nms equals the O(n^2) reference on 200 random box sets
// (n <= 200); idempotence holds.
TEST(Acceptance, C4_NmsOracle) {
    std::mt19937 rng(8128);
    std::uniform_int_distribution<int> n_dist(0, 200);
    std::uniform_int_distribution<int> coord(0, 19);
    std::uniform_int_distribution<int> size(1, 10);
    std::uniform_int_distribution<int> conf(1, 9);
    std::uniform_int_distribution<int> cls(0, 2);
    std::uniform_real_distribution<float> t_dist(0.0f, 1.0f);

    auto iou_ref = [](const BBox& a, const BBox& b) {
        const float ix = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
        const float iy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
        if (ix <= 0 || iy <= 0) return 0.0f;
        const float inter = ix * iy;
        return inter / ((a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter);
    };
    auto reference = [&](std::vector<DetectedObject> dets, float thresh) {
        std::stable_sort(dets.begin(), dets.end(),
                         [](const DetectedObject& a, const DetectedObject& b) {
                             if (a.confidence != b.confidence) return a.confidence > b.confidence;
                             if (a.bbox.x0 != b.bbox.x0) return a.bbox.x0 < b.bbox.x0;
                             if (a.bbox.y0 != b.bbox.y0) return a.bbox.y0 < b.bbox.y0;
                             if (a.bbox.x1 != b.bbox.x1) return a.bbox.x1 < b.bbox.x1;
                             if (a.bbox.y1 != b.bbox.y1) return a.bbox.y1 < b.bbox.y1;
                             return static_cast<int>(a.cls) < static_cast<int>(b.cls);
                         });
        std::vector<DetectedObject> kept;
        for (const auto& d : dets) {
            bool ok = true;
            for (const auto& k : kept)
                if (k.cls == d.cls && iou_ref(k.bbox, d.bbox) > thresh) ok = false;
            if (ok) kept.push_back(d);
        }
        return kept;
    };

    for (int trial = 0; trial < 200; ++trial) {
        const int n = n_dist(rng);
        std::vector<DetectedObject> dets(n);
        for (auto& d : dets) {
            const float x0 = static_cast<float>(coord(rng));
            const float y0 = static_cast<float>(coord(rng));
            d.bbox = BBox{x0, y0, x0 + size(rng), y0 + size(rng)};
            d.cls = static_cast<ObjectClass>(cls(rng));
            d.confidence = conf(rng) / 10.0f;
        }
        const float thresh = t_dist(rng);
        const auto got = nms(dets, thresh);
        ASSERT_EQ(got, reference(dets, thresh)) << "trial " << trial;
        ASSERT_EQ(nms(got, thresh), got) << "idempotence, trial " << trial;
    }
    std::printf("    C4: 200 random box sets match the quadratic reference; idempotent\n");
}

// Criterion 5: 1,000 random Unicode string pairs (length <= 50) match a DP
// oracle exactly; metric axioms hold; kitten/sitting -> 3.
TEST(Acceptance, C5_LevenshteinOracle) {
    EXPECT_EQ(levenshtein("kitten", "sitting"), 3);

    std::mt19937 rng(6);
    static const std::vector<std::pair<char32_t, char32_t>> ranges = {
        {0x41, 0x5A}, {0x61, 0x7A}, {0x30, 0x39}, {0xC0, 0xFF}, {0x3B1, 0x3C9},
        {0x65E5, 0x65FF}, {0x1F600, 0x1F60F}};
    auto random_cps = [&](int max_len) {
        std::uniform_int_distribution<int> len_dist(0, max_len);
        std::uniform_int_distribution<size_t> range_dist(0, ranges.size() - 1);
        std::vector<char32_t> out(len_dist(rng));
        for (auto& cp : out) {
            const auto [lo, hi] = ranges[range_dist(rng)];
            cp = lo + (rng() % (hi - lo + 1));
        }
        return out;
    };
    auto oracle = [](const std::vector<char32_t>& a, const std::vector<char32_t>& b) {
        std::vector<std::vector<int>> d(a.size() + 1, std::vector<int>(b.size() + 1));
        for (size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
        for (size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
        for (size_t i = 1; i <= a.size(); ++i)
            for (size_t j = 1; j <= b.size(); ++j)
                d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                                    d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        return d[a.size()][b.size()];
    };

    for (int t = 0; t < 1000; ++t) {
        const auto a = random_cps(50);
        const auto b = random_cps(50);
        const auto c = random_cps(50);
        const int ab = levenshtein(a, b);
        ASSERT_EQ(ab, oracle(a, b)) << "trial " << t;
        ASSERT_EQ(ab, levenshtein(b, a));
        ASSERT_EQ(levenshtein(a, a), 0);
        ASSERT_LE(levenshtein(a, c), ab + levenshtein(b, c));
    }
    std::printf("    C5: 1000 random Unicode pairs match the DP oracle; metric axioms hold\n");
}

// Criterion 6: on the synthetic word corpus, tau = -1 yields 100% WordMatch,
// tau = 1.01 yields 100% CharFallback with identical final text, and the
// WordMatch count is non-increasing across 11 tau values in [-1, 1.01].
TEST(Acceptance, C6_FallbackSemantics) {
    testutil::TempDir tmp("acc_c6");
    const auto corpus = testutil::make_word_corpus(testutil::dejavu_sans(), 10, 424242);
    const auto written = testutil::write_corpus(corpus, tmp.path().string());

    const Encoder enc = Encoder::make(EncoderSpec{});
    auto char_built = build_index(enc, testutil::single_char_labels("abcdefghijklmnopqrstuvwxyz"),
                                  {testutil::dejavu_sans()}, 32);
    const std::string char_path = tmp.file("chars.efxi");
    char_built.index.save(char_path);
    const std::string word_path = tmp.file("words.efxi");
    testutil::build_word_region_index(corpus.vocab, testutil::dejavu_sans(), enc, 32)
        .save(word_path);

    PipelineConfig cfg;
    cfg.line_detector.kind = DetectorKind::GroundTruth;
    cfg.line_detector.annotation_path = written.coco_path;
    cfg.localizer = cfg.line_detector;
    cfg.recognition.char_index_path = char_path;
    cfg.recognition.word_index_path = word_path;
    cfg.recognition.insert_spaces = true;

    std::vector<float> taus;
    for (int i = 0; i < 11; ++i) taus.push_back(-1.0f + 2.01f * i / 10.0f);

    int prev_word_matches = std::numeric_limits<int>::max();
    for (size_t ti = 0; ti < taus.size(); ++ti) {
        cfg.recognition.word_fallback_threshold = taus[ti];
        const Engine engine(cfg);
        const auto results = engine.infer(written.images);
        int word_matches = 0, fallbacks = 0, total = 0;
        for (size_t i = 0; i < results.size(); ++i) {
            ASSERT_EQ(results[i].status, JobStatus::Ok) << results[i].failure_reason;
            for (const auto& line : results[i].transcription.lines) {
                for (const auto& token : line.tokens) {
                    ++total;
                    if (token.source == TokenSource::WordMatch) ++word_matches;
                    if (token.source == TokenSource::CharFallback) ++fallbacks;
                }
            }
            if (ti == 0 || ti + 1 == taus.size())
                ASSERT_EQ(results[i].transcription.full_text, corpus.gold_texts[i])
                    << "tau " << taus[ti];
        }
        if (ti == 0) EXPECT_EQ(word_matches, total) << "tau -1 must be all WordMatch";
        if (ti + 1 == taus.size()) EXPECT_EQ(fallbacks, total) << "tau 1.01 must all fall back";
        EXPECT_LE(word_matches, prev_word_matches) << "tau " << taus[ti];
        prev_word_matches = word_matches;
    }
    std::printf("    C6: endpoints exact, WordMatch count non-increasing over 11 taus\n");
}

// Criterion 7: the criterion-2 run with workers 1 and 4 produces
// byte-identical exported files; output order equals input order.
TEST(Acceptance, C7_DeterminismUnderConcurrency) {
    testutil::TempDir tmp("acc_c7");
    const std::string index_path = save_char_index(tmp.file("chars.efxi"), kSafeCharset);
    const auto corpus = testutil::make_char_corpus(testutil::dejavu_sans(), kSafeCharset, 12,
                                                   Orientation::Horizontal, 777);
    const auto written = testutil::write_corpus(corpus, tmp.path().string());

    std::vector<std::string> dirs;
    for (const int workers : {1, 4}) {
        PipelineConfig cfg = ground_truth_char_pipeline(written.coco_path, index_path,
                                                        Orientation::Horizontal, workers);
        cfg.queue_capacity = 3;
        const Engine engine(cfg);
        const auto results = engine.infer(written.images);
        for (size_t i = 0; i < results.size(); ++i)
            ASSERT_EQ(results[i].image_id, written.images[i].first) << "order changed";
        const std::string dir = tmp.file("out_w" + std::to_string(workers));
        export_results(results, ExportSelection{}, dir);
        dirs.push_back(dir);
    }
    for (const char* name :
         {"coco_lines.json", "coco_words.json", "coco_chars.json", "page_0.txt", "page_11.txt"}) {
        const std::string a = testutil::read_file(dirs[0] + "/" + name);
        const std::string b = testutil::read_file(dirs[1] + "/" + name);
        ASSERT_FALSE(a.empty()) << name;
        EXPECT_EQ(a, b) << name << " differs between 1 and 4 workers";
    }
    std::printf("    C7: exports byte-identical for workers 1 vs 4; order preserved\n");
}

// Criterion 8: index save/load round-trip bit-identical; COCO export/parse
// round-trip within 1e-4 and exact texts; truncated index -> CorruptIndex.
TEST(Acceptance, C8_Serialization) {
    testutil::TempDir tmp("acc_c8");

    std::mt19937 rng(512);
    std::vector<Exemplar> entries;
    for (int i = 0; i < 122; ++i)
        entries.push_back({"label_" + std::to_string(i), i % 2 ? "fontA" : "fontB",
                           random_unit(rng, 32)});
    const ExemplarIndex index(32, "fp-acc", std::move(entries));
    const std::string path = tmp.file("acc.efxi");
    index.save(path);
    const ExemplarIndex loaded = ExemplarIndex::load(path);
    ASSERT_EQ(loaded.serialize(), index.serialize()) << "round trip not bit-identical";

    const std::string bytes = testutil::read_file(path);
    bool all_corrupt = true;
    for (const size_t cut : {size_t(2), size_t(9), bytes.size() / 3, bytes.size() - 1}) {
        try {
            ExemplarIndex::deserialize(bytes.substr(0, cut));
            all_corrupt = false;
        } catch (const CorruptIndex&) {
        }
    }
    EXPECT_TRUE(all_corrupt) << "a truncation was accepted";

    // COCO round trip through a real inference export
    const std::string index_path = save_char_index(tmp.file("chars.efxi"), kSafeCharset);
    const auto corpus = testutil::make_char_corpus(testutil::dejavu_sans(), kSafeCharset, 3,
                                                   Orientation::Horizontal, 3131);
    const auto written = testutil::write_corpus(corpus, tmp.path().string());
    const Engine engine(
        ground_truth_char_pipeline(written.coco_path, index_path, Orientation::Horizontal));
    const auto results = engine.infer(written.images);
    const ExportedFiles files =
        export_results(results, ExportSelection{}, tmp.file("exported"));
    const CocoDocument lines_doc = parse_coco(files.coco_paths[0]);
    size_t ann = 0;
    for (const auto& r : results) {
        for (const auto& line : r.transcription.lines) {
            ASSERT_LT(ann, lines_doc.annotations.size());
            const CocoAnnotation& a = lines_doc.annotations[ann++];
            ASSERT_NEAR(a.bbox.x0, line.bbox.x0, 1e-4);
            ASSERT_NEAR(a.bbox.y0, line.bbox.y0, 1e-4);
            ASSERT_NEAR(a.bbox.x1, line.bbox.x1, 1e-4);
            ASSERT_NEAR(a.bbox.y1, line.bbox.y1, 1e-4);
            ASSERT_EQ(a.text, line.text);
        }
    }
    EXPECT_EQ(ann, lines_doc.annotations.size());
    std::printf("    C8: index round-trip bit-identical; COCO round-trip within 1e-4\n");
}

// Criterion 9: throughput report on 64 synthetic pages (report-only, no hard
// threshold): per-stage timings for workers 1 and 4.
TEST(Acceptance, C9_ThroughputReport) {
    testutil::TempDir tmp("acc_c9");
    const std::string index_path = save_char_index(tmp.file("chars.efxi"), kSafeCharset);
    const auto corpus = testutil::make_char_corpus(testutil::dejavu_sans(), kSafeCharset, 64,
                                                   Orientation::Horizontal, 9090);
    const auto written = testutil::write_corpus(corpus, tmp.path().string());

    double wall_ms[2] = {0, 0};
    int wi = 0;
    for (const int workers : {1, 4}) {
        const Engine engine(ground_truth_char_pipeline(written.coco_path, index_path,
                                                       Orientation::Horizontal, workers));
        const auto t0 = std::chrono::steady_clock::now();
        const auto results = engine.infer(written.images);
        wall_ms[wi] = seconds_since(t0) * 1000.0;
        StageTimings total;
        int ok = 0;
        for (const auto& r : results) {
            total += r.timings;
            ok += r.status == JobStatus::Ok;
        }
        ASSERT_EQ(ok, 64);
        std::printf(
            "    C9: workers=%d wall=%.1fms read=%.1f detect=%.1f localize=%.1f "
            "recognize=%.1f assemble=%.1f (ms, summed per-image)\n",
            workers, wall_ms[wi], total.read_ms, total.detect_ms, total.localize_ms,
            total.recognize_ms, total.assemble_ms);
        ++wi;
    }
    const unsigned cores = std::thread::hardware_concurrency();
    std::printf("    C9: %u hardware threads; wall(4)/wall(1) = %.2f (report-only)\n", cores,
                wall_ms[1] / wall_ms[0]);
}

namespace {

class CriterionPrinter : public ::testing::EmptyTestEventListener {
    void OnTestEnd(const ::testing::TestInfo& info) override {
        std::printf("[%s] %s\n", info.result()->Passed() ? "PASS" : "FAIL", info.name());
        std::fflush(stdout);
    }
};

} // namespace

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    ::testing::UnitTest::GetInstance()->listeners().Append(new CriterionPrinter);
    return RUN_ALL_TESTS();
}
