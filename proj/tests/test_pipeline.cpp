#include "effocr/pipeline.hpp"

#include <gtest/gtest.h>

#include "effocr/evaluation.hpp"
#include "support/synthetic.hpp"
#include "support/test_util.hpp"

using namespace effocr;

namespace {

// Charset whose DejaVu renders are pairwise distinct; asserted below.
const std::string kSafeCharset = "abdeghkmnqrt234679XYZ";

std::string save_char_index(const std::string& dir, const std::string& charset) {
    const Encoder enc = Encoder::make(EncoderSpec{});
    auto result = build_index(enc, testutil::single_char_labels(charset),
                              {testutil::dejavu_sans()}, 32);
    EXPECT_TRUE(result.collisions.empty());
    const std::string path = dir + "/chars.efxi";
    result.index.save(path);
    return path;
}

PipelineConfig char_pipeline(const std::string& coco_path, const std::string& index_path,
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

} // namespace

TEST(Pipeline, CharCorpusHorizontalExact) {
    testutil::TempDir tmp("pipe_h");
    const auto corpus = testutil::make_char_corpus(testutil::dejavu_sans(), kSafeCharset, 3,
                                                   Orientation::Horizontal, 101);
    const auto written = testutil::write_corpus(corpus, tmp.path().string());
    const std::string index_path = save_char_index(tmp.path().string(), kSafeCharset);
    const Engine engine(
        char_pipeline(written.coco_path, index_path, Orientation::Horizontal));

    const auto results = engine.infer(written.images);
    ASSERT_EQ(results.size(), corpus.pages.size());
    for (size_t i = 0; i < results.size(); ++i) {
        ASSERT_EQ(results[i].status, JobStatus::Ok) << results[i].failure_reason;
        EXPECT_EQ(results[i].transcription.full_text, corpus.gold_texts[i]);
        EXPECT_EQ(results[i].image_id, corpus.image_ids[i]);
        EXPECT_GE(results[i].timings.total_ms(), 0.0);
    }
}

TEST(Pipeline, CharCorpusVerticalExact) {
    testutil::TempDir tmp("pipe_v");
    const auto corpus = testutil::make_char_corpus(testutil::dejavu_sans(), kSafeCharset, 3,
                                                   Orientation::Vertical, 202);
    const auto written = testutil::write_corpus(corpus, tmp.path().string());
    const std::string index_path = save_char_index(tmp.path().string(), kSafeCharset);
    const Engine engine(char_pipeline(written.coco_path, index_path, Orientation::Vertical));

    const auto results = engine.infer(written.images);
    for (size_t i = 0; i < results.size(); ++i) {
        ASSERT_EQ(results[i].status, JobStatus::Ok) << results[i].failure_reason;
        EXPECT_EQ(results[i].transcription.full_text, corpus.gold_texts[i]);
    }
}

TEST(Pipeline, WordCorpusBothPathsExact) {
    testutil::TempDir tmp("pipe_w");
    const auto corpus = testutil::make_word_corpus(testutil::dejavu_sans(), 3, 303);
    const auto written = testutil::write_corpus(corpus, tmp.path().string());

    const Encoder enc = Encoder::make(EncoderSpec{});
    auto char_built = build_index(enc, testutil::single_char_labels("abcdefghijklmnopqrstuvwxyz"),
                                  {testutil::dejavu_sans()}, 32);
    const std::string char_path = tmp.file("chars.efxi");
    char_built.index.save(char_path);
    const ExemplarIndex word_index =
        testutil::build_word_region_index(corpus.vocab, testutil::dejavu_sans(), enc, 32);
    const std::string word_path = tmp.file("words.efxi");
    word_index.save(word_path);

    PipelineConfig cfg;
    cfg.line_detector.kind = DetectorKind::GroundTruth;
    cfg.line_detector.annotation_path = written.coco_path;
    cfg.localizer = cfg.line_detector;
    cfg.recognition.char_index_path = char_path;
    cfg.recognition.word_index_path = word_path;
    cfg.recognition.insert_spaces = true;

    for (float tau : {0.82f, 1.01f}) {
        cfg.recognition.word_fallback_threshold = tau;
        const Engine engine(cfg);
        const auto results = engine.infer(written.images);
        for (size_t i = 0; i < results.size(); ++i) {
            ASSERT_EQ(results[i].status, JobStatus::Ok) << results[i].failure_reason;
            EXPECT_EQ(results[i].transcription.full_text, corpus.gold_texts[i])
                << "tau " << tau;
            for (const auto& line : results[i].transcription.lines)
                for (const auto& token : line.tokens)
                    EXPECT_EQ(token.source, tau > 1.0f ? TokenSource::CharFallback
                                                       : TokenSource::WordMatch);
        }
    }
}

TEST(Pipeline, EmptyInputGivesEmptyOutput) {
    testutil::TempDir tmp("pipe_empty");
    const auto corpus = testutil::make_char_corpus(testutil::dejavu_sans(), kSafeCharset, 1,
                                                   Orientation::Horizontal, 404);
    const auto written = testutil::write_corpus(corpus, tmp.path().string());
    const std::string index_path = save_char_index(tmp.path().string(), kSafeCharset);
    const Engine engine(
        char_pipeline(written.coco_path, index_path, Orientation::Horizontal));
    EXPECT_TRUE(engine.infer({}).empty());
}

TEST(Pipeline, CorruptImageFailsAloneAndPreservesOrder) {
    testutil::TempDir tmp("pipe_fail");
    const auto corpus = testutil::make_char_corpus(testutil::dejavu_sans(), kSafeCharset, 2,
                                                   Orientation::Horizontal, 505);
    const auto written = testutil::write_corpus(corpus, tmp.path().string());
    const std::string index_path = save_char_index(tmp.path().string(), kSafeCharset);
    const Engine engine(
        char_pipeline(written.coco_path, index_path, Orientation::Horizontal));

    const std::string corrupt = tmp.file("corrupt.png");
    testutil::write_file(corrupt, "not a png");
    std::vector<std::pair<std::string, std::string>> images = {
        written.images[0], {"broken", corrupt}, written.images[1]};
    const auto results = engine.infer(images);
    ASSERT_EQ(results.size(), 3u);
    EXPECT_EQ(results[0].status, JobStatus::Ok);
    EXPECT_EQ(results[1].status, JobStatus::Failed);
    EXPECT_FALSE(results[1].failure_reason.empty());
    EXPECT_EQ(results[2].status, JobStatus::Ok);
    EXPECT_EQ(results[0].image_id, written.images[0].first);
    EXPECT_EQ(results[1].image_id, "broken");
    EXPECT_EQ(results[2].image_id, written.images[1].first);
}

TEST(Pipeline, WorkerCountDoesNotChangeResults) {
    testutil::TempDir tmp("pipe_workers");
    const auto corpus = testutil::make_char_corpus(testutil::dejavu_sans(), kSafeCharset, 8,
                                                   Orientation::Horizontal, 606);
    const auto written = testutil::write_corpus(corpus, tmp.path().string());
    const std::string index_path = save_char_index(tmp.path().string(), kSafeCharset);

    PipelineConfig cfg1 =
        char_pipeline(written.coco_path, index_path, Orientation::Horizontal, 1);
    PipelineConfig cfg4 =
        char_pipeline(written.coco_path, index_path, Orientation::Horizontal, 4);
    cfg4.queue_capacity = 2;
    const auto r1 = Engine(cfg1).infer(written.images);
    const auto r4 = Engine(cfg4).infer(written.images);
    ASSERT_EQ(r1.size(), r4.size());
    for (size_t i = 0; i < r1.size(); ++i) {
        EXPECT_EQ(r1[i].image_id, r4[i].image_id);
        EXPECT_EQ(r1[i].status, r4[i].status);
        EXPECT_EQ(r1[i].transcription.full_text, r4[i].transcription.full_text);
        ASSERT_EQ(r1[i].transcription.lines.size(), r4[i].transcription.lines.size());
        for (size_t l = 0; l < r1[i].transcription.lines.size(); ++l) {
            EXPECT_EQ(r1[i].transcription.lines[l].bbox, r4[i].transcription.lines[l].bbox);
            EXPECT_EQ(r1[i].transcription.lines[l].text, r4[i].transcription.lines[l].text);
        }
    }
}

TEST(Pipeline, FingerprintMismatchAtConstruction) {
    testutil::TempDir tmp("pipe_fp");
    const auto corpus = testutil::make_char_corpus(testutil::dejavu_sans(), kSafeCharset, 1,
                                                   Orientation::Horizontal, 707);
    const auto written = testutil::write_corpus(corpus, tmp.path().string());

    EncoderSpec other;
    other.mean = 0.25f; // different fingerprint, same dims
    const Encoder other_enc = Encoder::make(other);
    auto built = build_index(other_enc, testutil::single_char_labels(kSafeCharset),
                             {testutil::dejavu_sans()}, 32);
    const std::string index_path = tmp.file("other.efxi");
    built.index.save(index_path);

    const PipelineConfig cfg =
        char_pipeline(written.coco_path, index_path, Orientation::Horizontal);
    EXPECT_THROW(Engine{cfg}, FingerprintMismatch);
}

TEST(Pipeline, InvalidConfigIsBatchLevelError) {
    PipelineConfig cfg; // missing everything
    EXPECT_THROW(infer({{"a", "a.png"}}, cfg), ConfigError);
}

TEST(EvalRun, CerZeroOnSyntheticCorpus) {
    testutil::TempDir tmp("eval_run");
    const auto corpus = testutil::make_char_corpus(testutil::dejavu_sans(), kSafeCharset, 4,
                                                   Orientation::Horizontal, 808);
    const auto written = testutil::write_corpus(corpus, tmp.path().string());
    const std::string index_path = save_char_index(tmp.path().string(), kSafeCharset);

    // detectors pull annotations from the manifest's coco_path entries
    PipelineConfig cfg = char_pipeline("", index_path, Orientation::Horizontal);
    cfg.line_detector.annotation_path.clear();
    cfg.localizer.annotation_path.clear();

    const std::string out_dir = tmp.file("out");
    const EvalRunResult run = eval_run(written.manifest_path, cfg, out_dir);
    EXPECT_DOUBLE_EQ(run.report.cer, 0.0);
    EXPECT_DOUBLE_EQ(run.report.wer, 0.0);
    EXPECT_EQ(run.report.failed_records, 0);
    EXPECT_EQ(run.report.scored_records, 4);
    EXPECT_TRUE(std::filesystem::exists(run.report_path));
    EXPECT_TRUE(std::filesystem::exists(run.records_path));

    const std::string tsv = testutil::read_file(run.records_path);
    EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 5); // header + 4 records
}

TEST(EvalRun, MissingImageIsManifestError) {
    testutil::TempDir tmp("eval_missing");
    const std::string manifest = tmp.file("m.json");
    testutil::write_file(manifest, R"([
      {"image_id": "ghost", "image_path": ")" + tmp.file("ghost.png") + R"(", "gold_text": "x"}
    ])");
    PipelineConfig cfg = char_pipeline("gt.json", "idx.efxi", Orientation::Horizontal);
    try {
        eval_run(manifest, cfg);
        FAIL() << "expected ManifestError";
    } catch (const ManifestError& e) {
        EXPECT_NE(std::string(e.what()).find("ghost.png"), std::string::npos);
    }
}

TEST(EvalRun, FailedImageExcludedButReported) {
    testutil::TempDir tmp("eval_fail");
    const auto corpus = testutil::make_char_corpus(testutil::dejavu_sans(), kSafeCharset, 2,
                                                   Orientation::Horizontal, 909);
    const auto written = testutil::write_corpus(corpus, tmp.path().string());
    const std::string index_path = save_char_index(tmp.path().string(), kSafeCharset);

    // a manifest entry pointing at a non-image file: exists, fails at read time
    const std::string junk = tmp.file("junk.png");
    testutil::write_file(junk, "zzzz");
    nlohmann::json manifest = nlohmann::json::array();
    for (size_t i = 0; i < written.images.size(); ++i)
        manifest.push_back({{"image_id", written.images[i].first},
                            {"image_path", written.images[i].second},
                            {"gold_text", corpus.gold_texts[i]},
                            {"coco_path", written.coco_path}});
    manifest.push_back({{"image_id", "junk"},
                        {"image_path", junk},
                        {"gold_text", "irrelevant"},
                        {"coco_path", written.coco_path}});
    const std::string manifest_path = tmp.file("m.json");
    testutil::write_file(manifest_path, manifest.dump());

    PipelineConfig cfg = char_pipeline(written.coco_path, index_path, Orientation::Horizontal);
    const EvalRunResult run = eval_run(manifest_path, cfg, tmp.file("out"));
    EXPECT_EQ(run.report.failed_records, 1);
    EXPECT_EQ(run.report.scored_records, 2);
    EXPECT_DOUBLE_EQ(run.report.cer, 0.0);
}
