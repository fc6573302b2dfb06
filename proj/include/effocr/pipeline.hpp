#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "effocr/assembly.hpp"
#include "effocr/config.hpp"
#include "effocr/detection.hpp"
#include "effocr/encoder.hpp"
#include "effocr/image_io.hpp"
#include "effocr/index.hpp"
#include "effocr/recognition.hpp"

namespace effocr {

struct StageTimings {
    double read_ms = 0.0;
    double detect_ms = 0.0;
    double localize_ms = 0.0;
    double recognize_ms = 0.0;
    double assemble_ms = 0.0;

    double total_ms() const {
        return read_ms + detect_ms + localize_ms + recognize_ms + assemble_ms;
    }
    StageTimings& operator+=(const StageTimings& o) {
        read_ms += o.read_ms;
        detect_ms += o.detect_ms;
        localize_ms += o.localize_ms;
        recognize_ms += o.recognize_ms;
        assemble_ms += o.assemble_ms;
        return *this;
    }
};

enum class JobStatus { Ok, Failed };

struct JobResult {
    std::string image_id;
    JobStatus status = JobStatus::Failed;
    std::string failure_reason;
    PageTranscription transcription;
    int image_width = 0;
    int image_height = 0;
    StageTimings timings;
};

namespace detail {

class StageClock {
public:
    StageClock() : start_(std::chrono::steady_clock::now()) {}
    double lap_ms() {
        const auto now = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
        start_ = now;
        return ms;
    }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace detail

/// Orchestrates detect -> localize -> embed -> retrieve -> assemble. Model
/// handles and indexes are constructed once and shared read-only across
/// workers; inference calls never mutate engine state.
class Engine {
public:
    explicit Engine(const PipelineConfig& cfg) : Engine(cfg, std::nullopt) {}

    /// Ground-truth detectors read from an injected COCO document instead of
    /// the spec's annotation_path (used by eval manifests).
    Engine(const PipelineConfig& cfg, std::optional<CocoDocument> ground_truth)
        : cfg_(cfg) {
        if (ground_truth) {
            if (cfg_.line_detector.kind == DetectorKind::GroundTruth &&
                cfg_.line_detector.annotation_path.empty())
                cfg_.line_detector.annotation_path = "<manifest>";
            if (cfg_.localizer.kind == DetectorKind::GroundTruth &&
                cfg_.localizer.annotation_path.empty())
                cfg_.localizer.annotation_path = "<manifest>";
        }
        validate_pipeline_config(cfg_);

        char_encoder_ = std::make_shared<Encoder>(Encoder::make(cfg_.char_encoder));
        const bool want_words = !cfg_.recognition.word_index_path.empty();
        if (want_words)
            word_encoder_ = std::make_shared<Encoder>(Encoder::make(cfg_.word_encoder));

        recognition_.word_fallback_threshold = cfg_.recognition.word_fallback_threshold;
        recognition_.insert_spaces = cfg_.recognition.insert_spaces;
        recognition_.k = cfg_.recognition.k;
        recognition_.unreadable_threshold = cfg_.recognition.unreadable_threshold;
        recognition_.char_index = std::make_shared<const ExemplarIndex>(
            ExemplarIndex::load(cfg_.recognition.char_index_path));
        recognition_.char_index->verify_fingerprint(char_encoder_->fingerprint());
        if (want_words) {
            recognition_.word_index = std::make_shared<const ExemplarIndex>(
                ExemplarIndex::load(cfg_.recognition.word_index_path));
            recognition_.word_index->verify_fingerprint(word_encoder_->fingerprint());
        }

        auto make_detector = [&](const DetectorSpec& spec) {
            if (ground_truth && spec.kind == DetectorKind::GroundTruth &&
                spec.annotation_path == "<manifest>")
                return std::make_shared<Detector>(Detector::make_ground_truth(spec, *ground_truth));
            return std::make_shared<Detector>(Detector::make(spec));
        };
        line_detector_ = make_detector(cfg_.line_detector);
        localizer_ = make_detector(cfg_.localizer);
    }

    const PipelineConfig& config() const { return cfg_; }
    const Encoder& char_encoder() const { return *char_encoder_; }
    const Encoder* word_encoder() const { return word_encoder_.get(); }
    const RecognitionConfig& recognition() const { return recognition_; }

    /// One JobResult per input, in input order, regardless of completion
    /// order. A failed image never aborts the batch. Results are identical
    /// for any worker count.
    std::vector<JobResult> infer(
        const std::vector<std::pair<std::string, std::string>>& images) const {
        std::vector<JobResult> results(images.size());
        if (images.empty()) return results;
        if (cfg_.workers == 1) {
            for (size_t i = 0; i < images.size(); ++i)
                results[i] = infer_path(images[i].first, images[i].second);
            return results;
        }

        // Bounded queue keeps peak in-flight images <= queue_capacity + workers.
        std::mutex mu;
        std::condition_variable not_full, not_empty;
        std::deque<size_t> queue;
        bool done = false;
        const size_t capacity = static_cast<size_t>(cfg_.queue_capacity);

        auto worker = [&]() {
            while (true) {
                size_t idx;
                {
                    std::unique_lock<std::mutex> lock(mu);
                    not_empty.wait(lock, [&] { return !queue.empty() || done; });
                    if (queue.empty()) return;
                    idx = queue.front();
                    queue.pop_front();
                }
                not_full.notify_one();
                results[idx] = infer_path(images[idx].first, images[idx].second);
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(cfg_.workers));
        for (int w = 0; w < cfg_.workers; ++w) pool.emplace_back(worker);
        for (size_t i = 0; i < images.size(); ++i) {
            std::unique_lock<std::mutex> lock(mu);
            not_full.wait(lock, [&] { return queue.size() < capacity; });
            queue.push_back(i);
            lock.unlock();
            not_empty.notify_one();
        }
        {
            std::lock_guard<std::mutex> lock(mu);
            done = true;
        }
        not_empty.notify_all();
        for (auto& t : pool) t.join();
        return results;
    }

    JobResult infer_path(const std::string& image_id, const std::string& path) const {
        detail::StageClock clock;
        ImageCrop page;
        try {
            page = load_image(path);
        } catch (const std::exception& e) {
            JobResult r;
            r.image_id = image_id;
            r.status = JobStatus::Failed;
            r.failure_reason = e.what();
            r.timings.read_ms = clock.lap_ms();
            return r;
        }
        const double read_ms = clock.lap_ms();
        JobResult r = infer_image(image_id, std::move(page));
        r.timings.read_ms = read_ms;
        return r;
    }

    /// Runs the pipeline on an in-memory page.
    JobResult infer_image(const std::string& image_id, ImageCrop page) const {
        JobResult r;
        r.image_id = image_id;
        r.image_width = page.width;
        r.image_height = page.height;
        try {
            CropProvenance prov;
            prov.page_id = image_id;
            page.provenance = prov;

            detail::StageClock clock;
            const std::vector<DetectedObject> lines = line_detector_->detect_lines(page);
            r.timings.detect_ms = clock.lap_ms();

            std::vector<TranscribedLine> transcribed;
            transcribed.reserve(lines.size());
            for (size_t li = 0; li < lines.size(); ++li) {
                IntRect rect = raster(lines[li].bbox);
                rect.x0 = std::max(rect.x0, 0);
                rect.y0 = std::max(rect.y0, 0);
                rect.x1 = std::min(rect.x1, page.width);
                rect.y1 = std::min(rect.y1, page.height);
                if (rect.width() <= 0 || rect.height() <= 0) continue;

                clock.lap_ms();
                ImageCrop line_crop = crop(page, rect);
                CropProvenance line_prov;
                line_prov.page_id = image_id;
                line_prov.line_index = static_cast<int>(li);
                line_prov.origin_x = rect.x0;
                line_prov.origin_y = rect.y0;
                line_crop.provenance = line_prov;

                auto [words, chars] = localizer_->localize(line_crop, cfg_.no_words);
                r.timings.localize_ms += clock.lap_ms();

                TranscribedLine tl;
                tl.bbox = lines[li].bbox;
                tl.origin_x = rect.x0;
                tl.origin_y = rect.y0;
                tl.tokens = recognize_line(line_crop, words, chars, recognition_,
                                           word_encoder_.get(), *char_encoder_,
                                           cfg_.orientation);
                r.timings.recognize_ms += clock.lap_ms();
                transcribed.push_back(std::move(tl));
            }

            detail::StageClock assemble_clock;
            r.transcription =
                assemble(std::move(transcribed), cfg_.orientation, recognition_.insert_spaces);
            r.timings.assemble_ms = assemble_clock.lap_ms();
            r.status = JobStatus::Ok;
        } catch (const std::exception& e) {
            r.status = JobStatus::Failed;
            r.failure_reason = e.what();
            r.transcription = PageTranscription{};
        }
        return r;
    }

private:
    PipelineConfig cfg_;
    std::shared_ptr<const Detector> line_detector_;
    std::shared_ptr<const Detector> localizer_;
    std::shared_ptr<const Encoder> char_encoder_;
    std::shared_ptr<const Encoder> word_encoder_;
    RecognitionConfig recognition_;
};

/// Batch entry point: builds the engine (ConfigError for invalid cfg) and
/// runs all images.
inline std::vector<JobResult> infer(const std::vector<std::pair<std::string, std::string>>& images,
                                    const PipelineConfig& cfg) {
    return Engine(cfg).infer(images);
}

} // namespace effocr
