// Command-line surface over the effocr engine.
//
// Subcommands: build-index, infer, eval, visualize, hard-negatives.
// Exit codes: 0 success, 1 per-item failures present, 2 config/usage error.
// Each subcommand prints one machine-readable JSON summary line on stdout.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "effocr/effocr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> collect_fonts(const std::vector<std::string>& fonts,
                                       const std::string& font_dir) {
    std::vector<std::string> out = fonts;
    if (!font_dir.empty()) {
        if (!fs::is_directory(font_dir))
            throw effocr::ConfigError("--font-dir is not a directory: " + font_dir);
        std::vector<std::string> found;
        for (const auto& entry : fs::directory_iterator(font_dir)) {
            if (!entry.is_regular_file()) continue;
            std::string ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (ext == ".ttf" || ext == ".otf") found.push_back(entry.path().string());
        }
        std::sort(found.begin(), found.end());
        out.insert(out.end(), found.begin(), found.end());
    }
    if (out.empty()) throw effocr::ConfigError("no fonts given (--font or --font-dir)");
    return out;
}

std::vector<std::string> read_labels_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw effocr::ConfigError("cannot open labels file: " + path);
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) labels.push_back(line);
    }
    return labels;
}

json load_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw effocr::ConfigError(std::string(what) + ": cannot open file: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw effocr::ConfigError(std::string(what) + ": invalid JSON in " + path + ": " +
                                  e.what());
    }
    return root;
}

struct PipelineOverrides {
    bool vertical = false;
    bool no_words = false;
    double iou_thresh = -1.0;
    double conf_thresh = -1.0;
    int workers = 0;
};

effocr::PipelineConfig load_config_with_overrides(const std::string& path,
                                                  const PipelineOverrides& ov) {
    json root = load_json_file(path, "config");
    if (ov.vertical) {
        root["orientation"] = "vertical";
        root["no_words"] = true;
        if (root.contains("recognition") && root["recognition"].is_object())
            root["recognition"].erase("word_index");
    }
    if (ov.no_words) {
        root["no_words"] = true;
        if (root.contains("recognition") && root["recognition"].is_object())
            root["recognition"].erase("word_index");
    }
    if (ov.iou_thresh >= 0.0 && root.contains("localizer"))
        root["localizer"]["iou_thresh"] = ov.iou_thresh;
    if (ov.conf_thresh >= 0.0 && root.contains("localizer"))
        root["localizer"]["conf_thresh"] = ov.conf_thresh;
    if (ov.workers > 0) root["workers"] = ov.workers;
    return effocr::parse_pipeline_config(root, path);
}

effocr::EncoderSpec encoder_from_config(const std::string& config_path,
                                        const std::string& which) {
    if (config_path.empty()) return effocr::EncoderSpec{}; // stub
    const effocr::PipelineConfig cfg = effocr::load_pipeline_config(config_path);
    if (which == "word") return cfg.word_encoder;
    return cfg.char_encoder;
}

json collision_json(const std::vector<effocr::CollisionGroup>& groups) {
    json arr = json::array();
    for (const auto& g : groups) arr.push_back(g.labels);
    return arr;
}

int run_build_index(const std::string& out_path, const std::vector<std::string>& fonts,
                    const std::string& font_dir, const std::string& labels_file,
                    const std::string& charset, int canvas, const std::string& config_path,
                    const std::string& which_encoder) {
    std::vector<std::string> labels;
    if (!labels_file.empty()) labels = read_labels_file(labels_file);
    if (!charset.empty()) {
        for (char32_t cp : effocr::utf8_decode(charset)) {
            std::string s;
            effocr::utf8_append(s, cp);
            labels.push_back(s);
        }
    }
    if (labels.empty())
        throw effocr::ConfigError("no labels given (--labels or --charset)");
    const std::vector<std::string> font_paths = collect_fonts(fonts, font_dir);
    const effocr::Encoder encoder =
        effocr::Encoder::make(encoder_from_config(config_path, which_encoder));
    effocr::IndexBuildResult result =
        effocr::build_index(encoder, labels, font_paths, canvas);
    result.index.save(out_path);

    json summary = {{"command", "build-index"},
                    {"entries", result.index.size()},
                    {"dim", result.index.dim()},
                    {"collisions", collision_json(result.collisions)},
                    {"out", out_path}};
    std::cout << summary.dump() << "\n";
    return 0;
}

json stage_ms_json(const effocr::StageTimings& t) {
    return {{"read", t.read_ms},
            {"detect", t.detect_ms},
            {"localize", t.localize_ms},
            {"recognize", t.recognize_ms},
            {"assemble", t.assemble_ms}};
}

int run_infer(const std::string& config_path, const PipelineOverrides& ov,
              const std::vector<std::string>& image_paths, const std::string& manifest_path,
              const std::string& out_dir, const std::string& levels_csv, bool no_assembled) {
    const effocr::PipelineConfig cfg = load_config_with_overrides(config_path, ov);
    std::vector<std::pair<std::string, std::string>> images;
    for (const auto& p : image_paths) images.emplace_back(fs::path(p).stem().string(), p);
    if (!manifest_path.empty()) {
        for (const auto& rec : effocr::parse_manifest(manifest_path))
            images.emplace_back(rec.image_id, rec.image_path);
    }
    if (images.empty()) throw effocr::ConfigError("no images given (--image or --manifest)");

    effocr::ExportSelection sel;
    sel.lines = sel.words = sel.chars = false;
    std::stringstream ss(levels_csv);
    std::string level;
    while (std::getline(ss, level, ',')) {
        if (level == "line")
            sel.lines = true;
        else if (level == "word")
            sel.words = true;
        else if (level == "char")
            sel.chars = true;
        else if (!level.empty())
            throw effocr::ConfigError("unknown level \"" + level +
                                      "\" in --levels; allowed: line, word, char");
    }
    sel.assembled_text = !no_assembled;
    effocr::validate_selection(sel);

    const auto start = std::chrono::steady_clock::now();
    const effocr::Engine engine(cfg);
    const std::vector<effocr::JobResult> results = engine.infer(images);
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();

    const effocr::ExportedFiles files = effocr::export_results(results, sel, out_dir);

    effocr::StageTimings total;
    int ok = 0;
    json failed_ids = json::array();
    for (const auto& r : results) {
        total += r.timings;
        if (r.status == effocr::JobStatus::Ok)
            ++ok;
        else
            failed_ids.push_back(r.image_id);
    }
    json summary = {{"command", "infer"},
                    {"images", results.size()},
                    {"ok", ok},
                    {"failed", results.size() - ok},
                    {"failed_ids", failed_ids},
                    {"outputs", {{"coco", files.coco_paths}, {"text", files.text_paths}}},
                    {"wall_ms", wall_ms},
                    {"stage_ms", stage_ms_json(total)},
                    {"workers", cfg.workers}};
    std::cout << summary.dump() << "\n";
    return ok == static_cast<int>(results.size()) ? 0 : 1;
}

int run_eval(const std::string& config_path, const PipelineOverrides& ov,
             const std::string& manifest_path, const std::string& out_dir,
             bool ignore_whitespace) {
    const effocr::PipelineConfig cfg = load_config_with_overrides(config_path, ov);
    const effocr::EvalRunResult run =
        effocr::eval_run(manifest_path, cfg, out_dir, ignore_whitespace);
    json summary = {{"command", "eval"},
                    {"cer", run.report.cer},
                    {"wer", run.report.wer},
                    {"records", run.report.records},
                    {"scored_records", run.report.scored_records},
                    {"empty_gold_records", run.report.empty_gold_records},
                    {"failed_records", run.report.failed_records},
                    {"report", run.report_path},
                    {"records_tsv", run.records_path}};
    std::cout << summary.dump() << "\n";
    return run.report.failed_records == 0 ? 0 : 1;
}

int run_visualize(const std::string& config_path, const PipelineOverrides& ov,
                  const std::string& image_path, const std::vector<std::string>& fonts,
                  const std::string& font_dir, const std::string& out_path) {
    const effocr::PipelineConfig cfg = load_config_with_overrides(config_path, ov);
    const std::vector<std::string> font_paths = collect_fonts(fonts, font_dir);
    const auto font = effocr::load_font_cached(font_paths.front());
    const effocr::Engine engine(cfg);
    const std::string image_id = fs::path(image_path).stem().string();
    const effocr::JobResult result = engine.infer_path(image_id, image_path);
    if (result.status == effocr::JobStatus::Failed) {
        std::cerr << "effocr: inference failed: " << result.failure_reason << "\n";
        json summary = {{"command", "visualize"}, {"ok", false}, {"error", result.failure_reason}};
        std::cout << summary.dump() << "\n";
        return 1;
    }
    const effocr::ImageCrop page = effocr::load_image(image_path);
    effocr::visualize(page, result.transcription, *font, out_path);
    json summary = {{"command", "visualize"}, {"ok", true}, {"out", out_path}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_hard_negatives(const std::string& index_path, const std::string& coco_path,
                       const std::string& images_root, int k, const std::string& out_path,
                       const std::string& config_path, const std::string& which_encoder) {
    const effocr::ExemplarIndex index = effocr::ExemplarIndex::load(index_path);
    const effocr::Encoder encoder =
        effocr::Encoder::make(encoder_from_config(config_path, which_encoder));
    const effocr::CocoDocument doc = effocr::parse_coco(coco_path);

    std::vector<std::pair<effocr::ImageCrop, std::string>> labeled;
    for (const auto& img : doc.images) {
        fs::path p(img.file_name);
        if (p.is_relative() && !images_root.empty()) p = fs::path(images_root) / p;
        bool any = false;
        for (const auto& a : doc.annotations)
            if (a.image_id == img.id && a.has_text) any = true;
        if (!any) continue;
        const effocr::ImageCrop page = effocr::load_image(p.string());
        for (const auto& a : doc.annotations) {
            if (a.image_id != img.id || !a.has_text) continue;
            labeled.emplace_back(effocr::crop(page, effocr::raster(a.bbox)), a.text);
        }
    }
    if (labeled.empty())
        throw effocr::ConfigError("hard-negatives: no annotations with text in " + coco_path);

    const std::vector<effocr::HardNegative> rows =
        effocr::export_hard_negatives(labeled, index, encoder, k);
    effocr::write_hard_negatives(rows, out_path);
    json summary = {{"command", "hard-negatives"}, {"records", rows.size()}, {"out", out_path}};
    std::cout << summary.dump() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"effocr: OCR by detection-based localization and retrieval-based recognition"};
    app.require_subcommand(1);

    // build-index
    auto* build = app.add_subcommand("build-index",
                                     "Render exemplars from fonts and build a retrieval index");
    std::string bi_out, bi_font_dir, bi_labels, bi_charset, bi_config;
    std::string bi_encoder = "char";
    std::vector<std::string> bi_fonts;
    int bi_canvas = 32;
    build->add_option("--out", bi_out, "Output index file (.efxi)")->required();
    build->add_option("--font", bi_fonts, "Font file (repeatable)");
    build->add_option("--font-dir", bi_font_dir, "Directory of .ttf/.otf files");
    build->add_option("--labels", bi_labels, "Label file, one label per line");
    build->add_option("--charset", bi_charset, "Labels as a string of characters");
    build->add_option("--canvas", bi_canvas, "Exemplar canvas size in pixels")
        ->check(CLI::Range(16, 512));
    build->add_option("--config", bi_config, "Pipeline config supplying the encoder spec");
    build->add_option("--encoder", bi_encoder, "Which config encoder to use: char or word")
        ->check(CLI::IsMember({"char", "word"}));

    auto add_overrides = [](CLI::App* sub, PipelineOverrides& ov) {
        sub->add_flag("--vertical", ov.vertical,
                      "Vertical writing (right-to-left columns); implies --no-words");
        sub->add_flag("--no-words", ov.no_words, "Detect only characters, not words");
        sub->add_option("--iou-thresh", ov.iou_thresh, "Localizer NMS IoU threshold override")
            ->check(CLI::Range(0.0, 1.0));
        sub->add_option("--conf-thresh", ov.conf_thresh,
                        "Localizer confidence threshold override")
            ->check(CLI::Range(0.0, 1.0));
        sub->add_option("--workers", ov.workers, "Worker thread count override")
            ->check(CLI::PositiveNumber);
    };

    // infer
    auto* infer = app.add_subcommand("infer", "Run OCR over images and export results");
    std::string in_config, in_manifest, in_out, in_levels = "line,word,char";
    std::vector<std::string> in_images;
    bool in_no_text = false;
    PipelineOverrides in_ov;
    infer->add_option("--config", in_config, "Pipeline config JSON")->required();
    infer->add_option("--image", in_images, "Image file (repeatable)");
    infer->add_option("--manifest", in_manifest, "Manifest JSON with image_id/image_path");
    infer->add_option("--out", in_out, "Output directory")->required();
    infer->add_option("--levels", in_levels, "COCO export levels, comma-separated");
    infer->add_flag("--no-assembled-text", in_no_text, "Skip the per-image .txt export");
    add_overrides(infer, in_ov);

    // eval
    auto* eval = app.add_subcommand("eval", "Score predictions against a gold manifest");
    std::string ev_config, ev_manifest, ev_out;
    bool ev_ignore_ws = false;
    PipelineOverrides ev_ov;
    eval->add_option("--config", ev_config, "Pipeline config JSON")->required();
    eval->add_option("--manifest", ev_manifest, "Manifest JSON with gold_text")->required();
    eval->add_option("--out", ev_out, "Directory for report.json and records.tsv");
    eval->add_flag("--ignore-whitespace", ev_ignore_ws,
                   "Strip whitespace from both strings before scoring");
    add_overrides(eval, ev_ov);

    // visualize
    auto* viz = app.add_subcommand("visualize", "Render OCR output beside the original image");
    std::string vz_config, vz_image, vz_out, vz_font_dir;
    std::vector<std::string> vz_fonts;
    PipelineOverrides vz_ov;
    viz->add_option("--config", vz_config, "Pipeline config JSON")->required();
    viz->add_option("--image", vz_image, "Image file")->required();
    viz->add_option("--font", vz_fonts, "Font for the rendered text panel");
    viz->add_option("--font-dir", vz_font_dir, "Directory of fonts (first one is used)");
    viz->add_option("--out", vz_out, "Output PNG path")->required();
    add_overrides(viz, vz_ov);

    // hard-negatives
    auto* hns = app.add_subcommand(
        "hard-negatives", "Export retrieval confusions for labeled crops (gold<TAB>l1,l2,...)");
    std::string hn_index, hn_coco, hn_root, hn_out, hn_config;
    std::string hn_encoder = "char";
    int hn_k = 5;
    hns->add_option("--index", hn_index, "Exemplar index (.efxi)")->required();
    hns->add_option("--coco", hn_coco, "COCO JSON with text-labeled annotations")->required();
    hns->add_option("--images-root", hn_root, "Base directory for relative file_names");
    hns->add_option("--k", hn_k, "Neighbors to retrieve")->check(CLI::PositiveNumber);
    hns->add_option("--hns-out", hn_out, "Output text file")->required();
    hns->add_option("--config", hn_config, "Pipeline config supplying the encoder spec");
    hns->add_option("--encoder", hn_encoder, "Which config encoder to use: char or word")
        ->check(CLI::IsMember({"char", "word"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (build->parsed())
            return run_build_index(bi_out, bi_fonts, bi_font_dir, bi_labels, bi_charset,
                                   bi_canvas, bi_config, bi_encoder);
        if (infer->parsed())
            return run_infer(in_config, in_ov, in_images, in_manifest, in_out, in_levels,
                             in_no_text);
        if (eval->parsed()) return run_eval(ev_config, ev_ov, ev_manifest, ev_out, ev_ignore_ws);
        if (viz->parsed())
            return run_visualize(vz_config, vz_ov, vz_image, vz_fonts, vz_font_dir, vz_out);
        if (hns->parsed())
            return run_hard_negatives(hn_index, hn_coco, hn_root, hn_k, hn_out, hn_config,
                                      hn_encoder);
    } catch (const effocr::Error& e) {
        std::cerr << "effocr: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "effocr: unexpected error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
