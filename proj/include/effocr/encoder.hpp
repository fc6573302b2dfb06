#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "effocr/errors.hpp"
#include "effocr/image.hpp"
#include "effocr/onnx.hpp"

namespace effocr {

/// Unit-norm float vector. Degenerate inputs map to e0 = (1,0,...,0).
struct Embedding {
    std::vector<float> values;

    int dim() const { return static_cast<int>(values.size()); }

    float norm() const {
        double s = 0.0;
        for (float v : values) s += static_cast<double>(v) * v;
        return static_cast<float>(std::sqrt(s));
    }

    bool operator==(const Embedding& o) const = default;
};

/// Cosine similarity of two unit vectors is their dot product.
inline float dot(const Embedding& a, const Embedding& b) {
    float s = 0.0f;
    for (size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
    return s;
}

enum class EncoderKind { Stub, ModelFile };

constexpr int kStubInputSize = 16;
constexpr int kStubDim = kStubInputSize * kStubInputSize;

struct EncoderSpec {
    EncoderKind kind = EncoderKind::Stub;
    int input_h = kStubInputSize;
    int input_w = kStubInputSize;
    float mean = 0.0f;
    float std_dev = 1.0f;
    std::string model_path;
    int dim = kStubDim;
};

inline void validate_encoder_spec(const EncoderSpec& spec) {
    if (spec.dim <= 0) throw ConfigError("encoder: dim must be > 0");
    if (spec.input_h <= 0 || spec.input_w <= 0)
        throw ConfigError("encoder: input_size must be positive");
    if (spec.std_dev == 0.0f) throw ConfigError("encoder: std must be nonzero");
    if (spec.kind == EncoderKind::ModelFile && spec.model_path.empty())
        throw ConfigError("encoder: model_path required for model_file encoders");
    if (spec.kind == EncoderKind::Stub && !spec.model_path.empty())
        throw ConfigError("encoder: model_path must be absent for stub encoders");
    if (spec.kind == EncoderKind::Stub &&
        (spec.input_h != kStubInputSize || spec.input_w != kStubInputSize || spec.dim != kStubDim))
        throw ConfigError("encoder: stub encoder is fixed to 16x16 input, dim 256");
}

namespace detail {

inline uint64_t fnv1a64(const void* data, size_t size, uint64_t seed = 0xcbf29ce484222325ULL) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelLoadError("cannot open model file: " + path);
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
        if (in.eof()) break;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    for (int i = 15; i >= 0; --i) os << ((v >> (i * 4)) & 0xF);
    return os.str();
}

} // namespace detail

/// Hash of everything that affects embedding values. Stored in indexes so
/// querying with a different encoder than built the index is a hard error.
inline std::string encoder_fingerprint(const EncoderSpec& spec) {
    std::ostringstream os;
    os << (spec.kind == EncoderKind::Stub ? "stub" : "model_file") << ';' << spec.input_h << 'x'
       << spec.input_w << ";mean=" << spec.mean << ";std=" << spec.std_dev << ";dim=" << spec.dim;
    if (spec.kind == EncoderKind::ModelFile)
        os << ";model=" << detail::hex64(detail::hash_file(spec.model_path));
    const std::string canonical = os.str();
    return detail::hex64(detail::fnv1a64(canonical.data(), canonical.size()));
}

/// Pad to square with white, bilinear-resize to the spec input size, then
/// apply (pixel - mean) / std.
inline ImageCrop preprocess(const ImageCrop& src, const EncoderSpec& spec) {
    ImageCrop out = resize_bilinear(pad_to_square(src, 1.0f), spec.input_w, spec.input_h);
    const float inv = 1.0f / spec.std_dev;
    for (float& v : out.pixels) v = (v - spec.mean) * inv;
    return out;
}

/// Maps image crops to unit-norm embeddings. Immutable after construction;
/// embed calls are pure and safe to run concurrently.
class Encoder {
public:
    static Encoder make(const EncoderSpec& spec) {
        validate_encoder_spec(spec);
        Encoder enc;
        enc.spec_ = spec;
        if (spec.kind == EncoderKind::ModelFile)
            enc.model_ = std::make_shared<onnx::Model>(onnx::Model::load(spec.model_path));
        enc.fingerprint_ = encoder_fingerprint(spec);
        return enc;
    }

    const EncoderSpec& spec() const { return spec_; }
    const std::string& fingerprint() const { return fingerprint_; }
    int dim() const { return spec_.dim; }

    Embedding embed(const ImageCrop& crop) const {
        const ImageCrop pre = preprocess(crop, spec_);
        if (spec_.kind == EncoderKind::Stub) return embed_stub(pre);
        return embed_model(pre);
    }

    std::vector<Embedding> embed_batch(const std::vector<ImageCrop>& crops) const {
        std::vector<Embedding> out;
        out.reserve(crops.size());
        for (const auto& c : crops) out.push_back(embed(c));
        return out;
    }

private:
    EncoderSpec spec_;
    std::string fingerprint_;
    std::shared_ptr<const onnx::Model> model_;

    static Embedding unit_or_e0(std::vector<float> v) {
        double s = 0.0;
        for (float x : v) s += static_cast<double>(x) * x;
        const double norm = std::sqrt(s);
        if (norm < 1e-8) {
            std::vector<float> e0(v.size(), 0.0f);
            e0[0] = 1.0f;
            return Embedding{std::move(e0)};
        }
        const float inv = static_cast<float>(1.0 / norm);
        for (float& x : v) x *= inv;
        return Embedding{std::move(v)};
    }

    // Flatten, center on the crop's own mean, L2-normalize. Deterministic and
    // translation-sensitive; used for all property tests.
    static Embedding embed_stub(const ImageCrop& pre) {
        std::vector<float> v(pre.pixels.begin(), pre.pixels.end());
        double mean = 0.0;
        for (float x : v) mean += x;
        mean /= static_cast<double>(v.size());
        for (float& x : v) x = static_cast<float>(x - mean);
        return unit_or_e0(std::move(v));
    }

    Embedding embed_model(const ImageCrop& pre) const {
        onnx::Tensor input;
        input.dims = {1, 1, pre.height, pre.width};
        input.floats = pre.pixels;
        const onnx::Tensor out = model_->run(input);
        if (out.numel() != static_cast<size_t>(spec_.dim))
            throw ShapeMismatch("encoder: model produced " + std::to_string(out.numel()) +
                                " values, spec.dim is " + std::to_string(spec_.dim));
        return unit_or_e0(out.floats);
    }
};

} // namespace effocr
