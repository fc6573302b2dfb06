#pragma once

#include <stdexcept>
#include <string>

namespace effocr {

/// Base class for all engine errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Geometry
class DegenerateBox : public Error {
public:
    explicit DegenerateBox(const std::string& msg) : Error(msg) {}
};

// Encoders / models
class ModelLoadError : public Error {
public:
    explicit ModelLoadError(const std::string& msg) : Error(msg) {}
};
class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

// Fonts
class FontLoadError : public Error {
public:
    explicit FontLoadError(const std::string& msg) : Error(msg) {}
};
class MissingGlyph : public Error {
public:
    MissingGlyph(const std::string& msg, char32_t cp) : Error(msg), codepoint(cp) {}
    char32_t codepoint;
};

// Exemplar index
class EmptyIndex : public Error {
public:
    explicit EmptyIndex(const std::string& msg) : Error(msg) {}
};
class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};
class CorruptIndex : public Error {
public:
    explicit CorruptIndex(const std::string& msg) : Error(msg) {}
};
class VersionMismatch : public Error {
public:
    explicit VersionMismatch(const std::string& msg) : Error(msg) {}
};
class FingerprintMismatch : public Error {
public:
    explicit FingerprintMismatch(const std::string& msg) : Error(msg) {}
};

// Detection
class MissingAnnotation : public Error {
public:
    explicit MissingAnnotation(const std::string& msg) : Error(msg) {}
};

// COCO / config / manifests
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& msg) : Error(msg) {}
};
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};
class ManifestError : public Error {
public:
    explicit ManifestError(const std::string& msg) : Error(msg) {}
};

// Evaluation
class AllGoldEmpty : public Error {
public:
    explicit AllGoldEmpty(const std::string& msg) : Error(msg) {}
};

// Filesystem
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace effocr
