#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "effocr/errors.hpp"

namespace testutil {

/// Known locations for a TrueType test font with full alphanumeric coverage.
inline std::string dejavu_sans() {
    static const char* candidates[] = {
        "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
        "/usr/local/lib/python3.10/dist-packages/matplotlib/mpl-data/fonts/ttf/DejaVuSans.ttf",
    };
    for (const char* c : candidates)
        if (std::filesystem::exists(c)) return c;
    throw effocr::Error("test font DejaVuSans.ttf not found");
}

inline std::string dejavu_serif() {
    static const char* candidates[] = {
        "/usr/share/fonts/truetype/dejavu/DejaVuSerif.ttf",
        "/usr/local/lib/python3.10/dist-packages/matplotlib/mpl-data/fonts/ttf/DejaVuSerif.ttf",
    };
    for (const char* c : candidates)
        if (std::filesystem::exists(c)) return c;
    throw effocr::Error("test font DejaVuSerif.ttf not found");
}

/// Unique scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<uint64_t> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("effocr_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline const std::string kAlnum62 =
    "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";

inline std::vector<std::string> single_char_labels(const std::string& charset) {
    std::vector<std::string> labels;
    for (char c : charset) labels.push_back(std::string(1, c));
    return labels;
}

} // namespace testutil
