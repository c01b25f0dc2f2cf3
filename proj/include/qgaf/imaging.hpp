#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qgaf/errors.hpp"
#include "qgaf/field.hpp"

namespace qgaf {

struct GrayMeta {
    FieldKind kind = FieldKind::GASF;
    std::uint64_t window_id = 0;
    double label = 0.0;
    double lo = -1.0;  // value mapped to pixel 0
    double hi = 1.0;   // value mapped to pixel 255
};

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
    GrayMeta meta;

    bool operator==(const GrayImage&) const = default;
};

inline bool operator==(const GrayMeta& a, const GrayMeta& b) {
    return a.kind == b.kind && a.window_id == b.window_id && a.label == b.label &&
           a.lo == b.lo && a.hi == b.hi;
}

// Fixed per-kind mapping ranges keep intensities comparable across windows.
// QGASF estimates are non-negative square roots, so it gets [0, 1].
inline std::pair<double, double> default_gray_range(FieldKind kind) {
    if (kind == FieldKind::QGASF) return {0.0, 1.0};
    return {-1.0, 1.0};
}

inline GrayImage field_to_gray(const AngularField& field, double lo, double hi,
                               double label = 0.0) {
    if (!(lo < hi)) throw ValidationError("gray mapping needs lo < hi");
    GrayImage img;
    img.width = field.n;
    img.height = field.n;
    img.meta = GrayMeta{field.kind, field.source_window_start, label, lo, hi};
    img.pixels.reserve(field.values.size());
    for (double v : field.values) {
        const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
        img.pixels.push_back(static_cast<std::uint8_t>(std::lround(255.0 * t)));
    }
    return img;
}

inline GrayImage field_to_gray(const AngularField& field, double label = 0.0) {
    const auto [lo, hi] = default_gray_range(field.kind);
    return field_to_gray(field, lo, hi, label);
}

namespace detail {

inline std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path) {
    return std::filesystem::path(pgm_path.string() + ".json");
}

inline void write_bytes(std::ofstream& out, const void* data, std::size_t len) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

inline void read_bytes(std::ifstream& in, void* data, std::size_t len, const char* what) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
    if (static_cast<std::size_t>(in.gcount()) != len) {
        throw FormatError(std::string("truncated file while reading ") + what);
    }
}

inline void write_u32_le(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    write_bytes(out, b, 4);
}

inline std::uint32_t read_u32_le(std::ifstream& in, const char* what) {
    unsigned char b[4];
    read_bytes(in, b, 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32_le(std::ofstream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32_le(out, bits);
}

inline float read_f32_le(std::ifstream& in, const char* what) {
    const std::uint32_t bits = read_u32_le(in, what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

// PGM header token reader: skips whitespace and # comments.
inline std::string next_pnm_token(std::ifstream& in) {
    std::string token;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    while (c != EOF && !std::isspace(c)) {
        token.push_back(static_cast<char>(c));
        c = in.get();
    }
    if (token.empty()) throw FormatError("unexpected end of PGM header");
    return token;
}

inline std::size_t parse_pnm_number(const std::string& token, const char* what) {
    std::size_t value = 0;
    for (char ch : token) {
        if (ch < '0' || ch > '9') {
            throw FormatError(std::string("bad PGM ") + what + ": '" + token + "'");
        }
        value = value * 10 + static_cast<std::size_t>(ch - '0');
    }
    return value;
}

}  // namespace detail

// Binary PGM (P5, maxval 255). Metadata goes to a sidecar JSON next to the
// image; PGM comments are lossy across tools.
inline void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const std::string header = "P5\n" + std::to_string(img.width) + " " +
                               std::to_string(img.height) + "\n255\n";
    detail::write_bytes(out, header.data(), header.size());
    detail::write_bytes(out, img.pixels.data(), img.pixels.size());
    if (!out) throw IoError("failed writing " + path.string());

    nlohmann::json meta;
    meta["kind"] = to_string(img.meta.kind);
    meta["window_id"] = img.meta.window_id;
    meta["label"] = img.meta.label;
    meta["range"] = {img.meta.lo, img.meta.hi};
    meta["width"] = img.width;
    meta["height"] = img.height;
    std::ofstream side(detail::sidecar_path(path));
    if (!side) throw IoError("cannot open sidecar for " + path.string());
    side << meta.dump(2) << "\n";
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    const std::string magic = detail::next_pnm_token(in);
    if (magic != "P5") {
        throw FormatError("unsupported PNM magic '" + magic + "' (only binary P5)");
    }
    GrayImage img;
    img.width = detail::parse_pnm_number(detail::next_pnm_token(in), "width");
    img.height = detail::parse_pnm_number(detail::next_pnm_token(in), "height");
    const std::size_t maxval = detail::parse_pnm_number(detail::next_pnm_token(in), "maxval");
    if (maxval != 255) throw FormatError("unsupported PGM maxval " + std::to_string(maxval));

    img.pixels.resize(img.width * img.height);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) {
        throw FormatError("PGM payload shorter than width*height");
    }

    const auto side_path = detail::sidecar_path(path);
    if (std::filesystem::exists(side_path)) {
        std::ifstream side(side_path);
        nlohmann::json meta = nlohmann::json::parse(side, nullptr, true);
        img.meta.kind = field_kind_from_string(meta.at("kind").get<std::string>());
        img.meta.window_id = meta.at("window_id").get<std::uint64_t>();
        img.meta.label = meta.at("label").get<double>();
        img.meta.lo = meta.at("range").at(0).get<double>();
        img.meta.hi = meta.at("range").at(1).get<double>();
    }
    return img;
}

inline constexpr char kArchiveMagic[4] = {'Q', 'G', 'A', 'F'};
inline constexpr std::uint8_t kArchiveVersion = 1;

// Archive layout: magic "QGAF", version byte, u32 LE metadata length,
// metadata JSON (UTF-8), row-major little-endian float32 matrix, little-
// endian float32 label. Training reads these, not the 8-bit images.
// `extra` lets the caller stamp provenance (config hash, seed) into the
// metadata block.
inline void write_archive(const AngularField& field, float label,
                          const std::filesystem::path& path,
                          const nlohmann::json& extra = nlohmann::json::object()) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");

    nlohmann::json meta = extra;
    meta["kind"] = to_string(field.kind);
    meta["n"] = field.n;
    meta["window_start"] = field.source_window_start;
    const std::string meta_str = meta.dump();

    detail::write_bytes(out, kArchiveMagic, 4);
    detail::write_bytes(out, &kArchiveVersion, 1);
    detail::write_u32_le(out, static_cast<std::uint32_t>(meta_str.size()));
    detail::write_bytes(out, meta_str.data(), meta_str.size());
    for (double v : field.values) detail::write_f32_le(out, static_cast<float>(v));
    detail::write_f32_le(out, label);
    if (!out) throw IoError("failed writing " + path.string());
}

// expected_n = 0 accepts any dimension.
inline std::pair<AngularField, float> read_archive(const std::filesystem::path& path,
                                                   std::size_t expected_n = 0) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    char magic[4];
    detail::read_bytes(in, magic, 4, "magic");
    if (std::memcmp(magic, kArchiveMagic, 4) != 0) {
        throw FormatError(path.string() + ": bad archive magic");
    }
    std::uint8_t version = 0;
    detail::read_bytes(in, &version, 1, "version");
    if (version != kArchiveVersion) {
        throw FormatError(path.string() + ": unsupported archive version " +
                          std::to_string(version));
    }
    const std::uint32_t meta_len = detail::read_u32_le(in, "metadata length");
    std::string meta_str(meta_len, '\0');
    detail::read_bytes(in, meta_str.data(), meta_len, "metadata");
    nlohmann::json meta = nlohmann::json::parse(meta_str);

    AngularField field;
    field.kind = field_kind_from_string(meta.at("kind").get<std::string>());
    field.n = meta.at("n").get<std::size_t>();
    field.source_window_start = meta.at("window_start").get<std::uint64_t>();
    if (expected_n != 0 && field.n != expected_n) {
        throw FormatError(path.string() + ": matrix is " + std::to_string(field.n) + "x" +
                          std::to_string(field.n) + ", expected " + std::to_string(expected_n));
    }
    field.values.resize(field.n * field.n);
    for (double& v : field.values) v = detail::read_f32_le(in, "matrix");
    const float label = detail::read_f32_le(in, "label");
    return {std::move(field), label};
}

}  // namespace qgaf
