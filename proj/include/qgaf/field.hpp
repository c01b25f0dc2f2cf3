#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "qgaf/errors.hpp"

namespace qgaf {

enum class FieldKind { GASF, GADF, QGASF, QGADF };

inline const char* to_string(FieldKind k) {
    switch (k) {
        case FieldKind::GASF: return "GASF";
        case FieldKind::GADF: return "GADF";
        case FieldKind::QGASF: return "QGASF";
        case FieldKind::QGADF: return "QGADF";
    }
    return "?";
}

inline FieldKind field_kind_from_string(std::string_view s) {
    if (s == "GASF" || s == "gasf") return FieldKind::GASF;
    if (s == "GADF" || s == "gadf") return FieldKind::GADF;
    if (s == "QGASF" || s == "qgasf") return FieldKind::QGASF;
    if (s == "QGADF" || s == "qgadf") return FieldKind::QGADF;
    throw ConfigError("unknown encoder kind: " + std::string(s));
}

inline bool is_quantum(FieldKind k) {
    return k == FieldKind::QGASF || k == FieldKind::QGADF;
}

// Square n x n matrix of angular correlations, row-major.
struct AngularField {
    FieldKind kind = FieldKind::GASF;
    std::size_t n = 0;
    std::vector<double> values;
    std::uint64_t source_window_start = 0;

    AngularField() = default;
    AngularField(FieldKind k, std::size_t size, std::uint64_t window_start = 0)
        : kind(k), n(size), values(size * size, 0.0), source_window_start(window_start) {}

    double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

}  // namespace qgaf
