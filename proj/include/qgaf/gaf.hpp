#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "qgaf/errors.hpp"
#include "qgaf/field.hpp"

namespace qgaf {

enum class RangeTag { unit, sym };  // [0,1] or [-1,1]

inline const char* to_string(RangeTag t) { return t == RangeTag::unit ? "unit" : "sym"; }

inline RangeTag range_tag_from_string(std::string_view s) {
    if (s == "unit") return RangeTag::unit;
    if (s == "sym") return RangeTag::sym;
    throw ConfigError("unknown normalization range: " + std::string(s));
}

struct NormalizedSeries {
    std::vector<double> values;
    RangeTag range_tag = RangeTag::sym;
};

// Polar form of a normalized window: phi = arccos(x~), r = t/N with 1-based
// t. The radius plays no role in GASF/GADF; it exists for polar plots.
struct PolarSeries {
    std::vector<double> phi;
    std::vector<double> r;
};

namespace detail {

inline void check_window(std::span<const double> x, double& min, double& max) {
    if (x.size() < 2) throw ValidationError("normalization needs a window of length >= 2");
    min = x[0];
    max = x[0];
    for (double v : x) {
        if (!std::isfinite(v)) throw ValidationError("non-finite window value");
        min = std::min(min, v);
        max = std::max(max, v);
    }
    if (max == min) {
        throw DegenerateWindowError("constant window cannot be normalized");
    }
}

constexpr double kArccosSlack = 1e-12;

inline double clamped_for_arccos(double v) {
    if (v > 1.0 + kArccosSlack || v < -1.0 - kArccosSlack) {
        throw DomainError("value " + std::to_string(v) + " outside arccos domain [-1, 1]");
    }
    return std::clamp(v, -1.0, 1.0);
}

}  // namespace detail

// x~ = (x - min) / (max - min), range [0, 1].
inline NormalizedSeries normalize_unit(std::span<const double> x) {
    double min = 0.0, max = 0.0;
    detail::check_window(x, min, max);
    NormalizedSeries out;
    out.range_tag = RangeTag::unit;
    out.values.reserve(x.size());
    for (double v : x) out.values.push_back((v - min) / (max - min));
    return out;
}

// x~ = ((x - max) + (x - min)) / (max - min), range [-1, 1].
inline NormalizedSeries normalize_sym(std::span<const double> x) {
    double min = 0.0, max = 0.0;
    detail::check_window(x, min, max);
    NormalizedSeries out;
    out.range_tag = RangeTag::sym;
    out.values.reserve(x.size());
    for (double v : x) out.values.push_back(((v - max) + (v - min)) / (max - min));
    return out;
}

inline NormalizedSeries normalize(std::span<const double> x, RangeTag tag) {
    return tag == RangeTag::unit ? normalize_unit(x) : normalize_sym(x);
}

inline PolarSeries to_polar(const NormalizedSeries& ns) {
    PolarSeries out;
    const std::size_t n = ns.values.size();
    out.phi.reserve(n);
    out.r.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.phi.push_back(std::acos(detail::clamped_for_arccos(ns.values[i])));
        out.r.push_back(static_cast<double>(i + 1) / static_cast<double>(n));
    }
    return out;
}

// GASF[i][j] = cos(phi_i + phi_j).
inline AngularField gasf(const NormalizedSeries& ns) {
    const PolarSeries polar = to_polar(ns);
    const std::size_t n = polar.phi.size();
    AngularField field(FieldKind::GASF, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            field.at(i, j) = std::cos(polar.phi[i] + polar.phi[j]);
        }
    }
    return field;
}

// GADF[i][j] = sin(phi_i - phi_j).
inline AngularField gadf(const NormalizedSeries& ns) {
    const PolarSeries polar = to_polar(ns);
    const std::size_t n = polar.phi.size();
    AngularField field(FieldKind::GADF, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            field.at(i, j) = std::sin(polar.phi[i] - polar.phi[j]);
        }
    }
    return field;
}

namespace detail {

// sin(phi) for phi = arccos(v): sqrt(1 - v^2), non-negative on [0, pi].
inline std::vector<double> complement_roots(const NormalizedSeries& ns) {
    std::vector<double> roots;
    roots.reserve(ns.values.size());
    for (double v : ns.values) {
        const double c = clamped_for_arccos(v);
        roots.push_back(std::sqrt(std::max(0.0, 1.0 - c * c)));
    }
    return roots;
}

}  // namespace detail

// GASF as outer products: X~'X~ - sqrt(I - X~^2)' sqrt(I - X~^2).
// Must agree with gasf() elementwise.
inline AngularField gasf_matrix(const NormalizedSeries& ns) {
    const std::vector<double> roots = detail::complement_roots(ns);
    const std::size_t n = ns.values.size();
    AngularField field(FieldKind::GASF, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = detail::clamped_for_arccos(ns.values[i]);
        for (std::size_t j = 0; j < n; ++j) {
            const double xj = detail::clamped_for_arccos(ns.values[j]);
            field.at(i, j) = std::clamp(xi * xj - roots[i] * roots[j], -1.0, 1.0);
        }
    }
    return field;
}

// GADF as outer products: sqrt(I - X~^2)' X~ - X~' sqrt(I - X~^2).
inline AngularField gadf_matrix(const NormalizedSeries& ns) {
    const std::vector<double> roots = detail::complement_roots(ns);
    const std::size_t n = ns.values.size();
    AngularField field(FieldKind::GADF, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = detail::clamped_for_arccos(ns.values[i]);
        for (std::size_t j = 0; j < n; ++j) {
            const double xj = detail::clamped_for_arccos(ns.values[j]);
            field.at(i, j) = std::clamp(roots[i] * xj - xi * roots[j], -1.0, 1.0);
        }
    }
    return field;
}

}  // namespace qgaf
