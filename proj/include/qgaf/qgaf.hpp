#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>

#include "qgaf/errors.hpp"
#include "qgaf/field.hpp"
#include "qgaf/qsim.hpp"

namespace qgaf {

// Sign recovery for cos(a+b) = +-sqrt(p) and sin(a-b) = +-sqrt(p').
// analytic resolves the sign classically from the raw angles and refuses
// inputs where the measurement alone cannot determine it; positive always
// takes the + branch.
enum class SignMode { analytic, positive };

inline const char* to_string(SignMode m) {
    return m == SignMode::analytic ? "analytic" : "positive";
}

inline SignMode sign_mode_from_string(std::string_view s) {
    if (s == "analytic") return SignMode::analytic;
    if (s == "positive") return SignMode::positive;
    throw ConfigError("unknown sign mode: " + std::string(s));
}

struct QgafConfig {
    std::uint64_t shots = 1024;
    SignMode sign_mode = SignMode::analytic;
    std::uint64_t global_seed = 0;
    // Testing oracle: replace sampled probabilities with their analytic
    // values (the infinite-shot limit).
    bool exact_p = false;

    void validate() const {
        if (shots == 0) throw ValidationError("shots must be >= 1");
    }
};

inline QgafConfig exact_p_mode(QgafConfig cfg) {
    cfg.exact_p = true;
    return cfg;
}

// Estimate cos(a+b) from the circuit |0> -> Ry(2a) -> Ry(2b) -> measure.
// Raw returns are used directly as angles: no normalization, no arccos.
inline double qgasf_pixel(double a, double b, const QgafConfig& cfg, StreamCoords coords) {
    cfg.validate();
    if (cfg.sign_mode == SignMode::analytic &&
        std::abs(a + b) >= std::numbers::pi / 2.0) {
        throw DomainError("analytic sign recovery needs |a + b| < pi/2, got a + b = " +
                          std::to_string(a + b));
    }
    const QubitState state = ry_apply(ry_apply(QubitState{}, 2.0 * a), 2.0 * b);
    const double p_hat = cfg.exact_p
                             ? prob_zero(state)
                             : static_cast<double>(sample_shots(state, cfg.shots,
                                                                RngSeed{cfg.global_seed, coords})
                                                       .zeros) /
                                   static_cast<double>(cfg.shots);
    // |a + b| < pi/2 makes cos(a+b) positive, so both modes take +sqrt.
    return std::sqrt(p_hat);
}

// Estimate sin(a-b) from the circuit |0> -> Ry(2a) -> Ry(-2b) -> measure;
// the |1> probability carries the value.
inline double qgadf_pixel(double a, double b, const QgafConfig& cfg, StreamCoords coords) {
    cfg.validate();
    if (cfg.sign_mode == SignMode::analytic &&
        std::abs(a - b) >= std::numbers::pi / 2.0) {
        throw DomainError("analytic sign recovery needs |a - b| < pi/2, got a - b = " +
                          std::to_string(a - b));
    }
    const QubitState state = ry_apply(ry_apply(QubitState{}, 2.0 * a), -2.0 * b);
    double p_hat;
    if (cfg.exact_p) {
        p_hat = prob_one(state);
    } else {
        const ShotCounts counts = sample_shots(state, cfg.shots, RngSeed{cfg.global_seed, coords});
        p_hat = static_cast<double>(counts.ones) / static_cast<double>(cfg.shots);
    }
    const double magnitude = std::sqrt(p_hat);
    if (cfg.sign_mode == SignMode::positive) return magnitude;
    // |a - b| < pi/2 makes sign(sin(a-b)) = sign(a-b).
    if (a > b) return magnitude;
    if (a < b) return -magnitude;
    return 0.0;
}

namespace detail {

template <typename PixelFn>
AngularField qgaf_image(std::span<const double> window, const QgafConfig& cfg,
                        std::uint64_t window_id, FieldKind kind, PixelFn&& pixel) {
    cfg.validate();
    const std::size_t n = window.size();
    if (n < 2) throw ValidationError("quantum encoding needs a window of length >= 2");
    AngularField field(kind, n, window_id);
    // Every pixel is an independent circuit run, diagonal and both
    // triangles included; no mirroring.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const StreamCoords coords{window_id, static_cast<std::uint32_t>(i),
                                      static_cast<std::uint32_t>(j)};
            try {
                field.at(i, j) = pixel(window[i], window[j], cfg, coords);
            } catch (const DomainError& e) {
                throw DomainError("pixel (" + std::to_string(i) + ", " + std::to_string(j) +
                                  "): " + e.what());
            }
        }
    }
    return field;
}

}  // namespace detail

inline AngularField qgasf_image(std::span<const double> window, const QgafConfig& cfg,
                                std::uint64_t window_id) {
    return detail::qgaf_image(window, cfg, window_id, FieldKind::QGASF,
                              [](double a, double b, const QgafConfig& c, StreamCoords coords) {
                                  return qgasf_pixel(a, b, c, coords);
                              });
}

inline AngularField qgadf_image(std::span<const double> window, const QgafConfig& cfg,
                                std::uint64_t window_id) {
    return detail::qgaf_image(window, cfg, window_id, FieldKind::QGADF,
                              [](double a, double b, const QgafConfig& c, StreamCoords coords) {
                                  return qgadf_pixel(a, b, c, coords);
                              });
}

}  // namespace qgaf
