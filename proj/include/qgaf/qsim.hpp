#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "qgaf/errors.hpp"
#include "qgaf/rng.hpp"

namespace qgaf {

// Single-qubit state reachable by Ry rotations from |0>. Ry keeps the
// amplitudes real, so no complex arithmetic is needed.
struct QubitState {
    double amp0 = 1.0;
    double amp1 = 0.0;
};

// Ry(theta) = [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]].
inline QubitState ry_apply(const QubitState& state, double theta) {
    if (!std::isfinite(theta)) throw ValidationError("Ry angle must be finite");
    const double c = std::cos(theta / 2.0);
    const double s = std::sin(theta / 2.0);
    return QubitState{c * state.amp0 - s * state.amp1, s * state.amp0 + c * state.amp1};
}

inline double prob_zero(const QubitState& state) {
    return std::clamp(state.amp0 * state.amp0, 0.0, 1.0);
}

inline double prob_one(const QubitState& state) {
    return std::clamp(state.amp1 * state.amp1, 0.0, 1.0);
}

struct ShotCounts {
    std::uint64_t zeros = 0;
    std::uint64_t ones = 0;
    std::uint64_t shots = 0;
};

// Pixel coordinates identifying one measurement stream within a run.
struct StreamCoords {
    std::uint64_t window_id = 0;
    std::uint32_t i = 0;
    std::uint32_t j = 0;
};

// Reproducibility contract: the same (global_seed, window_id, i, j) always
// yields the same sample sequence, independent of evaluation order.
struct RngSeed {
    std::uint64_t global_seed = 0;
    StreamCoords coords;

    std::uint64_t stream_state() const {
        std::uint64_t h = mix64(global_seed ^ 0x51a7e5eedULL);
        h = hash_combine(h, coords.window_id);
        h = hash_combine(h, coords.i);
        h = hash_combine(h, coords.j);
        return h;
    }
};

// Measure `shots` times: zeros ~ Binomial(shots, prob_zero(state)), drawn
// from the seeded stream in a single draw.
inline ShotCounts sample_shots(const QubitState& state, std::uint64_t shots, const RngSeed& seed) {
    if (shots == 0) throw ValidationError("shots must be >= 1");
    RngStream stream(seed.stream_state());
    const double p = prob_zero(state);
    const std::uint64_t zeros = binomial_draw(shots, p, stream.next_unit());
    return ShotCounts{zeros, shots - zeros, shots};
}

}  // namespace qgaf
