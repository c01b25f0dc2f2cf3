#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "qgaf/errors.hpp"

namespace qgaf {

// splitmix64 finalizer. Full-avalanche mix of a 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return mix64(h + 0x9e3779b97f4a7c15ULL + v);
}

// FNV-1a over a byte span. Used for config hashes and window digests.
constexpr std::uint64_t fnv1a(const unsigned char* bytes, std::size_t len,
                              std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic counter-based stream (splitmix64). Distinct seeds give
// statistically independent streams; output for a given seed never depends
// on what other streams were drawn.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        return mix64(z);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t next_below(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    template <typename T>
    void shuffle(T& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// One binomial draw by inversion, walking outward from the mode. Exact up to
// floating-point accumulation, needs a single uniform, and costs O(sigma)
// steps for central outcomes instead of O(n) Bernoulli trials.
inline std::uint64_t binomial_draw(std::uint64_t n, double p, double u) {
    if (!(p > 0.0)) return 0;
    if (p >= 1.0) return n;
    if (n == 0) return 0;

    const double q = 1.0 - p;
    const double nd = static_cast<double>(n);
    auto mode = static_cast<std::uint64_t>(std::floor((nd + 1.0) * p));
    if (mode > n) mode = n;

    const double md = static_cast<double>(mode);
    const double log_pm = std::lgamma(nd + 1.0) - std::lgamma(md + 1.0) -
                          std::lgamma(nd - md + 1.0) + md * std::log(p) +
                          (nd - md) * std::log(q);
    const double pm = std::exp(log_pm);

    double acc = pm;
    if (u < acc) return mode;

    // pmf ratios: stepping down multiplies by (k+1)q / ((n-k)p),
    // stepping up multiplies by (n-k+1)p / (kq).
    double p_lo = pm;
    double p_hi = pm;
    std::int64_t k_lo = static_cast<std::int64_t>(mode) - 1;
    std::int64_t k_hi = static_cast<std::int64_t>(mode) + 1;
    const auto nn = static_cast<std::int64_t>(n);

    while (k_lo >= 0 || k_hi <= nn) {
        if (k_lo >= 0) {
            p_lo *= (static_cast<double>(k_lo + 1) * q) /
                    (static_cast<double>(nn - k_lo) * p);
            acc += p_lo;
            if (u < acc) return static_cast<std::uint64_t>(k_lo);
            --k_lo;
        }
        if (k_hi <= nn) {
            p_hi *= (static_cast<double>(nn - k_hi + 1) * p) /
                    (static_cast<double>(k_hi) * q);
            acc += p_hi;
            if (u < acc) return static_cast<std::uint64_t>(k_hi);
            ++k_hi;
        }
    }
    // u fell into the residual mass lost to rounding; the mode is the
    // least-wrong answer.
    return mode;
}

}  // namespace qgaf
