#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "qgaf/qsim.hpp"

using namespace qgaf;
using Catch::Matchers::WithinAbs;

TEST_CASE("ry_apply implements the rotation matrix", "[qsim]") {
    SECTION("Ry(pi) maps |0> to |1>") {
        const QubitState s = ry_apply(QubitState{}, std::numbers::pi);
        REQUIRE_THAT(s.amp0, WithinAbs(0.0, 1e-12));
        REQUIRE_THAT(s.amp1, WithinAbs(1.0, 1e-12));
    }

    SECTION("Ry(2a)|0> = (cos a, sin a)") {
        const QubitState s = ry_apply(QubitState{}, 2.0 * 0.05);
        REQUIRE_THAT(s.amp0, WithinAbs(0.9987503, 1e-7));
        REQUIRE_THAT(s.amp1, WithinAbs(0.0499792, 1e-7));
        REQUIRE_THAT(s.amp0, WithinAbs(std::cos(0.05), 1e-15));
        REQUIRE_THAT(s.amp1, WithinAbs(std::sin(0.05), 1e-15));
    }

    SECTION("Ry(0) is the identity") {
        const QubitState s = ry_apply(QubitState{0.6, 0.8}, 0.0);
        REQUIRE(s.amp0 == 0.6);
        REQUIRE(s.amp1 == 0.8);
    }

    SECTION("non-finite angle rejected") {
        REQUIRE_THROWS_AS(ry_apply(QubitState{}, std::nan("")), ValidationError);
    }

    SECTION("norm is preserved along rotation chains") {
        RngStream rng(8);
        QubitState s;
        for (int step = 0; step < 200; ++step) {
            s = ry_apply(s, rng.next_range(-3.0, 3.0));
            REQUIRE_THAT(s.amp0 * s.amp0 + s.amp1 * s.amp1, WithinAbs(1.0, 1e-12));
        }
    }

    SECTION("rotations compose additively") {
        RngStream rng(9);
        for (int trial = 0; trial < 50; ++trial) {
            const double t1 = rng.next_range(-2.0, 2.0);
            const double t2 = rng.next_range(-2.0, 2.0);
            const QubitState chained = ry_apply(ry_apply(QubitState{}, t1), t2);
            const QubitState direct = ry_apply(QubitState{}, t1 + t2);
            REQUIRE_THAT(chained.amp0, WithinAbs(direct.amp0, 1e-12));
            REQUIRE_THAT(chained.amp1, WithinAbs(direct.amp1, 1e-12));
        }
    }
}

TEST_CASE("prob_zero is the squared |0> amplitude", "[qsim]") {
    REQUIRE(prob_zero(QubitState{}) == 1.0);
    REQUIRE_THAT(prob_zero(QubitState{0.6, 0.8}), WithinAbs(0.36, 1e-15));

    // Composition per the two-rotation circuit, checked against a direct
    // cosine evaluation.
    const QubitState s = ry_apply(ry_apply(QubitState{}, 2.0 * 0.05), 2.0 * 0.1);
    const double expected = std::cos(0.15) * std::cos(0.15);
    REQUIRE_THAT(prob_zero(s), WithinAbs(expected, 1e-12));
    REQUIRE_THAT(prob_zero(s), WithinAbs(0.977668, 1e-6));
}

TEST_CASE("binomial_draw partitions the unit interval by the exact pmf", "[qsim]") {
    // Enumerated-CDF oracle: each outcome k owns one contiguous interval of
    // length pmf(k), so a uniform grid of M points hits k about pmf(k)*M
    // times, off by at most the two boundary points.
    const std::uint64_t n = 6;
    const double p = 0.37;
    std::vector<double> pmf(n + 1, 0.0);
    for (std::uint64_t k = 0; k <= n; ++k) {
        double c = 1.0;
        for (std::uint64_t i = 0; i < k; ++i) {
            c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
        }
        pmf[k] = c * std::pow(p, static_cast<double>(k)) *
                 std::pow(1.0 - p, static_cast<double>(n - k));
    }
    const int m = 200000;
    std::vector<int> counts(n + 1, 0);
    for (int i = 0; i < m; ++i) {
        const double u = (static_cast<double>(i) + 0.5) / m;
        counts[binomial_draw(n, p, u)]++;
    }
    for (std::uint64_t k = 0; k <= n; ++k) {
        REQUIRE_THAT(static_cast<double>(counts[k]) / m, WithinAbs(pmf[k], 2.0 / m + 1e-12));
    }

    SECTION("degenerate probabilities") {
        REQUIRE(binomial_draw(1024, 0.0, 0.5) == 0);
        REQUIRE(binomial_draw(1024, 1.0, 0.5) == 1024);
    }

    SECTION("large n stays in range and near the mean") {
        const std::uint64_t draw = binomial_draw(65536, 0.5, 0.5);
        REQUIRE(draw <= 65536);
        REQUIRE(std::abs(static_cast<double>(draw) - 32768.0) < 1000.0);
    }
}

TEST_CASE("sample_shots is deterministic per stream", "[qsim]") {
    const QubitState s = ry_apply(ry_apply(QubitState{}, 0.1), 0.2);

    SECTION("same coordinates, same counts") {
        const RngSeed seed{42, {7, 3, 4}};
        const ShotCounts a = sample_shots(s, 1024, seed);
        const ShotCounts b = sample_shots(s, 1024, seed);
        REQUIRE(a.zeros == b.zeros);
        REQUIRE(a.zeros + a.ones == 1024);
    }

    SECTION("coordinates separate streams") {
        int distinct = 0;
        const ShotCounts base = sample_shots(s, 1024, RngSeed{42, {0, 0, 0}});
        for (std::uint32_t j = 1; j < 20; ++j) {
            if (sample_shots(s, 1024, RngSeed{42, {0, 0, j}}).zeros != base.zeros) ++distinct;
        }
        REQUIRE(distinct > 10);
    }

    SECTION("degenerate states") {
        REQUIRE(sample_shots(QubitState{}, 512, RngSeed{1, {}}).zeros == 512);
        REQUIRE(sample_shots(QubitState{0.0, 1.0}, 1024, RngSeed{1, {}}).zeros == 0);
    }

    SECTION("zero shots rejected") {
        REQUIRE_THROWS_AS(sample_shots(s, 0, RngSeed{}), ValidationError);
    }
}

TEST_CASE("shot statistics follow the binomial model", "[qsim]") {
    const QubitState s = ry_apply(ry_apply(QubitState{}, 2.0 * 0.05), 2.0 * 0.1);
    const double p = prob_zero(s);
    const std::uint64_t shots = 1024;

    SECTION("3.3-sigma band holds for nearly all seeds") {
        const double mean = static_cast<double>(shots) * p;
        const double sigma = std::sqrt(static_cast<double>(shots) * p * (1.0 - p));
        const double lo = mean - 3.3 * sigma;
        const double hi = mean + 3.3 * sigma;
        int inside = 0;
        const int trials = 2000;
        for (int t = 0; t < trials; ++t) {
            const auto zeros = sample_shots(
                s, shots, RngSeed{0x9a0 + static_cast<std::uint64_t>(t), {}}).zeros;
            if (static_cast<double>(zeros) >= lo && static_cast<double>(zeros) <= hi) ++inside;
        }
        REQUIRE(static_cast<double>(inside) / trials >= 0.995);
        // The reference run's observed count sits comfortably inside the band.
        REQUIRE(994.0 >= lo);
        REQUIRE(994.0 <= hi);
    }

    SECTION("empirical mean converges at the predicted rate") {
        const int trials = 1000;
        double sum = 0.0;
        for (int t = 0; t < trials; ++t) {
            sum += static_cast<double>(
                sample_shots(s, shots, RngSeed{0xbee + static_cast<std::uint64_t>(t), {}}).zeros);
        }
        const double empirical = sum / (static_cast<double>(trials) * shots);
        const double tolerance = 4.0 * std::sqrt(p * (1.0 - p) / (shots * trials));
        REQUIRE(std::abs(empirical - p) < tolerance);
    }
}
