#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gradient_check.hpp"
#include "qgaf/cnn.hpp"
#include "qgaf/rng.hpp"

using namespace qgaf;
using Catch::Matchers::WithinAbs;

namespace {

Tensor random_batch(RngStream& rng, std::size_t b, double lo = 0.0, double hi = 1.0) {
    Tensor batch({b, 1, arch::kImage, arch::kImage});
    for (double& v : batch.data) v = rng.next_range(lo, hi);
    return batch;
}

}  // namespace

TEST_CASE("forward respects the fixed architecture", "[cnn]") {
    SECTION("zero model emits the fc2 bias for every sample") {
        CnnModel model;  // all parameters zero
        model.params.fc2_b[0] = 0.37;
        RngStream rng(1);
        const Tensor pred = forward(model, random_batch(rng, 3));
        REQUIRE(pred.shape == std::vector<std::size_t>{3, 1});
        for (double v : pred.data) REQUIRE(v == 0.37);
    }

    SECTION("batch of 4 yields a 4x1 prediction") {
        RngStream rng(2);
        const CnnModel model = CnnModel::init(5);
        REQUIRE(forward(model, random_batch(rng, 4)).shape ==
                std::vector<std::size_t>{4, 1});
    }

    SECTION("spatial flow is 30 -> 15 -> 7") {
        // Floor pooling: floor((15 - 2) / 2) + 1 = 7.
        REQUIRE((15 - 2) / 2 + 1 == 7);
        RngStream rng(3);
        const ForwardCache cache = forward_cached(CnnModel::init(5), random_batch(rng, 2));
        REQUIRE(cache.conv1_pre.shape == std::vector<std::size_t>{2, 8, 30, 30});
        REQUIRE(cache.pool1.shape == std::vector<std::size_t>{2, 8, 15, 15});
        REQUIRE(cache.conv2_pre.shape == std::vector<std::size_t>{2, 16, 15, 15});
        REQUIRE(cache.pool2.shape == std::vector<std::size_t>{2, 16, 7, 7});
        REQUIRE(cache.gap.shape == std::vector<std::size_t>{2, 16});
    }

    SECTION("wrong input shapes rejected") {
        const CnnModel model = CnnModel::init(5);
        REQUIRE_THROWS_AS(forward(model, Tensor({2, 1, 28, 28})), ValidationError);
        REQUIRE_THROWS_AS(forward(model, Tensor({2, 3, 30, 30})), ValidationError);
    }

    SECTION("init is deterministic in the seed") {
        const CnnModel a = CnnModel::init(11);
        const CnnModel b = CnnModel::init(11);
        const CnnModel c = CnnModel::init(12);
        REQUIRE(a.params.conv1_w.data == b.params.conv1_w.data);
        REQUIRE(a.params.conv1_w.data != c.params.conv1_w.data);
        REQUIRE(a.params.conv1_b.data == std::vector<double>(8, 0.0));
    }
}

TEST_CASE("loss values and gradients match hand evaluation", "[cnn]") {
    Tensor pred({2, 1});
    pred.data = {1.0, 3.0};
    Tensor target({2, 1});
    target.data = {0.0, 0.0};

    SECTION("MSE") {
        const LossResult r = loss(pred, target, LossKind::MSE);
        REQUIRE_THAT(r.value, WithinAbs(5.0, 1e-15));  // (1 + 9) / 2
        REQUIRE_THAT(r.grad[0], WithinAbs(1.0, 1e-15));
        REQUIRE_THAT(r.grad[1], WithinAbs(3.0, 1e-15));
    }

    SECTION("MAE") {
        const LossResult r = loss(pred, target, LossKind::MAE);
        REQUIRE_THAT(r.value, WithinAbs(2.0, 1e-15));
        REQUIRE_THAT(r.grad[0], WithinAbs(0.5, 1e-15));
        REQUIRE_THAT(r.grad[1], WithinAbs(0.5, 1e-15));
    }

    SECTION("zero at pred = target, subgradient zero at the MAE kink") {
        const LossResult mse = loss(pred, pred, LossKind::MSE);
        const LossResult mae = loss(pred, pred, LossKind::MAE);
        REQUIRE(mse.value == 0.0);
        REQUIRE(mae.value == 0.0);
        REQUIRE(mae.grad.data == std::vector<double>{0.0, 0.0});
    }

    SECTION("shape mismatch rejected") {
        REQUIRE_THROWS_AS(loss(pred, Tensor({3, 1}), LossKind::MSE), ValidationError);
    }
}

TEST_CASE("backward matches central finite differences", "[cnn]") {
    RngStream rng(20240);
    const CnnModel model = CnnModel::init(404);
    const Tensor batch = random_batch(rng, 2);
    Tensor targets({2, 1});
    targets.data = {1.1, 0.9};

    for (LossKind kind : {LossKind::MSE, LossKind::MAE}) {
        const auto result = testutil::check_gradients(model, batch, targets, kind, 1e-5, 7);
        INFO("loss " << to_string(kind) << ", worst " << result.worst_param << " rel "
                     << result.max_rel_err << ", skipped " << result.skipped);
        REQUIRE(result.checked > 200);
        REQUIRE(result.max_rel_err <= 1e-4);
    }
}

TEST_CASE("gradient structure on special batches", "[cnn]") {
    SECTION("zero input: first-layer weight grads vanish, bias path survives") {
        CnnModel model = CnnModel::init(7);
        for (double& v : model.params.conv1_b.data) v = 0.05;
        for (double& v : model.params.conv2_b.data) v = 0.05;
        Tensor batch({2, 1, arch::kImage, arch::kImage});  // all zeros
        Tensor targets({2, 1});
        targets.data = {1.0, 1.0};
        const CnnParams grads = backward(model, batch, targets, LossKind::MSE).grads;
        for (double g : grads.conv1_w.data) REQUIRE(g == 0.0);
        double bias_mag = 0.0;
        for (double g : grads.conv1_b.data) bias_mag += std::abs(g);
        REQUIRE(bias_mag > 0.0);
    }

    SECTION("duplicated sample equals the single-sample gradient") {
        RngStream rng(31);
        const CnnModel model = CnnModel::init(9);
        const Tensor one = random_batch(rng, 1);
        Tensor two({2, 1, arch::kImage, arch::kImage});
        std::copy(one.data.begin(), one.data.end(), two.data.begin());
        std::copy(one.data.begin(), one.data.end(), two.data.begin() + 900);
        Tensor t1({1, 1});
        t1.data = {0.8};
        Tensor t2({2, 1});
        t2.data = {0.8, 0.8};

        const BackwardResult single = backward(model, one, t1, LossKind::MSE);
        const BackwardResult doubled = backward(model, two, t2, LossKind::MSE);
        for (const auto& f : CnnParams::fields()) {
            const Tensor& a = single.grads.*f.member;
            const Tensor& b = doubled.grads.*f.member;
            for (std::size_t i = 0; i < a.numel(); ++i) {
                REQUIRE_THAT(b[i], WithinAbs(a[i], 1e-12));
            }
        }

        // With all residuals equal, MSE = MAE^2 exactly.
        const double mae = loss(forward(model, two), t2, LossKind::MAE).value;
        const double mse = loss(forward(model, two), t2, LossKind::MSE).value;
        REQUIRE_THAT(mse, WithinAbs(mae * mae, 1e-15));
    }

    SECTION("shuffling a batch leaves loss and gradients unchanged") {
        RngStream rng(33);
        const CnnModel model = CnnModel::init(13);
        const Tensor batch = random_batch(rng, 3);
        Tensor shuffled({3, 1, arch::kImage, arch::kImage});
        const std::size_t plane = 900;
        // order 2, 0, 1
        std::copy_n(batch.data.begin() + 2 * plane, plane, shuffled.data.begin());
        std::copy_n(batch.data.begin(), plane, shuffled.data.begin() + plane);
        std::copy_n(batch.data.begin() + plane, plane, shuffled.data.begin() + 2 * plane);
        Tensor targets({3, 1});
        targets.data = {0.9, 1.0, 1.2};
        Tensor targets_shuffled({3, 1});
        targets_shuffled.data = {1.2, 0.9, 1.0};

        const BackwardResult a = backward(model, batch, targets, LossKind::MSE);
        const BackwardResult b = backward(model, shuffled, targets_shuffled, LossKind::MSE);
        REQUIRE_THAT(a.loss_value, WithinAbs(b.loss_value, 1e-12));
        for (const auto& f : CnnParams::fields()) {
            const Tensor& ga = a.grads.*f.member;
            const Tensor& gb = b.grads.*f.member;
            for (std::size_t i = 0; i < ga.numel(); ++i) {
                REQUIRE_THAT(gb[i], WithinAbs(ga[i], 1e-12));
            }
        }
    }
}

TEST_CASE("adam_step follows the update rule", "[cnn]") {
    const AdamConfig cfg;

    SECTION("zero gradients change nothing but the step count") {
        CnnModel model = CnnModel::init(3);
        const CnnModel before = model;
        CnnParams zero_grads;
        AdamState state;
        adam_step(model, zero_grads, state, cfg);
        REQUIRE(state.step == 1);
        for (const auto& f : CnnParams::fields()) {
            REQUIRE((model.params.*f.member).data == (before.params.*f.member).data);
        }
    }

    SECTION("first step matches the closed form") {
        CnnModel model;
        CnnParams grads;
        grads.fc2_b[0] = 0.5;
        AdamState state;
        adam_step(model, grads, state, cfg);
        // Bias-corrected first step: m_hat = g, v_hat = g^2.
        const double expected = -cfg.lr * 0.5 / (std::sqrt(0.25) + cfg.epsilon);
        REQUIRE_THAT(model.params.fc2_b[0], WithinAbs(expected, 1e-15));
        REQUIRE_THAT(model.params.fc2_b[0], WithinAbs(-cfg.lr, 1e-9));
    }

    SECTION("a second identical step is smaller") {
        CnnModel model;
        CnnParams grads;
        grads.fc2_b[0] = 0.5;
        AdamState state;
        adam_step(model, grads, state, cfg);
        const double step1 = std::abs(model.params.fc2_b[0]);
        const double before2 = model.params.fc2_b[0];
        adam_step(model, grads, state, cfg);
        const double step2 = std::abs(model.params.fc2_b[0] - before2);
        REQUIRE(step2 < step1);

        // Independent scalar recurrence.
        const double g = 0.5;
        const double m2 = (0.9 * (0.1 * g) + 0.1 * g) / (1.0 - 0.9 * 0.9);
        const double v2 = (0.999 * (0.001 * g * g) + 0.001 * g * g) / (1.0 - 0.999 * 0.999);
        REQUIRE_THAT(step2, WithinAbs(cfg.lr * m2 / (std::sqrt(v2) + cfg.epsilon), 1e-12));
    }

    SECTION("non-finite gradient aborts with the parameter name") {
        CnnModel model;
        CnnParams grads;
        grads.fc1_w[5] = std::numeric_limits<double>::quiet_NaN();
        AdamState state;
        try {
            adam_step(model, grads, state, cfg);
            FAIL("expected TrainingFailure");
        } catch (const TrainingFailure& e) {
            REQUIRE(std::string(e.what()).find("fc1_w[5]") != std::string::npos);
        }
    }
}
