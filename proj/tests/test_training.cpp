#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "qgaf/gaf.hpp"
#include "qgaf/qgaf.hpp"
#include "qgaf/rng.hpp"
#include "qgaf/training.hpp"
#include "test_util.hpp"

using namespace qgaf;
using Catch::Matchers::WithinAbs;

namespace {

// Tiny learnable dataset: images whose mean brightness carries the label.
Dataset synthetic_dataset(std::size_t n, std::uint64_t seed) {
    Dataset data;
    RngStream rng(seed);
    for (std::size_t k = 0; k < n; ++k) {
        Sample s;
        s.window_id = k;
        const double level = rng.next_range(0.2, 0.8);
        for (double& v : s.image.data) v = level + rng.next_range(-0.05, 0.05);
        s.label = 2.0 * level - 0.2;
        data.push_back(std::move(s));
    }
    return data;
}

}  // namespace

TEST_CASE("make_folds partitions the dataset", "[training]") {
    SECTION("100 samples in 5 folds of 20") {
        const auto folds = make_folds(100, 5, 7, false);
        REQUIRE(folds.size() == 5);
        std::set<std::size_t> seen;
        for (const auto& fold : folds) {
            REQUIRE(fold.size() == 20);
            seen.insert(fold.begin(), fold.end());
        }
        REQUIRE(seen.size() == 100);  // disjoint union covers everything
    }

    SECTION("remainders spread over the first folds") {
        const auto folds = make_folds(12, 5, 7, false);
        REQUIRE(folds[0].size() == 3);
        REQUIRE(folds[1].size() == 3);
        REQUIRE(folds[2].size() == 2);
    }

    SECTION("contiguous mode keeps temporal blocks") {
        const auto folds = make_folds(10, 5, 7, true);
        REQUIRE(folds[0] == std::vector<std::size_t>{0, 1});
        REQUIRE(folds[4] == std::vector<std::size_t>{8, 9});
    }

    SECTION("shuffled mode actually shuffles, deterministically") {
        const auto a = make_folds(50, 5, 7, false);
        const auto b = make_folds(50, 5, 7, false);
        const auto c = make_folds(50, 5, 8, false);
        REQUIRE(a == b);
        REQUIRE(a != c);
        REQUIRE(a[0] != std::vector<std::size_t>({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
    }

    SECTION("too-small datasets rejected") {
        REQUIRE_THROWS_AS(make_folds(4, 5, 0, false), ValidationError);
    }
}

TEST_CASE("train_fold is deterministic and learns", "[training]") {
    const Dataset data = synthetic_dataset(24, 505);
    const Dataset train_set(data.begin(), data.begin() + 18);
    const Dataset val_set(data.begin() + 18, data.end());

    TrainConfig cfg;
    cfg.epochs = 25;
    cfg.batch_size = 8;
    cfg.shuffle_seed = 99;

    SECTION("same config, bitwise-identical curves") {
        const TrainResult a = train_fold(train_set, val_set, cfg);
        const TrainResult b = train_fold(train_set, val_set, cfg);
        REQUIRE(a.report.train_loss == b.report.train_loss);
        REQUIRE(a.report.val_loss == b.report.val_loss);
        for (const auto& f : CnnParams::fields()) {
            REQUIRE((a.model.params.*f.member).data == (b.model.params.*f.member).data);
        }
    }

    SECTION("loss descends on a learnable signal") {
        const TrainResult r = train_fold(train_set, val_set, cfg);
        REQUIRE(r.report.train_loss.size() == cfg.epochs);
        REQUIRE(r.report.train_loss.back() < r.report.train_loss.front());
        REQUIRE(std::isfinite(r.report.final_mae));
        REQUIRE(std::isfinite(r.report.final_mse));
        REQUIRE(r.report.final_mse >= 0.0);
    }

    SECTION("empty training set rejected") {
        REQUIRE_THROWS_AS(train_fold({}, val_set, cfg), ValidationError);
    }
}

TEST_CASE("train splits by train_fraction", "[training]") {
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.shuffle_seed = 5;
    const Dataset data = synthetic_dataset(10, 6);
    const TrainResult r = train(data, cfg);
    // 80% of 10 trains on 8; validation metrics exist.
    REQUIRE(std::isfinite(r.report.final_mae));
    REQUIRE(r.report.train_loss.size() == 2);
    REQUIRE_THROWS_AS(train(Dataset{}, cfg), ValidationError);
}

TEST_CASE("cross_validate aggregates fold metrics", "[training]") {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.folds = 5;
    cfg.shuffle_seed = 17;
    const Dataset data = synthetic_dataset(20, 7);

    const CvResult cv = cross_validate(data, cfg);
    REQUIRE(cv.folds.size() == 5);
    double mae_sum = 0.0;
    double mse_sum = 0.0;
    for (const auto& fold : cv.folds) {
        REQUIRE(fold.report.train_loss.size() == 3);
        mae_sum += fold.report.final_mae;
        mse_sum += fold.report.final_mse;
    }
    REQUIRE_THAT(cv.aggregate_mae, WithinAbs(mae_sum / 5.0, 1e-15));
    REQUIRE_THAT(cv.aggregate_mse, WithinAbs(mse_sum / 5.0, 1e-15));

    REQUIRE_THROWS_AS(cross_validate(synthetic_dataset(4, 1), cfg), ValidationError);
}

TEST_CASE("checkpoints restore the exact training state", "[training]") {
    testutil::TempDir tmp;
    const Dataset data = synthetic_dataset(12, 41);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 4;
    cfg.shuffle_seed = 3;
    const TrainResult r = train_fold(data, {}, cfg);

    SECTION("round trip is bit-exact and predictions agree") {
        save_checkpoint(r.model, r.state, tmp.file("m.qcnn"));
        const auto [model, state] = load_checkpoint(tmp.file("m.qcnn"));
        REQUIRE(state.step == r.state.step);
        for (const auto& f : CnnParams::fields()) {
            REQUIRE((model.params.*f.member).data == (r.model.params.*f.member).data);
            REQUIRE((state.m.*f.member).data == (r.state.m.*f.member).data);
            REQUIRE((state.v.*f.member).data == (r.state.v.*f.member).data);
        }
        Tensor probe({1, 1, arch::kImage, arch::kImage});
        for (std::size_t i = 0; i < probe.numel(); ++i) probe[i] = (i % 30) / 30.0;
        REQUIRE(forward(model, probe).data == forward(r.model, probe).data);
    }

    SECTION("truncated checkpoint rejected") {
        save_checkpoint(r.model, r.state, tmp.file("t.qcnn"));
        std::string bytes = testutil::read_file(tmp.file("t.qcnn"));
        testutil::write_file(tmp.file("t.qcnn"), bytes.substr(0, bytes.size() / 2));
        REQUIRE_THROWS_AS(load_checkpoint(tmp.file("t.qcnn")), FormatError);
    }

    SECTION("architecture hash mismatch rejected") {
        save_checkpoint(r.model, r.state, tmp.file("h.qcnn"));
        std::string bytes = testutil::read_file(tmp.file("h.qcnn"));
        bytes[6] ^= 0x5a;  // inside the stored hash
        testutil::write_file(tmp.file("h.qcnn"), bytes);
        REQUIRE_THROWS_AS(load_checkpoint(tmp.file("h.qcnn")), FormatError);
    }

    SECTION("bad magic rejected") {
        testutil::write_file(tmp.file("bad.qcnn"), "WHAT");
        REQUIRE_THROWS_AS(load_checkpoint(tmp.file("bad.qcnn")), FormatError);
    }
}

TEST_CASE("load_dataset applies the 0-1 scaling per encoder kind", "[training]") {
    testutil::TempDir tmp;
    RngStream rng(88);

    SECTION("symmetric-range kinds map through (v+1)/2") {
        AngularField f(FieldKind::GASF, 30, 0);
        for (double& v : f.values) v = rng.next_range(-1.0, 1.0);
        write_archive(f, 1.25f, tmp.file("win_0.qgaf"));
        FieldKind kind;
        const Dataset data = load_dataset(tmp.path(), &kind);
        REQUIRE(kind == FieldKind::GASF);
        REQUIRE(data.size() == 1);
        REQUIRE(data[0].label == static_cast<double>(1.25f));
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            const double stored = static_cast<double>(static_cast<float>(f.values[i]));
            REQUIRE_THAT(data[0].image.data[i], WithinAbs((stored + 1.0) / 2.0, 1e-12));
        }
    }

    SECTION("non-negative QGASF passes through unscaled") {
        AngularField f(FieldKind::QGASF, 30, 0);
        for (double& v : f.values) v = rng.next_range(0.0, 1.0);
        write_archive(f, 1.0f, tmp.file("win_0.qgaf"));
        const Dataset data = load_dataset(tmp.path());
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            REQUIRE(data[0].image.data[i] == static_cast<double>(static_cast<float>(f.values[i])));
        }
    }

    SECTION("archives are ordered by window start, numerically") {
        for (std::uint64_t start : {100, 20, 3}) {
            AngularField f(FieldKind::GASF, 30, start);
            write_archive(f, 0.0f, tmp.file("win_" + std::to_string(start) + ".qgaf"));
        }
        const Dataset data = load_dataset(tmp.path());
        REQUIRE(data.size() == 3);
        REQUIRE(data[0].window_id == 3);
        REQUIRE(data[1].window_id == 20);
        REQUIRE(data[2].window_id == 100);
    }

    SECTION("mixed kinds rejected") {
        AngularField a(FieldKind::GASF, 30, 0);
        AngularField b(FieldKind::QGASF, 30, 10);
        write_archive(a, 0.0f, tmp.file("win_0.qgaf"));
        write_archive(b, 0.0f, tmp.file("win_10.qgaf"));
        REQUIRE_THROWS_AS(load_dataset(tmp.path()), ValidationError);
    }

    SECTION("empty directory rejected") {
        REQUIRE_THROWS_AS(load_dataset(tmp.path()), ValidationError);
    }
}

TEST_CASE("fold CSV uses the epoch,train_loss,val_loss layout", "[training]") {
    testutil::TempDir tmp;
    FoldReport report;
    report.train_loss = {0.5, 0.25};
    report.val_loss = {0.6, 0.3};
    report.val_mae = {0.6, 0.3};
    report.val_mse = {0.6, 0.3};
    write_fold_csv(report, tmp.file("fold.csv"));
    const std::string text = testutil::read_file(tmp.file("fold.csv"));
    REQUIRE(text == "epoch,train_loss,val_loss\n1,0.5,0.6\n2,0.25,0.3\n");
}
