#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qgaf/cnn.hpp"
#include "qgaf/errors.hpp"
#include "qgaf/imaging.hpp"
#include "qgaf/rng.hpp"

namespace qgaf {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    LossKind loss = LossKind::MSE;
    AdamConfig adam;
    std::size_t folds = 5;
    double train_fraction = 0.8;
    std::uint64_t shuffle_seed = 0;
    bool contiguous_folds = false;

    void validate() const {
        if (epochs < 1) throw ValidationError("epochs must be >= 1");
        if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
        if (folds < 2) throw ValidationError("folds must be >= 2");
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
            throw ValidationError("train_fraction must be in (0, 1)");
        }
    }
};

struct FoldReport {
    std::vector<double> train_loss;  // one entry per epoch, cfg.loss kind
    std::vector<double> val_loss;    // cfg.loss kind on the validation set
    std::vector<double> val_mae;
    std::vector<double> val_mse;
    double final_mae = std::numeric_limits<double>::quiet_NaN();
    double final_mse = std::numeric_limits<double>::quiet_NaN();
};

struct Sample {
    Tensor image{{1, arch::kImage, arch::kImage}};
    double label = 0.0;
    std::uint64_t window_id = 0;
};

using Dataset = std::vector<Sample>;

// Read every win_*.qgaf archive in a directory, ordered by window start,
// and scale pixel values to [0, 1]: symmetric-range kinds map via (v+1)/2,
// QGASF estimates are already non-negative and pass through unless the
// data proves otherwise.
inline Dataset load_dataset(const std::filesystem::path& dir, FieldKind* kind_out = nullptr) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("archive directory not found: " + dir.string());
    }
    struct Entry {
        std::uint64_t start;
        std::filesystem::path path;
    };
    std::vector<Entry> entries;
    for (const auto& item : std::filesystem::directory_iterator(dir)) {
        const std::string name = item.path().filename().string();
        if (name.size() < 10 || name.rfind("win_", 0) != 0 ||
            name.substr(name.size() - 5) != ".qgaf") {
            continue;
        }
        const std::string digits = name.substr(4, name.size() - 9);
        std::uint64_t start = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), start);
        if (ec != std::errc{} || ptr != digits.data() + digits.size()) continue;
        entries.push_back({start, item.path()});
    }
    if (entries.empty()) throw ValidationError("no win_*.qgaf archives in " + dir.string());
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.start < b.start; });

    Dataset dataset;
    dataset.reserve(entries.size());
    FieldKind kind = FieldKind::GASF;
    bool any_negative = false;
    for (std::size_t idx = 0; idx < entries.size(); ++idx) {
        auto [field, label] = read_archive(entries[idx].path, arch::kImage);
        if (idx == 0) {
            kind = field.kind;
        } else if (field.kind != kind) {
            throw ValidationError("mixed encoder kinds in " + dir.string());
        }
        Sample s;
        s.window_id = field.source_window_start;
        s.label = static_cast<double>(label);
        for (double v : field.values) any_negative = any_negative || v < 0.0;
        std::copy(field.values.begin(), field.values.end(), s.image.data.begin());
        dataset.push_back(std::move(s));
    }

    const bool shift = kind != FieldKind::QGASF || any_negative;
    if (shift) {
        for (Sample& s : dataset) {
            for (double& v : s.image.data) v = (v + 1.0) / 2.0;
        }
    }
    if (kind_out) *kind_out = kind;
    return dataset;
}

namespace detail {

inline Tensor batch_images(const Dataset& data, const std::vector<std::size_t>& indices,
                           std::size_t first, std::size_t count) {
    Tensor batch({count, 1, arch::kImage, arch::kImage});
    const std::size_t plane = arch::kImage * arch::kImage;
    for (std::size_t s = 0; s < count; ++s) {
        const Sample& sample = data[indices[first + s]];
        std::copy(sample.image.data.begin(), sample.image.data.end(),
                  batch.data.begin() + static_cast<std::ptrdiff_t>(s * plane));
    }
    return batch;
}

inline Tensor batch_labels(const Dataset& data, const std::vector<std::size_t>& indices,
                           std::size_t first, std::size_t count) {
    Tensor labels({count, 1});
    for (std::size_t s = 0; s < count; ++s) labels.data[s] = data[indices[first + s]].label;
    return labels;
}

}  // namespace detail

struct EvalMetrics {
    double mae = 0.0;
    double mse = 0.0;
};

inline EvalMetrics evaluate(const CnnModel& model, const Dataset& data,
                            std::size_t batch_size = 32) {
    if (data.empty()) throw ValidationError("evaluate on an empty dataset");
    std::vector<std::size_t> indices(data.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (std::size_t first = 0; first < data.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, data.size() - first);
        const Tensor pred = forward(model, detail::batch_images(data, indices, first, count));
        for (std::size_t s = 0; s < count; ++s) {
            const double r = pred.data[s] - data[indices[first + s]].label;
            abs_sum += std::abs(r);
            sq_sum += r * r;
        }
    }
    const double n = static_cast<double>(data.size());
    return EvalMetrics{abs_sum / n, sq_sum / n};
}

struct TrainResult {
    CnnModel model;
    AdamState state;
    FoldReport report;
};

// Train on train_set, evaluating on val_set after every epoch. Everything
// is a deterministic function of (data, cfg, salt).
inline TrainResult train_fold(const Dataset& train_set, const Dataset& val_set,
                              const TrainConfig& cfg, std::uint64_t salt = 0) {
    cfg.validate();
    if (train_set.empty()) throw ValidationError("empty training set");

    TrainResult result;
    result.model = CnnModel::init(hash_combine(mix64(cfg.shuffle_seed ^ 0x1215ULL), salt));
    RngStream shuffler(hash_combine(mix64(cfg.shuffle_seed ^ 0x5421ULL), salt));

    std::vector<std::size_t> indices(train_set.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffler.shuffle(indices);
        double loss_sum = 0.0;
        for (std::size_t first = 0; first < train_set.size(); first += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, train_set.size() - first);
            const Tensor batch = detail::batch_images(train_set, indices, first, count);
            const Tensor targets = detail::batch_labels(train_set, indices, first, count);
            BackwardResult back = backward(result.model, batch, targets, cfg.loss);
            if (!std::isfinite(back.loss_value)) {
                throw TrainingFailure("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                      ", batch " + std::to_string(first / cfg.batch_size + 1));
            }
            adam_step(result.model, back.grads, result.state, cfg.adam);
            loss_sum += back.loss_value * static_cast<double>(count);
        }
        result.report.train_loss.push_back(loss_sum / static_cast<double>(train_set.size()));

        if (!val_set.empty()) {
            const EvalMetrics m = evaluate(result.model, val_set, cfg.batch_size);
            result.report.val_mae.push_back(m.mae);
            result.report.val_mse.push_back(m.mse);
            result.report.val_loss.push_back(cfg.loss == LossKind::MSE ? m.mse : m.mae);
        } else {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            result.report.val_mae.push_back(nan);
            result.report.val_mse.push_back(nan);
            result.report.val_loss.push_back(nan);
        }
    }
    result.report.final_mae = result.report.val_mae.back();
    result.report.final_mse = result.report.val_mse.back();
    return result;
}

// Holdout split by train_fraction (shuffled by shuffle_seed), then train.
inline TrainResult train(const Dataset& dataset, const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.size() < 2) throw ValidationError("training needs at least 2 samples");
    std::vector<std::size_t> perm(dataset.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    RngStream rng(mix64(cfg.shuffle_seed ^ 0x5b117ULL));
    rng.shuffle(perm);

    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(static_cast<double>(dataset.size()) *
                                            cfg.train_fraction)),
        1, dataset.size() - 1);
    Dataset train_set;
    Dataset val_set;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        (i < n_train ? train_set : val_set).push_back(dataset[perm[i]]);
    }
    return train_fold(train_set, val_set, cfg);
}

// Partition [0, n) into k folds. Shuffled mode permutes first; contiguous
// mode keeps temporal blocks intact.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k,
                                                        std::uint64_t seed, bool contiguous) {
    if (k < 2) throw ValidationError("folds must be >= 2");
    if (n < k) {
        throw ValidationError("dataset of " + std::to_string(n) + " samples is smaller than " +
                              std::to_string(k) + " folds");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (!contiguous) {
        RngStream rng(mix64(seed ^ 0xf01d5ULL));
        rng.shuffle(order);
    }
    std::vector<std::vector<std::size_t>> folds(k);
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return folds;
}

struct CvResult {
    std::vector<TrainResult> folds;
    double aggregate_mae = 0.0;
    double aggregate_mse = 0.0;
};

// K-fold cross-validation: iteration k validates on fold k and trains on
// the rest. Aggregate metrics are the mean over folds.
inline CvResult cross_validate(const Dataset& dataset, const TrainConfig& cfg) {
    cfg.validate();
    const auto folds = make_folds(dataset.size(), cfg.folds, cfg.shuffle_seed,
                                  cfg.contiguous_folds);
    CvResult result;
    for (std::size_t k = 0; k < folds.size(); ++k) {
        Dataset train_set;
        Dataset val_set;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            for (std::size_t idx : folds[f]) {
                (f == k ? val_set : train_set).push_back(dataset[idx]);
            }
        }
        result.folds.push_back(train_fold(train_set, val_set, cfg, k));
        result.aggregate_mae += result.folds.back().report.final_mae;
        result.aggregate_mse += result.folds.back().report.final_mse;
    }
    result.aggregate_mae /= static_cast<double>(folds.size());
    result.aggregate_mse /= static_cast<double>(folds.size());
    return result;
}

namespace detail {

inline void write_u64_le(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    write_bytes(out, b, 8);
}

inline std::uint64_t read_u64_le(std::ifstream& in, const char* what) {
    unsigned char b[8];
    read_bytes(in, b, 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void write_f64_block(std::ofstream& out, const Tensor& t) {
    for (double v : t.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        write_u64_le(out, bits);
    }
}

inline void read_f64_block(std::ifstream& in, Tensor& t, const char* what) {
    for (double& v : t.data) {
        const std::uint64_t bits = read_u64_le(in, what);
        std::memcpy(&v, &bits, 8);
    }
}

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'Q', 'C', 'N', 'N'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

// Checkpoint layout: magic "QCNN", version byte, u64 LE architecture hash,
// u32 LE manifest length, JSON shape manifest, float64 LE parameter blocks,
// float64 LE Adam first/second moment blocks, u64 LE step count.
inline void save_checkpoint(const CnnModel& model, const AdamState& state,
                            const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");

    nlohmann::json manifest;
    for (const auto& f : CnnParams::fields()) {
        manifest["tensors"].push_back({{"name", f.name}, {"shape", (model.params.*f.member).shape}});
    }
    const std::string manifest_str = manifest.dump();

    detail::write_bytes(out, kCheckpointMagic, 4);
    detail::write_bytes(out, &kCheckpointVersion, 1);
    detail::write_u64_le(out, architecture_hash());
    detail::write_u32_le(out, static_cast<std::uint32_t>(manifest_str.size()));
    detail::write_bytes(out, manifest_str.data(), manifest_str.size());
    for (const auto& f : CnnParams::fields()) detail::write_f64_block(out, model.params.*f.member);
    for (const auto& f : CnnParams::fields()) detail::write_f64_block(out, state.m.*f.member);
    for (const auto& f : CnnParams::fields()) detail::write_f64_block(out, state.v.*f.member);
    detail::write_u64_le(out, state.step);
    if (!out) throw IoError("failed writing " + path.string());
}

inline std::pair<CnnModel, AdamState> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    char magic[4];
    detail::read_bytes(in, magic, 4, "magic");
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw FormatError(path.string() + ": bad checkpoint magic");
    }
    std::uint8_t version = 0;
    detail::read_bytes(in, &version, 1, "version");
    if (version != kCheckpointVersion) {
        throw FormatError(path.string() + ": unsupported checkpoint version");
    }
    const std::uint64_t hash = detail::read_u64_le(in, "architecture hash");
    if (hash != architecture_hash()) {
        throw FormatError(path.string() + ": architecture hash mismatch");
    }
    const std::uint32_t manifest_len = detail::read_u32_le(in, "manifest length");
    std::string manifest_str(manifest_len, '\0');
    detail::read_bytes(in, manifest_str.data(), manifest_len, "manifest");
    const nlohmann::json manifest = nlohmann::json::parse(manifest_str);

    CnnModel model;
    AdamState state;
    std::size_t field_idx = 0;
    for (const auto& f : CnnParams::fields()) {
        const auto& entry = manifest.at("tensors").at(field_idx++);
        if (entry.at("name").get<std::string>() != f.name ||
            entry.at("shape").get<std::vector<std::size_t>>() != (model.params.*f.member).shape) {
            throw FormatError(path.string() + ": shape manifest mismatch for " +
                              std::string(f.name));
        }
    }
    for (const auto& f : CnnParams::fields()) {
        detail::read_f64_block(in, model.params.*f.member, f.name);
    }
    for (const auto& f : CnnParams::fields()) detail::read_f64_block(in, state.m.*f.member, "adam m");
    for (const auto& f : CnnParams::fields()) detail::read_f64_block(in, state.v.*f.member, "adam v");
    state.step = detail::read_u64_le(in, "step");
    return {std::move(model), std::move(state)};
}

// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline void write_fold_csv(const FoldReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
        out << (e + 1) << ',' << format_double(report.train_loss[e]) << ','
            << format_double(report.val_loss[e]) << '\n';
    }
}

}  // namespace qgaf
