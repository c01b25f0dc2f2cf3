#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qgaf/errors.hpp"
#include "qgaf/fetch.hpp"
#include "qgaf/gaf.hpp"
#include "qgaf/imaging.hpp"
#include "qgaf/marketdata.hpp"
#include "qgaf/qgaf.hpp"
#include "qgaf/report.hpp"
#include "qgaf/training.hpp"
#include "qgaf/windowing.hpp"

namespace qgaf {

struct DataSourceConfig {
    std::string path;  // exactly one of path / url
    std::string url;
    CsvSchema schema;
};

struct EncoderConfig {
    FieldKind kind = FieldKind::GASF;
    RangeTag normalization = RangeTag::sym;  // classical encoders only
    QgafConfig qgaf;                         // quantum encoders only
};

struct ImagingConfig {
    bool write_pgm = false;
};

struct PipelineConfig {
    std::string name;  // stock label; defaults to the data file stem
    DataSourceConfig data;
    CleaningPolicy cleaning = CleaningPolicy::forward_fill;
    WindowConfig window;
    EncoderConfig encoder;
    ImagingConfig imaging;
    TrainConfig training;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
};

namespace detail {

inline void require_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "'");
    }
}

inline std::string stem_of(const std::string& path_or_url) {
    std::string base = path_or_url;
    const auto slash = base.find_last_of("/\\");
    if (slash != std::string::npos) base = base.substr(slash + 1);
    const auto dot = base.find_last_of('.');
    if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
    return base.empty() ? "series" : base;
}

}  // namespace detail

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    using detail::get_or;
    detail::require_keys(j, {"name", "data", "cleaning", "window", "encoder", "imaging",
                             "training", "seed", "out_dir"},
                         "config root");
    PipelineConfig cfg;
    if (!j.contains("data")) throw ConfigError("config is missing the 'data' section");
    const auto& data = j.at("data");
    detail::require_keys(data, {"path", "url", "date_column", "close_column"}, "data");
    cfg.data.path = get_or<std::string>(data, "path", "");
    cfg.data.url = get_or<std::string>(data, "url", "");
    if (cfg.data.path.empty() == cfg.data.url.empty()) {
        throw ConfigError("data needs exactly one of 'path' or 'url'");
    }
    cfg.data.schema.date_column = get_or<std::string>(data, "date_column", "date");
    cfg.data.schema.close_column = get_or<std::string>(data, "close_column", "close");

    cfg.cleaning = cleaning_policy_from_string(get_or<std::string>(j, "cleaning", "forward_fill"));

    if (j.contains("window")) {
        const auto& w = j.at("window");
        detail::require_keys(w, {"window_size", "stride", "label_mode", "horizon"}, "window");
        cfg.window.window_size = get_or<std::size_t>(w, "window_size", 30);
        cfg.window.stride = get_or<std::size_t>(w, "stride", 10);
        cfg.window.label_mode = label_mode_from_string(
            get_or<std::string>(w, "label_mode", "same_window"));
        cfg.window.horizon = get_or<std::size_t>(w, "horizon", 30);
        cfg.window.validate();
    }

    cfg.seed = get_or<std::uint64_t>(j, "seed", 0);

    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        detail::require_keys(e, {"kind", "normalization", "shots", "sign_mode", "exact_p"},
                             "encoder");
        cfg.encoder.kind = field_kind_from_string(get_or<std::string>(e, "kind", "gasf"));
        cfg.encoder.normalization =
            range_tag_from_string(get_or<std::string>(e, "normalization", "sym"));
        cfg.encoder.qgaf.shots = get_or<std::uint64_t>(e, "shots", 1024);
        cfg.encoder.qgaf.sign_mode =
            sign_mode_from_string(get_or<std::string>(e, "sign_mode", "analytic"));
        cfg.encoder.qgaf.exact_p = get_or<bool>(e, "exact_p", false);
        cfg.encoder.qgaf.validate();
    }
    cfg.encoder.qgaf.global_seed = cfg.seed;

    if (j.contains("imaging")) {
        detail::require_keys(j.at("imaging"), {"write_pgm"}, "imaging");
        cfg.imaging.write_pgm = get_or<bool>(j.at("imaging"), "write_pgm", false);
    }

    if (j.contains("training")) {
        const auto& t = j.at("training");
        detail::require_keys(t,
                             {"epochs", "batch_size", "loss", "lr", "beta1", "beta2", "epsilon",
                              "folds", "train_fraction", "contiguous_folds", "shuffle_seed"},
                             "training");
        cfg.training.epochs = get_or<std::size_t>(t, "epochs", 100);
        cfg.training.batch_size = get_or<std::size_t>(t, "batch_size", 32);
        cfg.training.loss = loss_kind_from_string(get_or<std::string>(t, "loss", "MSE"));
        cfg.training.adam.lr = get_or<double>(t, "lr", 1e-3);
        cfg.training.adam.beta1 = get_or<double>(t, "beta1", 0.9);
        cfg.training.adam.beta2 = get_or<double>(t, "beta2", 0.999);
        cfg.training.adam.epsilon = get_or<double>(t, "epsilon", 1e-8);
        cfg.training.folds = get_or<std::size_t>(t, "folds", 5);
        cfg.training.train_fraction = get_or<double>(t, "train_fraction", 0.8);
        cfg.training.contiguous_folds = get_or<bool>(t, "contiguous_folds", false);
        cfg.training.shuffle_seed = get_or<std::uint64_t>(t, "shuffle_seed", cfg.seed);
        cfg.training.validate();
    } else {
        cfg.training.shuffle_seed = cfg.seed;
    }

    cfg.name = get_or<std::string>(j, "name", "");
    if (cfg.name.empty()) {
        cfg.name = detail::stem_of(cfg.data.path.empty() ? cfg.data.url : cfg.data.path);
    }
    cfg.out_dir = get_or<std::string>(j, "out_dir", "out");
    return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return config_from_json(j);
}

// Canonical JSON form of the resolved semantic configuration. The output
// location is deliberately excluded so reruns into different directories
// stay byte-identical.
inline nlohmann::json config_to_canonical_json(const PipelineConfig& cfg) {
    nlohmann::json j;
    j["name"] = cfg.name;
    j["data"] = {{"path", cfg.data.path},
                 {"url", cfg.data.url},
                 {"date_column", cfg.data.schema.date_column},
                 {"close_column", cfg.data.schema.close_column}};
    j["cleaning"] = to_string(cfg.cleaning);
    j["window"] = {{"window_size", cfg.window.window_size},
                   {"stride", cfg.window.stride},
                   {"label_mode", to_string(cfg.window.label_mode)},
                   {"horizon", cfg.window.horizon}};
    j["encoder"] = {{"kind", to_string(cfg.encoder.kind)},
                    {"normalization", to_string(cfg.encoder.normalization)},
                    {"shots", cfg.encoder.qgaf.shots},
                    {"sign_mode", to_string(cfg.encoder.qgaf.sign_mode)},
                    {"exact_p", cfg.encoder.qgaf.exact_p}};
    j["training"] = {{"epochs", cfg.training.epochs},
                     {"batch_size", cfg.training.batch_size},
                     {"loss", to_string(cfg.training.loss)},
                     {"lr", cfg.training.adam.lr},
                     {"beta1", cfg.training.adam.beta1},
                     {"beta2", cfg.training.adam.beta2},
                     {"epsilon", cfg.training.adam.epsilon},
                     {"folds", cfg.training.folds},
                     {"train_fraction", cfg.training.train_fraction},
                     {"contiguous_folds", cfg.training.contiguous_folds},
                     {"shuffle_seed", cfg.training.shuffle_seed}};
    j["seed"] = cfg.seed;
    return j;
}

inline std::string config_hash_hex(const PipelineConfig& cfg) {
    const std::string canonical = config_to_canonical_json(cfg).dump();
    const std::uint64_t h =
        fnv1a(reinterpret_cast<const unsigned char*>(canonical.data()), canonical.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// Digest of the exact labeled windows a training arm consumes.
inline std::string windows_digest(const std::vector<LabeledWindow>& windows) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto fold_bytes = [&h](const void* p, std::size_t len) {
        h = fnv1a(static_cast<const unsigned char*>(p), len, h);
    };
    for (const LabeledWindow& w : windows) {
        const std::uint64_t start = w.start_index;
        fold_bytes(&start, sizeof(start));
        for (double v : w.values) fold_bytes(&v, sizeof(v));
        fold_bytes(&w.label, sizeof(w.label));
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

struct IngestSummary {
    std::size_t rows_in = 0;
    std::size_t leading_dropped = 0;
    std::size_t gaps_filled = 0;
    std::size_t rows_cleaned = 0;
    std::size_t return_count = 0;
};

inline ReturnSeries ingest_series(const PipelineConfig& cfg, IngestSummary* summary = nullptr) {
    const PriceSeries raw = cfg.data.path.empty()
                                ? fetch_csv_url(cfg.data.url, cfg.data.schema)
                                : load_csv(cfg.data.path, cfg.data.schema);
    std::size_t fills = 0;
    std::size_t dropped = 0;
    const PriceSeries cleaned = clean(raw, cfg.cleaning, &fills, &dropped);
    const ReturnSeries returns = daily_returns(cleaned);
    if (summary) {
        summary->rows_in = raw.size();
        summary->leading_dropped = dropped;
        summary->gaps_filled = fills;
        summary->rows_cleaned = cleaned.size();
        summary->return_count = returns.size();
    }
    return returns;
}

// ingest: write the cleaned return series plus a summary of what was done.
inline IngestSummary run_ingest(const PipelineConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    IngestSummary summary;
    const ReturnSeries returns = ingest_series(cfg, &summary);

    std::ofstream csv(out_dir / "returns.csv");
    if (!csv) throw IoError("cannot write " + (out_dir / "returns.csv").string());
    csv << "date,return\n";
    for (std::size_t i = 0; i < returns.size(); ++i) {
        csv << returns.dates[i] << ',' << format_double(returns.returns[i]) << '\n';
    }

    nlohmann::json j;
    j["rows_in"] = summary.rows_in;
    j["leading_dropped"] = summary.leading_dropped;
    j["gaps_filled"] = summary.gaps_filled;
    j["rows_cleaned"] = summary.rows_cleaned;
    j["returns"] = summary.return_count;
    j["cleaning"] = to_string(cfg.cleaning);
    j["config_hash"] = config_hash_hex(cfg);
    j["seed"] = cfg.seed;
    std::ofstream out(out_dir / "ingest_summary.json");
    out << j.dump(2) << "\n";
    return summary;
}

struct EncodeResult {
    std::filesystem::path archive_dir;
    nlohmann::json manifest;
};

// Encode labeled windows with one encoder kind, one archive per window.
// Windows a classical encoder cannot normalize are skipped and recorded.
inline EncodeResult encode_windows(const PipelineConfig& cfg,
                                   const std::vector<LabeledWindow>& windows, FieldKind kind,
                                   const std::filesystem::path& out_dir) {
    const std::filesystem::path archive_dir = out_dir / "archives";
    std::filesystem::create_directories(archive_dir);
    std::filesystem::path pgm_dir;
    if (cfg.imaging.write_pgm) {
        pgm_dir = out_dir / "pgm";
        std::filesystem::create_directories(pgm_dir);
    }

    const nlohmann::json provenance = {{"config_hash", config_hash_hex(cfg)},
                                       {"seed", cfg.seed}};
    std::vector<std::uint64_t> skipped;
    std::size_t written = 0;
    for (const LabeledWindow& w : windows) {
        AngularField field;
        try {
            switch (kind) {
                case FieldKind::GASF:
                    field = gasf(normalize(w.values, cfg.encoder.normalization));
                    break;
                case FieldKind::GADF:
                    field = gadf(normalize(w.values, cfg.encoder.normalization));
                    break;
                case FieldKind::QGASF:
                    field = qgasf_image(w.values, cfg.encoder.qgaf, w.start_index);
                    break;
                case FieldKind::QGADF:
                    field = qgadf_image(w.values, cfg.encoder.qgaf, w.start_index);
                    break;
            }
        } catch (const DegenerateWindowError&) {
            skipped.push_back(w.start_index);
            continue;
        }
        field.kind = kind;
        field.source_window_start = w.start_index;
        const std::string stem = "win_" + std::to_string(w.start_index);
        write_archive(field, static_cast<float>(w.label), archive_dir / (stem + ".qgaf"),
                      provenance);
        if (cfg.imaging.write_pgm) {
            write_pgm(field_to_gray(field, w.label), pgm_dir / (stem + ".pgm"));
        }
        ++written;
    }

    nlohmann::json manifest;
    manifest["count"] = written;
    manifest["encoder"] = to_string(kind);
    manifest["seed"] = cfg.seed;
    manifest["label_mode"] = to_string(cfg.window.label_mode);
    manifest["skipped"] = skipped;
    manifest["windows_digest"] = windows_digest(windows);
    manifest["config_hash"] = config_hash_hex(cfg);
    manifest["shots"] = cfg.encoder.qgaf.shots;
    manifest["sign_mode"] = to_string(cfg.encoder.qgaf.sign_mode);
    manifest["exact_p"] = cfg.encoder.qgaf.exact_p;
    manifest["normalization"] = to_string(cfg.encoder.normalization);
    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + out_dir.string());
    out << manifest.dump(2) << "\n";
    return EncodeResult{archive_dir, std::move(manifest)};
}

inline EncodeResult run_encode(const PipelineConfig& cfg, const std::filesystem::path& out_dir) {
    const ReturnSeries returns = ingest_series(cfg);
    const std::vector<LabeledWindow> windows = segment_and_label(returns, cfg.window);
    return encode_windows(cfg, windows, cfg.encoder.kind, out_dir);
}

struct TrainOutput {
    EncoderMetrics aggregate;
    nlohmann::json metrics;
};

// Cross-validate archives from a directory; write per-fold loss CSVs,
// per-fold checkpoints, aggregate metrics JSON, and an SVG of the mean
// train/val curves.
inline TrainOutput run_train(const PipelineConfig& cfg, const std::filesystem::path& archive_dir,
                             const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir / "folds");
    std::filesystem::create_directories(out_dir / "checkpoints");

    FieldKind kind = FieldKind::GASF;
    const Dataset dataset = load_dataset(archive_dir, &kind);
    const CvResult cv = cross_validate(dataset, cfg.training);

    nlohmann::json fold_metrics = nlohmann::json::array();
    std::vector<double> mean_train(cfg.training.epochs, 0.0);
    std::vector<double> mean_val(cfg.training.epochs, 0.0);
    for (std::size_t k = 0; k < cv.folds.size(); ++k) {
        const FoldReport& report = cv.folds[k].report;
        write_fold_csv(report, out_dir / "folds" / ("fold_" + std::to_string(k) + ".csv"));
        save_checkpoint(cv.folds[k].model, cv.folds[k].state,
                        out_dir / "checkpoints" / ("fold_" + std::to_string(k) + ".qcnn"));
        fold_metrics.push_back({{"mae", report.final_mae}, {"mse", report.final_mse}});
        for (std::size_t e = 0; e < cfg.training.epochs; ++e) {
            mean_train[e] += report.train_loss[e] / static_cast<double>(cv.folds.size());
            mean_val[e] += report.val_loss[e] / static_cast<double>(cv.folds.size());
        }
    }

    nlohmann::json metrics;
    metrics["aggregate"] = {{"mae", cv.aggregate_mae}, {"mse", cv.aggregate_mse}};
    metrics["folds"] = fold_metrics;
    metrics["curves"] = {{"train", mean_train}, {"val", mean_val}};
    metrics["provenance"] = {{"config_hash", config_hash_hex(cfg)},
                             {"seed", cfg.seed},
                             {"shuffle_seed", cfg.training.shuffle_seed},
                             {"encoder", to_string(kind)},
                             {"loss", to_string(cfg.training.loss)},
                             {"epochs", cfg.training.epochs},
                             {"folds", cfg.training.folds},
                             {"fold_mode", cfg.training.contiguous_folds ? "contiguous" : "shuffled"},
                             {"samples", dataset.size()}};
    std::ofstream out(out_dir / "metrics.json");
    if (!out) throw IoError("cannot write metrics in " + out_dir.string());
    out << metrics.dump(2) << "\n";

    write_loss_curve_svg(mean_train, mean_val,
                         std::string(to_string(kind)) + " " + to_string(cfg.training.loss) +
                             " loss (mean over folds)",
                         out_dir / "loss_curves.svg");
    return TrainOutput{{cv.aggregate_mae, cv.aggregate_mse}, std::move(metrics)};
}

// Hard gate: two training runs are only comparable when they consumed the
// same windows and used the same split seed and fold mode.
inline void ensure_comparable(const nlohmann::json& manifest_a, const nlohmann::json& metrics_a,
                              const nlohmann::json& manifest_b, const nlohmann::json& metrics_b) {
    if (manifest_a.at("windows_digest") != manifest_b.at("windows_digest")) {
        throw ValidationError("cannot compare: window digests differ");
    }
    if (metrics_a.at("provenance").at("shuffle_seed") !=
        metrics_b.at("provenance").at("shuffle_seed")) {
        throw ValidationError("cannot compare: split seeds differ");
    }
    if (metrics_a.at("provenance").at("fold_mode") != metrics_b.at("provenance").at("fold_mode")) {
        throw ValidationError("cannot compare: fold modes differ");
    }
}

// Run the GASF and QGASF arms on literally identical labeled windows and
// identical splits, then report per-encoder metrics and reductions.
inline ComparisonReport run_compare(const PipelineConfig& cfg,
                                    const std::filesystem::path& out_root) {
    std::filesystem::create_directories(out_root);
    const ReturnSeries returns = ingest_series(cfg);
    std::vector<LabeledWindow> windows = segment_and_label(returns, cfg.window);

    // Drop windows the classical arm cannot normalize so both arms see the
    // same sample set.
    std::vector<std::uint64_t> dropped;
    std::erase_if(windows, [&dropped](const LabeledWindow& w) {
        const auto [lo, hi] = std::minmax_element(w.values.begin(), w.values.end());
        if (*lo == *hi) {
            dropped.push_back(w.start_index);
            return true;
        }
        return false;
    });
    if (windows.empty()) throw ValidationError("no usable windows to compare");

    PipelineConfig gasf_cfg = cfg;
    gasf_cfg.encoder.kind = FieldKind::GASF;
    PipelineConfig qgasf_cfg = cfg;
    qgasf_cfg.encoder.kind = FieldKind::QGASF;

    const EncodeResult enc_gasf = encode_windows(gasf_cfg, windows, FieldKind::GASF,
                                                 out_root / "gasf");
    const EncodeResult enc_qgasf = encode_windows(qgasf_cfg, windows, FieldKind::QGASF,
                                                  out_root / "qgasf");
    const TrainOutput train_gasf = run_train(gasf_cfg, enc_gasf.archive_dir, out_root / "gasf");
    const TrainOutput train_qgasf = run_train(qgasf_cfg, enc_qgasf.archive_dir,
                                              out_root / "qgasf");
    ensure_comparable(enc_gasf.manifest, train_gasf.metrics, enc_qgasf.manifest,
                      train_qgasf.metrics);

    nlohmann::json provenance;
    provenance["config_hash"] = config_hash_hex(cfg);
    provenance["seed"] = cfg.seed;
    provenance["shuffle_seed"] = cfg.training.shuffle_seed;
    provenance["windows_digest"] = enc_gasf.manifest.at("windows_digest");
    provenance["windows"] = windows.size();
    provenance["dropped_degenerate"] = dropped;
    provenance["shots"] = cfg.encoder.qgaf.shots;
    provenance["sign_mode"] = to_string(cfg.encoder.qgaf.sign_mode);
    provenance["exact_p"] = cfg.encoder.qgaf.exact_p;
    provenance["label_mode"] = to_string(cfg.window.label_mode);
    provenance["loss"] = to_string(cfg.training.loss);
    provenance["fold_mode"] = cfg.training.contiguous_folds ? "contiguous" : "shuffled";

    const ComparisonReport report = ComparisonReport::build(
        cfg.name, train_gasf.aggregate, train_qgasf.aggregate, provenance);

    std::ofstream json_out(out_root / "comparison.json");
    if (!json_out) throw IoError("cannot write comparison.json");
    json_out << report.to_json().dump(2) << "\n";
    std::ofstream table_out(out_root / "comparison_table.csv");
    table_out << report.table_csv();
    return report;
}

}  // namespace qgaf
