#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qgaf/pipeline.hpp"

namespace {

namespace fs = std::filesystem;

nlohmann::json load_config_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw qgaf::IoError("cannot open config " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw qgaf::ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> encoder;
    std::optional<std::string> out;
    bool exact = false;
};

// Overrides are applied to the JSON before parsing so that derived defaults
// (shuffle seed, stream seeds) resolve from the effective values.
qgaf::PipelineConfig resolve_config(const std::string& path, const Overrides& ov) {
    nlohmann::json j = load_config_json(path);
    if (ov.seed) j["seed"] = *ov.seed;
    if (ov.encoder) j["encoder"]["kind"] = *ov.encoder;
    if (ov.exact) j["encoder"]["exact_p"] = true;
    if (ov.out) j["out_dir"] = *ov.out;
    return qgaf::config_from_json(j);
}

int cmd_ingest(const qgaf::PipelineConfig& cfg) {
    const qgaf::IngestSummary s = qgaf::run_ingest(cfg, cfg.out_dir);
    std::cout << "wrote " << s.return_count << " returns to " << cfg.out_dir
              << "/returns.csv (cleaned " << s.rows_cleaned << " rows, filled " << s.gaps_filled
              << " gaps, dropped " << s.leading_dropped << " leading)\n";
    return 0;
}

int cmd_encode(const qgaf::PipelineConfig& cfg) {
    const qgaf::EncodeResult r = qgaf::run_encode(cfg, cfg.out_dir);
    std::cout << "wrote " << r.manifest.at("count").get<std::size_t>() << " "
              << r.manifest.at("encoder").get<std::string>() << " archives to "
              << r.archive_dir.string() << " (skipped "
              << r.manifest.at("skipped").size() << ")\n";
    return 0;
}

int cmd_train(const qgaf::PipelineConfig& cfg, const std::optional<std::string>& archives) {
    const fs::path archive_dir = archives ? fs::path(*archives)
                                          : fs::path(cfg.out_dir) / "archives";
    const qgaf::TrainOutput out = qgaf::run_train(cfg, archive_dir, cfg.out_dir);
    std::cout << "aggregate MAE " << qgaf::format_double(out.aggregate.mae) << ", MSE "
              << qgaf::format_double(out.aggregate.mse) << " over "
              << cfg.training.folds << " folds (" << cfg.out_dir << "/metrics.json)\n";
    return 0;
}

int cmd_compare(const qgaf::PipelineConfig& cfg) {
    const qgaf::ComparisonReport report = qgaf::run_compare(cfg, cfg.out_dir);
    std::cout << report.table_csv();
    std::cout << "MAE reduction: " << qgaf::format_double(report.mae_reduction_pct) << "%\n";
    std::cout << "MSE reduction: " << qgaf::format_double(report.mse_reduction_pct) << "%\n";
    return 0;
}

int cmd_report(const std::string& config_path, bool check_config, const std::string& from,
               const Overrides& ov) {
    if (check_config) {
        if (config_path.empty()) {
            throw qgaf::ConfigError("report --check-config needs --config <path>");
        }
        const qgaf::PipelineConfig cfg = resolve_config(config_path, ov);
        std::cout << "config OK (hash " << qgaf::config_hash_hex(cfg) << ")\n";
        return 0;
    }
    if (from.empty()) {
        throw qgaf::ConfigError("report needs --check-config or --from <comparison.json>");
    }
    std::ifstream in(from);
    if (!in) throw qgaf::IoError("cannot open " + from);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw qgaf::ConfigError("comparison file is not valid JSON: " + std::string(e.what()));
    }
    qgaf::ComparisonReport report = qgaf::ComparisonReport::from_json(j);
    // Recompute the reductions from the stored metrics; the file's own
    // numbers are not trusted.
    report.mae_reduction_pct = qgaf::reduction_pct(report.gasf.mae, report.qgasf.mae);
    report.mse_reduction_pct = qgaf::reduction_pct(report.gasf.mse, report.qgasf.mse);
    std::cout << report.table_csv();
    std::cout << "MAE reduction: " << qgaf::format_double(report.mae_reduction_pct) << "%\n";
    std::cout << "MSE reduction: " << qgaf::format_double(report.mse_reduction_pct) << "%\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Angular-field image encoding and CNN training for return series"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;
    std::optional<std::string> archives;
    bool check_config = false;
    std::string from_path;

    auto add_common = [&](CLI::App* sub, bool config_required = true) {
        auto* opt = sub->add_option("--config", config_path, "pipeline config JSON");
        if (config_required) opt->required();
        sub->add_option("--seed", ov.seed, "override the global seed");
        sub->add_option("--encoder", ov.encoder, "override the encoder kind");
        sub->add_flag("--exact", ov.exact, "use exact probabilities instead of shot sampling");
        sub->add_option("--out", ov.out, "override the output directory");
    };

    CLI::App* ingest = app.add_subcommand("ingest", "load, clean, and write the return series");
    add_common(ingest);
    CLI::App* encode = app.add_subcommand("encode", "encode labeled windows into archives");
    add_common(encode);
    CLI::App* train = app.add_subcommand("train", "cross-validate a CNN on encoded archives");
    add_common(train);
    train->add_option("--archives", archives, "archive directory (default <out>/archives)");
    CLI::App* compare =
        app.add_subcommand("compare", "run GASF and QGASF end to end on identical splits");
    add_common(compare);
    CLI::App* report = app.add_subcommand("report", "validate configs or re-render comparisons");
    add_common(report, false);
    report->add_flag("--check-config", check_config, "validate the config and print its hash");
    report->add_option("--from", from_path, "re-render a comparison.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(report)) {
            return cmd_report(config_path, check_config, from_path, ov);
        }
        const qgaf::PipelineConfig cfg = resolve_config(config_path, ov);
        if (app.got_subcommand(ingest)) return cmd_ingest(cfg);
        if (app.got_subcommand(encode)) return cmd_encode(cfg);
        if (app.got_subcommand(train)) return cmd_train(cfg, archives);
        if (app.got_subcommand(compare)) return cmd_compare(cfg);
        return 2;
    } catch (const qgaf::TrainingFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const qgaf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
