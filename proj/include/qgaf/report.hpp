#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qgaf/errors.hpp"
#include "qgaf/training.hpp"

namespace qgaf {

// Percentage improvement of `improved` over `base`: 100 * (base - improved) / base.
inline double reduction_pct(double base, double improved) {
    if (base == 0.0) throw ValidationError("reduction_pct: baseline metric is zero");
    return 100.0 * (base - improved) / base;
}

struct EncoderMetrics {
    double mae = 0.0;
    double mse = 0.0;
};

struct ComparisonReport {
    std::string stock;
    EncoderMetrics gasf;
    EncoderMetrics qgasf;
    double mae_reduction_pct = 0.0;
    double mse_reduction_pct = 0.0;
    nlohmann::json provenance;  // seeds, config hash, mode flags

    static ComparisonReport build(std::string stock_name, EncoderMetrics gasf_metrics,
                                  EncoderMetrics qgasf_metrics, nlohmann::json prov) {
        ComparisonReport r;
        r.stock = std::move(stock_name);
        r.gasf = gasf_metrics;
        r.qgasf = qgasf_metrics;
        r.mae_reduction_pct = reduction_pct(gasf_metrics.mae, qgasf_metrics.mae);
        r.mse_reduction_pct = reduction_pct(gasf_metrics.mse, qgasf_metrics.mse);
        r.provenance = std::move(prov);
        return r;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["stock"] = stock;
        j["gasf"] = {{"mae", gasf.mae}, {"mse", gasf.mse}};
        j["qgasf"] = {{"mae", qgasf.mae}, {"mse", qgasf.mse}};
        j["reduction_pct"] = {{"mae", mae_reduction_pct}, {"mse", mse_reduction_pct}};
        j["provenance"] = provenance;
        return j;
    }

    static ComparisonReport from_json(const nlohmann::json& j) {
        ComparisonReport r;
        r.stock = j.at("stock").get<std::string>();
        r.gasf = {j.at("gasf").at("mae").get<double>(), j.at("gasf").at("mse").get<double>()};
        r.qgasf = {j.at("qgasf").at("mae").get<double>(), j.at("qgasf").at("mse").get<double>()};
        r.mae_reduction_pct = j.at("reduction_pct").at("mae").get<double>();
        r.mse_reduction_pct = j.at("reduction_pct").at("mse").get<double>();
        if (j.contains("provenance")) r.provenance = j.at("provenance");
        return r;
    }

    // One row per encoder, MAE and MSE columns per stock.
    std::string table_csv() const {
        std::string csv = "model," + stock + "_MAE," + stock + "_MSE\n";
        csv += "GASF," + format_double(gasf.mae) + "," + format_double(gasf.mse) + "\n";
        csv += "QGASF," + format_double(qgasf.mae) + "," + format_double(qgasf.mse) + "\n";
        return csv;
    }
};

namespace detail {

inline std::string svg_polyline(const std::vector<double>& ys, double y_min, double y_max,
                                double x0, double y0, double width, double height,
                                const char* color) {
    std::string points;
    const std::size_t n = ys.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double fx = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
        const double fy = y_max > y_min ? (ys[i] - y_min) / (y_max - y_min) : 0.5;
        points += format_double(x0 + fx * width) + "," + format_double(y0 + (1.0 - fy) * height) + " ";
    }
    return "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
}

}  // namespace detail

// Minimal line plot: axes, two labelled curves, epoch on x.
inline void write_loss_curve_svg(const std::vector<double>& train_curve,
                                 const std::vector<double>& val_curve,
                                 const std::string& title,
                                 const std::filesystem::path& path) {
    if (train_curve.empty()) throw ValidationError("empty loss curve");
    double lo = train_curve[0];
    double hi = train_curve[0];
    for (double v : train_curve) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : val_curve) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) hi = lo + 1.0;

    const double x0 = 50, y0 = 30, w = 520, h = 320;
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"620\" height=\"420\">\n";
    svg += "<text x=\"50\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" + title +
           "</text>\n";
    svg += "<line x1=\"50\" y1=\"350\" x2=\"570\" y2=\"350\" stroke=\"black\"/>\n";
    svg += "<line x1=\"50\" y1=\"30\" x2=\"50\" y2=\"350\" stroke=\"black\"/>\n";
    svg += "<text x=\"290\" y=\"385\" font-family=\"sans-serif\" font-size=\"12\">epoch</text>\n";
    svg += "<text x=\"12\" y=\"190\" font-family=\"sans-serif\" font-size=\"12\" "
           "transform=\"rotate(-90 12,190)\">loss</text>\n";
    svg += "<text x=\"60\" y=\"45\" font-family=\"sans-serif\" font-size=\"11\" "
           "fill=\"#1f77b4\">train</text>\n";
    svg += "<text x=\"60\" y=\"60\" font-family=\"sans-serif\" font-size=\"11\" "
           "fill=\"#d62728\">val</text>\n";
    svg += "<text x=\"42\" y=\"355\" font-family=\"sans-serif\" font-size=\"10\" "
           "text-anchor=\"end\">" + format_double(lo) + "</text>\n";
    svg += "<text x=\"42\" y=\"38\" font-family=\"sans-serif\" font-size=\"10\" "
           "text-anchor=\"end\">" + format_double(hi) + "</text>\n";
    svg += detail::svg_polyline(train_curve, lo, hi, x0, y0, w, h, "#1f77b4");
    if (!val_curve.empty() && std::isfinite(val_curve[0])) {
        svg += detail::svg_polyline(val_curve, lo, hi, x0, y0, w, h, "#d62728");
    }
    svg += "</svg>\n";

    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << svg;
}

}  // namespace qgaf
