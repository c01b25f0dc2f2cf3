#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qgaf/errors.hpp"

namespace qgaf {

// Column names of the input CSV. Header row is required.
struct CsvSchema {
    std::string date_column = "date";
    std::string close_column = "close";
};

// Dated closing prices, sorted ascending. An empty cell in the CSV becomes
// a missing close; cleaning removes the gaps.
struct PriceSeries {
    std::vector<std::string> dates;
    std::vector<std::optional<double>> closes;

    std::size_t size() const { return dates.size(); }
};

// Dated daily returns: returns[t] = (close[t+1] - close[t]) / close[t],
// stamped with the later date.
struct ReturnSeries {
    std::vector<std::string> dates;
    std::vector<double> returns;

    std::size_t size() const { return returns.size(); }
};

enum class CleaningPolicy { forward_fill, ma5 };

inline const char* to_string(CleaningPolicy p) {
    return p == CleaningPolicy::forward_fill ? "forward_fill" : "ma5";
}

inline CleaningPolicy cleaning_policy_from_string(std::string_view s) {
    if (s == "forward_fill") return CleaningPolicy::forward_fill;
    if (s == "ma5") return CleaningPolicy::ma5;
    throw ConfigError("unknown cleaning policy: " + std::string(s));
}

namespace detail {

inline bool is_leap_year(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

// Strict ISO-8601 calendar date: YYYY-MM-DD with a real month/day.
inline bool is_valid_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    const int y = (s[0] - '0') * 1000 + (s[1] - '0') * 100 + (s[2] - '0') * 10 + (s[3] - '0');
    const int m = (s[5] - '0') * 10 + (s[6] - '0');
    const int d = (s[8] - '0') * 10 + (s[9] - '0');
    if (m < 1 || m > 12 || d < 1) return false;
    static constexpr int days[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int dmax = days[m - 1];
    if (m == 2 && is_leap_year(y)) dmax = 29;
    return d <= dmax;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

inline double parse_close(std::string_view field, std::size_t line_no) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(value)) {
        throw ParseError("line " + std::to_string(line_no) + ": malformed close value '" +
                         std::string(field) + "'");
    }
    return value;
}

}  // namespace detail

// Parse a price CSV from a stream. Rows are sorted ascending by date;
// duplicate dates and empty inputs are rejected.
inline PriceSeries parse_price_csv(std::istream& in, const CsvSchema& schema = {}) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty CSV: no header row");

    const auto header = detail::split_csv_line(line);
    std::size_t date_idx = header.size();
    std::size_t close_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == schema.date_column) date_idx = i;
        if (header[i] == schema.close_column) close_idx = i;
    }
    if (date_idx == header.size()) {
        throw ParseError("header missing date column '" + schema.date_column + "'");
    }
    if (close_idx == header.size()) {
        throw ParseError("header missing close column '" + schema.close_column + "'");
    }

    struct Row {
        std::string date;
        std::optional<double> close;
    };
    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() <= std::max(date_idx, close_idx)) {
            throw ParseError("line " + std::to_string(line_no) + ": expected at least " +
                             std::to_string(std::max(date_idx, close_idx) + 1) + " fields, got " +
                             std::to_string(fields.size()));
        }
        const auto date = fields[date_idx];
        if (!detail::is_valid_date(date)) {
            throw ParseError("line " + std::to_string(line_no) + ": invalid date '" +
                             std::string(date) + "'");
        }
        Row row{std::string(date), std::nullopt};
        if (!fields[close_idx].empty()) {
            row.close = detail::parse_close(fields[close_idx], line_no);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError("CSV has no data rows");

    // ISO dates sort lexicographically in calendar order.
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].date == rows[i - 1].date) {
            throw ValidationError("duplicate date " + rows[i].date);
        }
    }

    PriceSeries series;
    series.dates.reserve(rows.size());
    series.closes.reserve(rows.size());
    for (auto& row : rows) {
        series.dates.push_back(std::move(row.date));
        series.closes.push_back(row.close);
    }
    return series;
}

inline PriceSeries load_csv(const std::filesystem::path& path, const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_price_csv(in, schema);
}

// Fill missing closes. forward_fill carries the last seen close; ma5 uses
// the mean of up to 5 immediately preceding (already filled) closes.
// Leading gaps have no prior data and are dropped.
inline PriceSeries clean(const PriceSeries& series, CleaningPolicy policy,
                         std::size_t* gaps_filled = nullptr, std::size_t* leading_dropped = nullptr) {
    if (series.size() == 0) throw ValidationError("cannot clean an empty series");

    std::size_t first = 0;
    while (first < series.size() && !series.closes[first].has_value()) ++first;
    if (first == series.size()) throw ValidationError("all closes are missing");
    if (leading_dropped) *leading_dropped = first;

    PriceSeries out;
    out.dates.assign(series.dates.begin() + static_cast<std::ptrdiff_t>(first), series.dates.end());
    std::vector<double> closes;
    closes.reserve(series.size() - first);
    std::size_t fills = 0;
    for (std::size_t i = first; i < series.size(); ++i) {
        if (series.closes[i].has_value()) {
            closes.push_back(*series.closes[i]);
            continue;
        }
        ++fills;
        if (policy == CleaningPolicy::forward_fill) {
            closes.push_back(closes.back());
        } else {
            const std::size_t k = std::min<std::size_t>(5, closes.size());
            const double sum = std::accumulate(closes.end() - static_cast<std::ptrdiff_t>(k),
                                               closes.end(), 0.0);
            closes.push_back(sum / static_cast<double>(k));
        }
    }
    if (gaps_filled) *gaps_filled = fills;
    out.closes.reserve(closes.size());
    for (double c : closes) out.closes.emplace_back(c);
    return out;
}

// R_t = (close_t - close_{t-1}) / close_{t-1}.
inline ReturnSeries daily_returns(const PriceSeries& series) {
    if (series.size() < 2) throw ValidationError("need at least 2 prices to compute returns");
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (!series.closes[i].has_value()) {
            throw ValidationError("series has missing closes; clean it first");
        }
        if (*series.closes[i] <= 0.0) {
            throw ValidationError("non-positive close at " + series.dates[i]);
        }
    }
    ReturnSeries out;
    out.dates.assign(series.dates.begin() + 1, series.dates.end());
    out.returns.reserve(series.size() - 1);
    for (std::size_t i = 1; i < series.size(); ++i) {
        const double prev = *series.closes[i - 1];
        out.returns.push_back((*series.closes[i] - prev) / prev);
    }
    return out;
}

// Interval return over a window: prod(1 + R_t). This is the growth factor,
// ~1.0 for a flat window, not the net change.
inline double interval_return(std::span<const double> window) {
    if (window.empty()) throw ValidationError("interval_return of an empty window");
    double product = 1.0;
    for (double r : window) {
        if (1.0 + r <= 0.0) {
            throw ValidationError("interval_return: 1 + R must be positive, got R = " +
                                  std::to_string(r));
        }
        product *= 1.0 + r;
    }
    return product;
}

// Net variant for reporting: growth factor minus one.
inline double interval_return_net(std::span<const double> window) {
    return interval_return(window) - 1.0;
}

}  // namespace qgaf
