#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "qgaf/errors.hpp"
#include "qgaf/marketdata.hpp"

namespace qgaf {

// same_window labels a window with its own interval return; next_horizon
// labels it with the interval return of the `horizon` days that follow it.
enum class LabelMode { same_window, next_horizon };

inline const char* to_string(LabelMode m) {
    return m == LabelMode::same_window ? "same_window" : "next_horizon";
}

inline LabelMode label_mode_from_string(std::string_view s) {
    if (s == "same_window") return LabelMode::same_window;
    if (s == "next_horizon") return LabelMode::next_horizon;
    throw ConfigError("unknown label mode: " + std::string(s));
}

struct WindowConfig {
    std::size_t window_size = 30;
    std::size_t stride = 10;
    LabelMode label_mode = LabelMode::same_window;
    std::size_t horizon = 30;

    void validate() const {
        if (window_size < 2) throw ValidationError("window_size must be >= 2");
        if (stride == 0) throw ValidationError("stride must be positive");
        if (stride > window_size) throw ValidationError("stride must not exceed window_size");
        if (label_mode == LabelMode::next_horizon && horizon == 0) {
            throw ValidationError("horizon must be positive");
        }
    }
};

struct Window {
    std::size_t start_index = 0;
    std::vector<double> values;
};

struct LabeledWindow {
    std::size_t start_index = 0;
    std::vector<double> values;
    double label = 0.0;
};

// Windows start at 0, stride, 2*stride, ...; only complete windows are kept.
inline std::vector<Window> segment(const ReturnSeries& series, const WindowConfig& cfg) {
    cfg.validate();
    if (series.size() < cfg.window_size) {
        throw ValidationError("series length " + std::to_string(series.size()) +
                              " is shorter than window_size " + std::to_string(cfg.window_size));
    }
    std::vector<Window> windows;
    for (std::size_t start = 0; start + cfg.window_size <= series.size(); start += cfg.stride) {
        Window w;
        w.start_index = start;
        w.values.assign(series.returns.begin() + static_cast<std::ptrdiff_t>(start),
                        series.returns.begin() + static_cast<std::ptrdiff_t>(start + cfg.window_size));
        windows.push_back(std::move(w));
    }
    return windows;
}

// Attach regression labels. In next_horizon mode, windows without a full
// horizon after them are dropped.
inline std::vector<LabeledWindow> label_windows(const ReturnSeries& series,
                                                const std::vector<Window>& windows,
                                                const WindowConfig& cfg) {
    cfg.validate();
    std::vector<LabeledWindow> out;
    out.reserve(windows.size());
    for (const Window& w : windows) {
        LabeledWindow lw;
        lw.start_index = w.start_index;
        lw.values = w.values;
        if (cfg.label_mode == LabelMode::same_window) {
            lw.label = interval_return(lw.values);
        } else {
            const std::size_t horizon_start = w.start_index + cfg.window_size;
            if (horizon_start + cfg.horizon > series.size()) continue;
            lw.label = interval_return(std::span<const double>(
                series.returns.data() + horizon_start, cfg.horizon));
        }
        if (!std::isfinite(lw.label)) {
            throw ValidationError("non-finite label for window at " +
                                  std::to_string(w.start_index));
        }
        out.push_back(std::move(lw));
    }
    return out;
}

inline std::vector<LabeledWindow> segment_and_label(const ReturnSeries& series,
                                                    const WindowConfig& cfg) {
    return label_windows(series, segment(series, cfg), cfg);
}

}  // namespace qgaf
