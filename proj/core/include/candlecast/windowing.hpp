#pragma once

#include <cstddef>
#include <iosfwd>
#include <utility>
#include <vector>

#include "candlecast/direction.hpp"
#include "candlecast/market_data.hpp"

namespace candlecast::windows {

/// Shape of one dataset cell: how many trading days per window, the square
/// image side in pixels, whether a volume panel is drawn, and how many
/// trading days ahead the label looks.
struct DatasetSpec {
    int period = 20;        // trading days per window
    int dimension = 50;     // image side in pixels
    bool volume_panel = false;
    int horizon = 1;        // label look-ahead in trading days

    /// period >= 2, dimension >= period (every candle needs a column),
    /// horizon >= 1. Throws ConfigError otherwise.
    void validate() const;
};

/// A window of exactly `period` consecutive bars plus its direction label.
/// label_date is the date of the bar `horizon` trading days past the window.
struct LabeledSample {
    std::vector<market::Bar> window;
    Direction label = Direction::Down;
    Date label_date;

    const Date& window_start() const { return window.front().date; }
    const Date& window_end() const { return window.back().date; }
};

/// Up iff future_close > window_last_close; ties are Down (no gain is not up).
inline Direction label_direction(double window_last_close, double future_close) {
    return future_close > window_last_close ? Direction::Up : Direction::Down;
}

struct WindowingResult {
    std::vector<LabeledSample> samples;
    /// Set when the series is shorter than period + horizon.
    bool too_short = false;
};

/// Stride-1 sliding windows over an already-split series. Produces exactly
/// len - period - horizon + 1 samples when len >= period + horizon; sample i
/// covers bars [i, i + period) and is labeled from bar i + period + horizon - 1.
WindowingResult sliding_windows(const market::Series& series, const DatasetSpec& spec);

/// (up_count, down_count)
std::pair<std::size_t, std::size_t> class_balance(const std::vector<LabeledSample>& samples);

/// Audit manifest, one CSV line per sample: ticker, window start/end, label.
void write_manifest(const std::vector<LabeledSample>& samples, const std::string& ticker,
                    std::ostream& out);

} // namespace candlecast::windows
