#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "candlecast/market_data.hpp"
#include "candlecast/tensor.hpp"
#include "candlecast/windowing.hpp"

namespace candlecast::chart {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

// Fixed palette. Saturated colors, white ground; every rendered pixel is
// exactly one of these four.
inline constexpr Rgb kBackground{255, 255, 255};
inline constexpr Rgb kBullish{0, 255, 0};
inline constexpr Rgb kBearish{255, 0, 0};
inline constexpr Rgb kVolumeBar{0, 0, 0};

/// Square RGB raster, row-major, 8 bits per channel.
struct ChartImage {
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;

    static ChartImage blank(int dimension) {
        ChartImage img;
        img.width = img.height = dimension;
        img.pixels.assign(std::size_t(dimension) * std::size_t(dimension), kBackground);
        return img;
    }

    Rgb& at(int row, int col) { return pixels[std::size_t(row) * width + col]; }
    const Rgb& at(int row, int col) const { return pixels[std::size_t(row) * width + col]; }
    bool operator==(const ChartImage&) const = default;
};

/// Pixel geometry of a chart: which rows belong to the price and volume
/// panels (half-open ranges) and how wide candles and gaps are.
struct ChartLayout {
    int price_rows_begin = 0;
    int price_rows_end = 0;   // exclusive
    int volume_rows_begin = 0; // == volume_rows_end when no volume panel
    int volume_rows_end = 0;   // exclusive
    int candle_width = 1;
    int gap = 1;
    int wick_width = 1;

    int price_panel_height() const { return price_rows_end - price_rows_begin; }
    int volume_panel_height() const { return volume_rows_end - volume_rows_begin; }
};

/// Layout rule: candle_width = dimension/period - 1 with a 1-pixel gap;
/// when that would leave no body, candles are 1 pixel wide with no gap.
/// The volume panel takes the bottom dimension/5 rows plus one separator row.
ChartLayout compute_layout(const windows::DatasetSpec& spec);

/// Maps a price to a 0-based row inside a panel: row 0 is hi, the bottom row
/// is lo, and ties round half away from zero. A degenerate scale (hi == lo)
/// maps everything to the middle row. Throws ContractError when p is outside
/// [lo, hi] or the panel is empty.
int price_to_row(double p, double lo, double hi, int panel_height);

/// Deterministically rasterizes a window of bars: per bar one candle (real
/// body between the open and close rows, 1-pixel wick from high to low),
/// green when close > open, red otherwise; optionally a bottom-anchored
/// volume bar panel. The vertical scale is min(low)..max(high) over the
/// window. Identical windows produce identical pixels.
ChartImage render_window(const std::vector<market::Bar>& window,
                         const windows::DatasetSpec& spec);

/// (height, width, 3) float tensor, channel/255 in [0, 1].
nn::Tensor to_tensor(const ChartImage& img);

/// `<ticker>_<window_end>_<period>_<dimension>_<vol|novol>.png`
std::string chart_filename(const std::string& ticker, const Date& window_end,
                           const windows::DatasetSpec& spec);

} // namespace candlecast::chart
