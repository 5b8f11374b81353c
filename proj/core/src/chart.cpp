#include "candlecast/chart.hpp"

#include <algorithm>
#include <cmath>

#include "candlecast/error.hpp"

namespace candlecast::chart {

ChartLayout compute_layout(const windows::DatasetSpec& spec) {
    spec.validate();
    ChartLayout layout;
    layout.candle_width = spec.dimension / spec.period - 1;
    layout.gap = 1;
    if (layout.candle_width < 1) {
        layout.candle_width = 1;
        layout.gap = 0;
    }
    layout.wick_width = 1;

    if (spec.volume_panel) {
        const int volume_rows = spec.dimension / 5;
        layout.volume_rows_end = spec.dimension;
        layout.volume_rows_begin = spec.dimension - volume_rows;
        // One background separator row between the panels.
        layout.price_rows_begin = 0;
        layout.price_rows_end = layout.volume_rows_begin - 1;
    } else {
        layout.price_rows_begin = 0;
        layout.price_rows_end = spec.dimension;
        layout.volume_rows_begin = layout.volume_rows_end = spec.dimension;
    }

    const int used = spec.period * (layout.candle_width + layout.gap) - layout.gap;
    if (used > spec.dimension)
        throw ContractError("layout overflow: " + std::to_string(used) + " columns for width " +
                            std::to_string(spec.dimension));
    return layout;
}

int price_to_row(double p, double lo, double hi, int panel_height) {
    if (panel_height < 1) throw ContractError("panel_height must be >= 1");
    if (p < lo || p > hi)
        throw ContractError("price " + std::to_string(p) + " outside scale [" +
                            std::to_string(lo) + ", " + std::to_string(hi) + "]");
    if (hi == lo) return (panel_height - 1) / 2;
    return int(std::llround((hi - p) / (hi - lo) * double(panel_height - 1)));
}

ChartImage render_window(const std::vector<market::Bar>& window,
                         const windows::DatasetSpec& spec) {
    if (window.size() != std::size_t(spec.period))
        throw ContractError("window has " + std::to_string(window.size()) +
                            " bars, spec.period is " + std::to_string(spec.period));
    for (const auto& bar : window)
        if (!bar.is_valid()) throw ContractError("invalid bar at " + bar.date.to_string());

    const ChartLayout layout = compute_layout(spec);
    ChartImage img = ChartImage::blank(spec.dimension);

    double lo = window.front().low;
    double hi = window.front().high;
    std::uint64_t max_volume = 0;
    for (const auto& bar : window) {
        lo = std::min(lo, bar.low);
        hi = std::max(hi, bar.high);
        max_volume = std::max(max_volume, bar.volume);
    }

    const int panel_h = layout.price_panel_height();
    const int stride = layout.candle_width + layout.gap;

    for (int k = 0; k < spec.period; ++k) {
        const market::Bar& bar = window[std::size_t(k)];
        const int col0 = k * stride;
        const Rgb color = bar.close > bar.open ? kBullish : kBearish;

        const int row_open = price_to_row(bar.open, lo, hi, panel_h);
        const int row_close = price_to_row(bar.close, lo, hi, panel_h);
        const int row_high = price_to_row(bar.high, lo, hi, panel_h);
        const int row_low = price_to_row(bar.low, lo, hi, panel_h);

        // Wick: wick_width columns centred in the body (left of centre when
        // the body width is even), spanning high to low.
        const int wick_col = col0 + (layout.candle_width - layout.wick_width) / 2;
        for (int row = row_high; row <= row_low; ++row)
            for (int w = 0; w < layout.wick_width; ++w)
                img.at(layout.price_rows_begin + row, wick_col + w) = color;

        // Real body: inclusive row range, so a doji still gets one pixel row.
        const int body_top = std::min(row_open, row_close);
        const int body_bottom = std::max(row_open, row_close);
        for (int row = body_top; row <= body_bottom; ++row)
            for (int col = col0; col < col0 + layout.candle_width; ++col)
                img.at(layout.price_rows_begin + row, col) = color;

        if (spec.volume_panel && max_volume > 0) {
            const int vol_h = layout.volume_panel_height();
            const int bar_h =
                int(std::llround(double(bar.volume) / double(max_volume) * double(vol_h)));
            for (int row = layout.volume_rows_end - bar_h; row < layout.volume_rows_end; ++row)
                for (int col = col0; col < col0 + layout.candle_width; ++col)
                    img.at(row, col) = kVolumeBar;
        }
    }
    return img;
}

nn::Tensor to_tensor(const ChartImage& img) {
    nn::Tensor t({std::size_t(img.height), std::size_t(img.width), 3});
    float* out = t.data();
    for (const Rgb& px : img.pixels) {
        *out++ = float(px.r) / 255.0f;
        *out++ = float(px.g) / 255.0f;
        *out++ = float(px.b) / 255.0f;
    }
    return t;
}

std::string chart_filename(const std::string& ticker, const Date& window_end,
                           const windows::DatasetSpec& spec) {
    return ticker + "_" + window_end.to_string() + "_" + std::to_string(spec.period) + "_" +
           std::to_string(spec.dimension) + "_" + (spec.volume_panel ? "vol" : "novol") + ".png";
}

} // namespace candlecast::chart
