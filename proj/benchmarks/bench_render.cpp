#include <benchmark/benchmark.h>

#include "candlecast/chart.hpp"
#include "candlecast/png.hpp"
#include "candlecast/rng.hpp"

namespace {

using namespace candlecast;

std::vector<market::Bar> random_bars(int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<market::Bar> bars;
    Date date{2010, 1, 4};
    double close = 100.0;
    for (int i = 0; i < count; ++i) {
        market::Bar bar;
        bar.date = date;
        bar.open = close;
        bar.close = close * (1.0 + rng.uniform(-0.02, 0.02));
        bar.high = std::max(bar.open, bar.close) * (1.0 + rng.uniform(0.0, 0.01));
        bar.low = std::min(bar.open, bar.close) * (1.0 - rng.uniform(0.0, 0.01));
        bar.volume = 1e6 * (1.0 + rng.uniform01());
        bars.push_back(bar);
        close = bar.close;
        date = date.next_trading_day();
    }
    return bars;
}

void bench_render_window(benchmark::State& state) {
    windows::DatasetSpec spec;
    spec.period = int(state.range(0));
    spec.dimension = int(state.range(1));
    spec.volume_panel = state.range(2) != 0;
    const auto bars = random_bars(spec.period, 42);
    for (auto _ : state) {
        auto image = chart::render_window(bars, spec);
        benchmark::DoNotOptimize(image.pixels.data());
    }
}

void bench_encode_png(benchmark::State& state) {
    windows::DatasetSpec spec;
    spec.period = 20;
    spec.dimension = int(state.range(0));
    const auto image = chart::render_window(random_bars(spec.period, 42), spec);
    for (auto _ : state) {
        auto bytes = chart::encode_png(image);
        benchmark::DoNotOptimize(bytes.data());
    }
}

BENCHMARK(bench_render_window)->Args({5, 20, 0})->Args({20, 50, 0})->Args({20, 50, 1});
BENCHMARK(bench_encode_png)->Arg(20)->Arg(50);

} // namespace
