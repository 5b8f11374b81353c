#include <benchmark/benchmark.h>

#include "candlecast/network.hpp"
#include "candlecast/train.hpp"

namespace {

using namespace candlecast;

nn::Tensor random_image(int dim, std::uint64_t seed) {
    nn::Tensor image({std::size_t(dim), std::size_t(dim), 3});
    Rng rng(seed);
    for (auto& v : image.values()) v = float(rng.uniform01());
    return image;
}

void bench_forward(benchmark::State& state) {
    const int dim = int(state.range(0));
    nn::Network net(nn::make_stacked_spec(dim), 7);
    const auto image = random_image(dim, 11);
    for (auto _ : state) {
        auto out = net.logits(image);
        benchmark::DoNotOptimize(out.values().data());
    }
}

void bench_train_step(benchmark::State& state) {
    const int dim = int(state.range(0));
    nn::Network net(nn::make_stacked_spec(dim), 7);
    std::vector<nn::TrainSample> samples;
    for (int i = 0; i < 8; ++i)
        samples.push_back({random_image(dim, 100 + i), i % 2 ? Direction::Up : Direction::Down});
    nn::TrainConfig config;
    config.epochs = 1;
    config.batch_size = 8;
    for (auto _ : state) {
        auto result = nn::train(net, samples, config);
        benchmark::DoNotOptimize(result.trace.data());
    }
}

BENCHMARK(bench_forward)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK(bench_train_step)->Arg(20)->Unit(benchmark::kMillisecond);

} // namespace
