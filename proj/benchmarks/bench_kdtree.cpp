#include <benchmark/benchmark.h>

#include "candlecast/kdtree.hpp"
#include "candlecast/rng.hpp"

namespace {

using namespace candlecast;

std::vector<float> random_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> points(n * dim);
    for (auto& v : points) v = float(rng.uniform01());
    return points;
}

void bench_kdtree_build(benchmark::State& state) {
    const std::size_t n = std::size_t(state.range(0));
    const std::size_t dim = std::size_t(state.range(1));
    const auto points = random_points(n, dim, 3);
    for (auto _ : state) {
        auto tree = ml::KdTree::build(points, dim);
        benchmark::DoNotOptimize(tree.size());
    }
}

void bench_kdtree_query(benchmark::State& state) {
    const std::size_t n = std::size_t(state.range(0));
    const std::size_t dim = std::size_t(state.range(1));
    const auto tree = ml::KdTree::build(random_points(n, dim, 3), dim);
    const auto queries = random_points(64, dim, 5);
    std::size_t q = 0;
    for (auto _ : state) {
        auto neighbors = tree.nearest(&queries[(q++ % 64) * dim], 5);
        benchmark::DoNotOptimize(neighbors.data());
    }
}

BENCHMARK(bench_kdtree_build)->Args({1000, 4})->Args({1000, 64});
BENCHMARK(bench_kdtree_query)->Args({1000, 4})->Args({1000, 64});

} // namespace
