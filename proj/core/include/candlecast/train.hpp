#pragma once

#include <cstdint>
#include <vector>

#include "candlecast/network.hpp"

namespace candlecast::nn {

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 50;
    Optimizer optimizer = Optimizer::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Master seed. Shuffle order and per-sample dropout streams are derived
    // from it, so one value pins the whole run.
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainSample {
    Tensor image;
    Direction label = Direction::Down;
};

struct EpochStats {
    double loss = 0.0;      // mean training loss over the epoch
    double accuracy = 0.0;  // inference-mode accuracy on the training set
};

struct TrainResult {
    std::vector<EpochStats> trace;  // one entry per epoch
};

/// Mini-batch training with softmax cross-entropy. Deterministic for a fixed
/// (network init, sample order, config) triple. Throws RuntimeError naming
/// the first offending layer if the loss goes non-finite.
TrainResult train(Network& net, const std::vector<TrainSample>& samples,
                  const TrainConfig& cfg);

/// Inference-mode accuracy of `net` on `samples`.
double evaluate_accuracy(const Network& net, const std::vector<TrainSample>& samples);

} // namespace candlecast::nn
