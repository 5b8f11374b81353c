#include "candlecast/train.hpp"

#include <cmath>
#include <numeric>

#include "candlecast/error.hpp"

namespace candlecast::nn {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5u;
constexpr std::uint64_t kDropoutStream = 0xDu;

/// Walks one sample's tape and names the first layer whose output is
/// non-finite. The output of layer i is the input of layer i+1.
[[noreturn]] void report_non_finite(const Network& net, const std::vector<LayerTape<float>>& tape,
                                    const Tensor& logits_out, std::size_t epoch) {
    const std::size_t n_layers = tape.size();
    for (std::size_t i = 0; i + 1 < n_layers; ++i) {
        if (!tape[i + 1].input.all_finite())
            throw RuntimeError("non-finite activation after layer " + net.layer_name(i) +
                               " in epoch " + std::to_string(epoch + 1));
    }
    if (!logits_out.all_finite())
        throw RuntimeError("non-finite logits after layer " + net.layer_name(n_layers - 1) +
                           " in epoch " + std::to_string(epoch + 1));
    throw RuntimeError("non-finite loss with finite activations in epoch " +
                       std::to_string(epoch + 1));
}

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t t = 0;
};

void apply_update(Network& net, std::vector<Tensor>& grads, double scale,
                  const TrainConfig& cfg, AdamState& adam) {
    auto& params = net.parameters();
    if (cfg.optimizer == Optimizer::Sgd) {
        for (std::size_t p = 0; p < params.size(); ++p) {
            auto& value = params[p].value;
            const auto& g = grads[p];
            for (std::size_t i = 0; i < value.size(); ++i)
                value[i] -= float(cfg.learning_rate * scale * double(g[i]));
        }
        return;
    }
    adam.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(adam.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(adam.t));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& value = params[p].value;
        auto& m = adam.m[p];
        auto& v = adam.v[p];
        const auto& g = grads[p];
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double gi = double(g[i]) * scale;
            const double mi = cfg.beta1 * double(m[i]) + (1.0 - cfg.beta1) * gi;
            const double vi = cfg.beta2 * double(v[i]) + (1.0 - cfg.beta2) * gi * gi;
            m[i] = float(mi);
            v[i] = float(vi);
            value[i] -= float(cfg.learning_rate * (mi / bc1) /
                              (std::sqrt(vi / bc2) + cfg.epsilon));
        }
    }
}

} // namespace

void TrainConfig::validate() const {
    if (learning_rate < 0.0) throw ConfigError("learning rate must be >= 0");
    if (!std::isfinite(learning_rate)) throw ConfigError("learning rate must be finite");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (optimizer == Optimizer::Adam) {
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
            throw ConfigError("adam betas must be in [0,1)");
        if (epsilon <= 0.0) throw ConfigError("adam epsilon must be > 0");
    }
}

double evaluate_accuracy(const Network& net, const std::vector<TrainSample>& samples) {
    if (samples.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& s : samples)
        if (net.predict(s.image).label == s.label) ++hits;
    return double(hits) / double(samples.size());
}

TrainResult train(Network& net, const std::vector<TrainSample>& samples,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (samples.empty()) throw ContractError("train: no samples");
    for (const auto& s : samples)
        if (s.image.shape() != net.shapes().front())
            throw ContractError("train: sample shape " + shape_string(s.image.shape()) +
                                " does not match network input " +
                                shape_string(net.shapes().front()));

    Rng shuffle_rng(mix_seed(cfg.seed, kShuffleStream));
    AdamState adam;
    if (cfg.optimizer == Optimizer::Adam) {
        adam.m = net.zero_gradients();
        adam.v = net.zero_gradients();
    }

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    result.trace.reserve(cfg.epochs);

    std::vector<LayerTape<float>> tape;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;

        std::size_t pos = 0;
        std::uint64_t sample_counter = 0;
        while (pos < order.size()) {
            const std::size_t batch_n = std::min(cfg.batch_size, order.size() - pos);
            auto grads = net.zero_gradients();

            for (std::size_t b = 0; b < batch_n; ++b) {
                const TrainSample& s = samples[order[pos + b]];
                Rng dropout_rng(mix_seed(cfg.seed, kDropoutStream, epoch, sample_counter++));
                const Tensor out = net.forward_train(s.image, tape, dropout_rng);

                Tensor logits_row({1, out.size()}, out.values());
                const auto ce = softmax_cross_entropy(
                    logits_row, std::vector<int>{static_cast<int>(s.label)});
                if (!std::isfinite(double(ce.loss))) report_non_finite(net, tape, out, epoch);
                epoch_loss += double(ce.loss);

                Tensor grad_logits({out.size()}, ce.grad_logits.values());
                net.backward(tape, grad_logits, grads);
            }
            apply_update(net, grads, 1.0 / double(batch_n), cfg, adam);
            pos += batch_n;
        }

        EpochStats stats;
        stats.loss = epoch_loss / double(samples.size());
        stats.accuracy = evaluate_accuracy(net, samples);
        result.trace.push_back(stats);
    }
    return result;
}

} // namespace candlecast::nn
