#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "candlecast/direction.hpp"
#include "candlecast/layers.hpp"
#include "candlecast/rng.hpp"
#include "candlecast/tensor.hpp"

namespace candlecast::nn {

template <typename T>
void accumulate(TensorT<T>& dst, const TensorT<T>& src) {
    if (!dst.same_shape(src)) throw ContractError("accumulate: shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void accumulate_bias(TensorT<T>& dst, const std::vector<T>& src) {
    if (dst.size() != src.size()) throw ContractError("accumulate_bias: size mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Layer descriptors. Conv is 3x3/stride-1/same-pad and carries its own ReLU;
// Residual is y = relu(x + conv(relu(conv(x)))) with both convs keeping the
// channel count.
struct ConvSpec { std::size_t filters = 0; };
struct MaxPoolSpec {};
struct DropoutSpec { double rate = 0.0; };
struct ResidualSpec {};
struct FlattenSpec {};
struct DenseSpec { std::size_t units = 0; bool relu = false; };

using LayerSpec = std::variant<ConvSpec, MaxPoolSpec, DropoutSpec, ResidualSpec,
                               FlattenSpec, DenseSpec>;

struct NetworkSpec {
    std::size_t input_height = 0;
    std::size_t input_width = 0;
    std::size_t input_channels = 3;
    std::vector<LayerSpec> layers;
};

/// Shapes flowing through the network: element 0 is the input shape, element
/// i+1 the output of layer i. Throws ContractError when a layer cannot accept
/// its input (e.g. pooling a sub-2x2 map, dense after a spatial layer).
std::vector<std::vector<std::size_t>> shape_trace(const NetworkSpec& spec);

/// The stacked architecture used throughout: four conv+pool stages
/// (32, 48, 64, 96 filters) with dropout 0.25 after stages 2 and 4,
/// then flatten, dense 256 + ReLU, dropout 0.5, dense 2.
/// Square input of `image_dim` pixels; needs image_dim >= 16 so all four
/// pools see at least 2x2.
NetworkSpec make_stacked_spec(std::size_t image_dim, std::size_t channels = 3);

/// Same stages with a residual block inserted after each conv, for the
/// residual variant of the experiment.
NetworkSpec make_residual_spec(std::size_t image_dim, std::size_t channels = 3);

template <typename T>
struct ParamTensor {
    std::string name;
    TensorT<T> value;
};

template <typename T>
struct LayerTape {
    TensorT<T> input;
    std::vector<std::size_t> argmax;  // max pool routing
    std::vector<T> mask;              // dropout mask
    // residual internals: conv1 pre-relu, relu1 output, pre-final-relu sum
    TensorT<T> res_z1, res_a1, res_sum;
    TensorT<T> conv_pre_relu;         // conv output before its ReLU
};

template <typename T>
class NetworkT {
public:
    NetworkT(NetworkSpec spec, std::uint64_t init_seed);

    const NetworkSpec& spec() const { return spec_; }
    const std::vector<std::vector<std::size_t>>& shapes() const { return shapes_; }

    std::vector<ParamTensor<T>>& parameters() { return params_; }
    const std::vector<ParamTensor<T>>& parameters() const { return params_; }
    std::size_t parameter_count() const;

    /// Inference forward: dropout layers pass through unchanged.
    TensorT<T> logits(const TensorT<T>& input) const;

    struct Prediction {
        Direction label = Direction::Down;
        T prob_down{};
        T prob_up{};
    };
    Prediction predict(const TensorT<T>& input) const;

    /// Training forward: dropout masks drawn from `dropout_rng`, every
    /// intermediate needed by backward recorded on the tape.
    TensorT<T> forward_train(const TensorT<T>& input, std::vector<LayerTape<T>>& tape,
                             Rng& dropout_rng) const;

    /// Accumulates parameter gradients (aligned with parameters()) given the
    /// gradient of the loss w.r.t. the logits. `param_grads` must hold one
    /// zero-or-accumulating tensor per parameter.
    void backward(const std::vector<LayerTape<T>>& tape, const TensorT<T>& grad_logits,
                  std::vector<TensorT<T>>& param_grads) const;

    std::vector<TensorT<T>> zero_gradients() const;

    /// Human-readable name of layer i, e.g. "conv2", "dense1".
    const std::string& layer_name(std::size_t i) const { return layer_names_[i]; }

private:
    struct Runtime {
        LayerSpec spec;
        // parameter slots in params_, in layer order
        std::vector<std::size_t> param_idx;
    };

    TensorT<T> run_forward(const TensorT<T>& input, std::vector<LayerTape<T>>* tape,
                           Rng* dropout_rng) const;

    NetworkSpec spec_;
    std::vector<std::vector<std::size_t>> shapes_;
    std::vector<Runtime> layers_;
    std::vector<std::string> layer_names_;
    std::vector<ParamTensor<T>> params_;
};

using Network = NetworkT<float>;
using Network64 = NetworkT<double>;

// --- implementation ---

namespace detail {

inline TensorT<double> he_normal(const std::vector<std::size_t>& shape, std::size_t fan_in,
                                 Rng& rng) {
    TensorT<double> t(shape);
    const double stddev = std::sqrt(2.0 / double(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * stddev;
    return t;
}

} // namespace detail

template <typename T>
NetworkT<T>::NetworkT(NetworkSpec spec, std::uint64_t init_seed)
    : spec_(std::move(spec)), shapes_(shape_trace(spec_)) {
    Rng rng(init_seed);
    std::size_t conv_n = 0, dense_n = 0, res_n = 0, pool_n = 0, drop_n = 0, flat_n = 0;

    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        Runtime rt;
        rt.spec = spec_.layers[i];
        const auto& in_shape = shapes_[i];

        if (const auto* conv = std::get_if<ConvSpec>(&rt.spec)) {
            const std::string name = "conv" + std::to_string(++conv_n);
            const std::size_t c_in = in_shape[2];
            const std::size_t fan_in = kKernelSize * kKernelSize * c_in;
            rt.param_idx.push_back(params_.size());
            params_.push_back({name + ".kernel",
                               detail::he_normal({kKernelSize, kKernelSize, c_in, conv->filters},
                                                 fan_in, rng)
                                   .template cast<T>()});
            rt.param_idx.push_back(params_.size());
            params_.push_back({name + ".bias", TensorT<T>({conv->filters})});
            layer_names_.push_back(name);
        } else if (std::holds_alternative<ResidualSpec>(rt.spec)) {
            const std::string name = "res" + std::to_string(++res_n);
            const std::size_t c = in_shape[2];
            const std::size_t fan_in = kKernelSize * kKernelSize * c;
            for (const char* part : {".conv1", ".conv2"}) {
                rt.param_idx.push_back(params_.size());
                params_.push_back({name + part + ".kernel",
                                   detail::he_normal({kKernelSize, kKernelSize, c, c}, fan_in, rng)
                                       .template cast<T>()});
                rt.param_idx.push_back(params_.size());
                params_.push_back({name + part + ".bias", TensorT<T>({c})});
            }
            layer_names_.push_back(name);
        } else if (const auto* dense = std::get_if<DenseSpec>(&rt.spec)) {
            const std::string name = "dense" + std::to_string(++dense_n);
            const std::size_t n_in = in_shape[0];
            rt.param_idx.push_back(params_.size());
            params_.push_back({name + ".weight",
                               detail::he_normal({n_in, dense->units}, n_in, rng)
                                   .template cast<T>()});
            rt.param_idx.push_back(params_.size());
            params_.push_back({name + ".bias", TensorT<T>({dense->units})});
            layer_names_.push_back(name);
        } else if (std::holds_alternative<MaxPoolSpec>(rt.spec)) {
            layer_names_.push_back("pool" + std::to_string(++pool_n));
        } else if (std::holds_alternative<DropoutSpec>(rt.spec)) {
            layer_names_.push_back("dropout" + std::to_string(++drop_n));
        } else {
            layer_names_.push_back("flatten" + std::to_string(++flat_n));
        }
        layers_.push_back(std::move(rt));
    }
}

template <typename T>
std::size_t NetworkT<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

template <typename T>
TensorT<T> NetworkT<T>::run_forward(const TensorT<T>& input, std::vector<LayerTape<T>>* tape,
                                    Rng* dropout_rng) const {
    if (input.shape() != shapes_.front())
        throw ContractError("network input shape " + shape_string(input.shape()) +
                            " != expected " + shape_string(shapes_.front()));
    if (tape) tape->assign(layers_.size(), LayerTape<T>{});

    TensorT<T> cur = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Runtime& rt = layers_[i];
        LayerTape<T>* lt = tape ? &(*tape)[i] : nullptr;
        if (lt) lt->input = cur;

        if (const auto* conv = std::get_if<ConvSpec>(&rt.spec)) {
            (void)conv;
            const auto& kernel = params_[rt.param_idx[0]].value;
            const auto& bias = params_[rt.param_idx[1]].value;
            TensorT<T> z;
            conv2d_forward(cur, kernel, bias.values(), z);
            if (lt) lt->conv_pre_relu = z;
            TensorT<T> a;
            relu_forward(z, a);
            cur = std::move(a);
        } else if (std::holds_alternative<MaxPoolSpec>(rt.spec)) {
            TensorT<T> out;
            std::vector<std::size_t> argmax;
            maxpool2x2_forward(cur, out, argmax);
            if (lt) lt->argmax = std::move(argmax);
            cur = std::move(out);
        } else if (const auto* drop = std::get_if<DropoutSpec>(&rt.spec)) {
            if (dropout_rng) {
                auto mask = make_dropout_mask<T>(cur.size(), drop->rate, *dropout_rng);
                TensorT<T> out;
                dropout_apply(cur, mask, out);
                if (lt) lt->mask = std::move(mask);
                cur = std::move(out);
            }
            // inference mode: identity
        } else if (std::holds_alternative<ResidualSpec>(rt.spec)) {
            const auto& k1 = params_[rt.param_idx[0]].value;
            const auto& b1 = params_[rt.param_idx[1]].value;
            const auto& k2 = params_[rt.param_idx[2]].value;
            const auto& b2 = params_[rt.param_idx[3]].value;
            TensorT<T> z1, a1, z2;
            conv2d_forward(cur, k1, b1.values(), z1);
            relu_forward(z1, a1);
            conv2d_forward(a1, k2, b2.values(), z2);
            TensorT<T> sum(z2.shape());
            for (std::size_t j = 0; j < sum.size(); ++j) sum[j] = cur[j] + z2[j];
            TensorT<T> out;
            relu_forward(sum, out);
            if (lt) {
                lt->res_z1 = std::move(z1);
                lt->res_a1 = std::move(a1);
                lt->res_sum = std::move(sum);
            }
            cur = std::move(out);
        } else if (std::holds_alternative<FlattenSpec>(rt.spec)) {
            cur = flatten(cur);
        } else {
            const auto& dense = std::get<DenseSpec>(rt.spec);
            const auto& w = params_[rt.param_idx[0]].value;
            const auto& b = params_[rt.param_idx[1]].value;
            TensorT<T> z;
            dense_forward(cur, w, b.values(), z);
            if (dense.relu) {
                if (lt) lt->conv_pre_relu = z;
                TensorT<T> a;
                relu_forward(z, a);
                cur = std::move(a);
            } else {
                cur = std::move(z);
            }
        }
    }
    return cur;
}

template <typename T>
TensorT<T> NetworkT<T>::logits(const TensorT<T>& input) const {
    return run_forward(input, nullptr, nullptr);
}

template <typename T>
typename NetworkT<T>::Prediction NetworkT<T>::predict(const TensorT<T>& input) const {
    if (shapes_.back() != std::vector<std::size_t>{2})
        throw ContractError("predict: network output is not a 2-class logit vector");
    const TensorT<T> l = logits(input);
    T probs[2];
    softmax_row(l.data(), 2, probs);
    Prediction p;
    p.prob_down = probs[0];
    p.prob_up = probs[1];
    p.label = probs[1] > probs[0] ? Direction::Up : Direction::Down;
    return p;
}

template <typename T>
TensorT<T> NetworkT<T>::forward_train(const TensorT<T>& input, std::vector<LayerTape<T>>& tape,
                                      Rng& dropout_rng) const {
    return run_forward(input, &tape, &dropout_rng);
}

template <typename T>
std::vector<TensorT<T>> NetworkT<T>::zero_gradients() const {
    std::vector<TensorT<T>> grads;
    grads.reserve(params_.size());
    for (const auto& p : params_) grads.emplace_back(p.value.shape());
    return grads;
}

template <typename T>
void NetworkT<T>::backward(const std::vector<LayerTape<T>>& tape, const TensorT<T>& grad_logits,
                           std::vector<TensorT<T>>& param_grads) const {
    if (tape.size() != layers_.size())
        throw ContractError("backward: tape does not match network depth");
    if (param_grads.size() != params_.size())
        throw ContractError("backward: gradient slot count mismatch");

    TensorT<T> grad = grad_logits;
    for (std::size_t ri = layers_.size(); ri-- > 0;) {
        const Runtime& rt = layers_[ri];
        const LayerTape<T>& lt = tape[ri];

        if (std::holds_alternative<ConvSpec>(rt.spec)) {
            TensorT<T> grad_z;
            relu_backward(grad, lt.conv_pre_relu, grad_z);
            const auto& kernel = params_[rt.param_idx[0]].value;
            TensorT<T> gin, gk;
            std::vector<T> gb;
            conv2d_backward(grad_z, lt.input, kernel, gin, gk, gb);
            accumulate(param_grads[rt.param_idx[0]], gk);
            accumulate_bias(param_grads[rt.param_idx[1]], gb);
            grad = std::move(gin);
        } else if (std::holds_alternative<MaxPoolSpec>(rt.spec)) {
            TensorT<T> gin;
            maxpool2x2_backward(grad, lt.argmax, lt.input.shape(), gin);
            grad = std::move(gin);
        } else if (std::holds_alternative<DropoutSpec>(rt.spec)) {
            if (!lt.mask.empty()) {
                TensorT<T> gin;
                dropout_apply(grad, lt.mask, gin);
                grad = std::move(gin);
            }
        } else if (std::holds_alternative<ResidualSpec>(rt.spec)) {
            const auto& k1 = params_[rt.param_idx[0]].value;
            const auto& k2 = params_[rt.param_idx[2]].value;
            TensorT<T> grad_sum;
            relu_backward(grad, lt.res_sum, grad_sum);
            TensorT<T> gin2, gk2;
            std::vector<T> gb2;
            conv2d_backward(grad_sum, lt.res_a1, k2, gin2, gk2, gb2);
            accumulate(param_grads[rt.param_idx[2]], gk2);
            accumulate_bias(param_grads[rt.param_idx[3]], gb2);
            TensorT<T> grad_z1;
            relu_backward(gin2, lt.res_z1, grad_z1);
            TensorT<T> gin1, gk1;
            std::vector<T> gb1;
            conv2d_backward(grad_z1, lt.input, k1, gin1, gk1, gb1);
            accumulate(param_grads[rt.param_idx[0]], gk1);
            accumulate_bias(param_grads[rt.param_idx[1]], gb1);
            // skip connection adds the post-sum gradient to the conv branch
            for (std::size_t j = 0; j < gin1.size(); ++j) gin1[j] += grad_sum[j];
            grad = std::move(gin1);
        } else if (std::holds_alternative<FlattenSpec>(rt.spec)) {
            grad = TensorT<T>(lt.input.shape(), grad.values());
        } else {
            const auto& dense = std::get<DenseSpec>(rt.spec);
            TensorT<T> grad_z;
            if (dense.relu) {
                relu_backward(grad, lt.conv_pre_relu, grad_z);
            } else {
                grad_z = grad;
            }
            const auto& w = params_[rt.param_idx[0]].value;
            TensorT<T> gin, gw;
            std::vector<T> gb;
            dense_backward(grad_z, lt.input, w, gin, gw, gb);
            accumulate(param_grads[rt.param_idx[0]], gw);
            accumulate_bias(param_grads[rt.param_idx[1]], gb);
            grad = std::move(gin);
        }
    }
}

} // namespace candlecast::nn
