#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "candlecast/rng.hpp"
#include "candlecast/tensor.hpp"

namespace candlecast::nn {

// All spatial tensors are HWC. Convolutions are 3x3, stride 1, zero padded
// to the same spatial size; pooling is 2x2 stride 2 with floor semantics.
// Every function has a float path for training and a double path for
// finite-difference gradient checks.

inline constexpr std::size_t kKernelSize = 3;

template <typename T>
void check_conv_shapes(const TensorT<T>& input, const TensorT<T>& kernel,
                       const std::vector<T>& bias) {
    if (input.rank() != 3) throw ContractError("conv2d: input must be rank 3 (H,W,C)");
    if (kernel.rank() != 4 || kernel.dim(0) != kKernelSize || kernel.dim(1) != kKernelSize)
        throw ContractError("conv2d: kernel must be (3,3,C_in,C_out), got " +
                            shape_string(kernel.shape()));
    if (kernel.dim(2) != input.dim(2))
        throw ContractError("conv2d: kernel C_in " + std::to_string(kernel.dim(2)) +
                            " != input channels " + std::to_string(input.dim(2)));
    if (bias.size() != kernel.dim(3))
        throw ContractError("conv2d: bias length " + std::to_string(bias.size()) +
                            " != C_out " + std::to_string(kernel.dim(3)));
}

/// out[y,x,f] = bias[f] + sum over the 3x3xC_in neighborhood (zero padded).
template <typename T>
void conv2d_forward(const TensorT<T>& input, const TensorT<T>& kernel,
                    const std::vector<T>& bias, TensorT<T>& out) {
    check_conv_shapes(input, kernel, bias);
    const std::size_t h = input.dim(0), w = input.dim(1);
    const std::size_t c_in = input.dim(2), c_out = kernel.dim(3);
    out = TensorT<T>({h, w, c_out});

    const T* in = input.data();
    const T* k = kernel.data();
    T* o = out.data();

    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            T* orow = o + (y * w + x) * c_out;
            for (std::size_t f = 0; f < c_out; ++f) orow[f] = bias[f];
            for (std::size_t dy = 0; dy < kKernelSize; ++dy) {
                const std::ptrdiff_t iy = std::ptrdiff_t(y + dy) - 1;
                if (iy < 0 || iy >= std::ptrdiff_t(h)) continue;
                for (std::size_t dx = 0; dx < kKernelSize; ++dx) {
                    const std::ptrdiff_t ix = std::ptrdiff_t(x + dx) - 1;
                    if (ix < 0 || ix >= std::ptrdiff_t(w)) continue;
                    const T* irow = in + (std::size_t(iy) * w + std::size_t(ix)) * c_in;
                    const T* krow = k + (dy * kKernelSize + dx) * c_in * c_out;
                    for (std::size_t c = 0; c < c_in; ++c) {
                        const T iv = irow[c];
                        const T* kc = krow + c * c_out;
                        for (std::size_t f = 0; f < c_out; ++f) orow[f] += iv * kc[f];
                    }
                }
            }
        }
    }
}

/// Analytic gradients of conv2d_forward. Gradients are accumulated into
/// zeroed outputs sized like the corresponding forward arguments.
template <typename T>
void conv2d_backward(const TensorT<T>& upstream, const TensorT<T>& input,
                     const TensorT<T>& kernel, TensorT<T>& grad_input,
                     TensorT<T>& grad_kernel, std::vector<T>& grad_bias) {
    check_conv_shapes(input, kernel,
                      std::vector<T>(kernel.dim(3), T{})); // bias shape implied
    const std::size_t h = input.dim(0), w = input.dim(1);
    const std::size_t c_in = input.dim(2), c_out = kernel.dim(3);
    if (upstream.rank() != 3 || upstream.dim(0) != h || upstream.dim(1) != w ||
        upstream.dim(2) != c_out)
        throw ContractError("conv2d_backward: upstream shape " +
                            shape_string(upstream.shape()) + " does not match forward output");

    grad_input = TensorT<T>({h, w, c_in});
    grad_kernel = TensorT<T>(kernel.shape());
    grad_bias.assign(c_out, T{});

    const T* in = input.data();
    const T* k = kernel.data();
    const T* up = upstream.data();
    T* gin = grad_input.data();
    T* gk = grad_kernel.data();

    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const T* uprow = up + (y * w + x) * c_out;
            for (std::size_t f = 0; f < c_out; ++f) grad_bias[f] += uprow[f];
            for (std::size_t dy = 0; dy < kKernelSize; ++dy) {
                const std::ptrdiff_t iy = std::ptrdiff_t(y + dy) - 1;
                if (iy < 0 || iy >= std::ptrdiff_t(h)) continue;
                for (std::size_t dx = 0; dx < kKernelSize; ++dx) {
                    const std::ptrdiff_t ix = std::ptrdiff_t(x + dx) - 1;
                    if (ix < 0 || ix >= std::ptrdiff_t(w)) continue;
                    const std::size_t ioff = (std::size_t(iy) * w + std::size_t(ix)) * c_in;
                    const std::size_t koff = (dy * kKernelSize + dx) * c_in * c_out;
                    for (std::size_t c = 0; c < c_in; ++c) {
                        const T iv = in[ioff + c];
                        const T* kc = k + koff + c * c_out;
                        T* gkc = gk + koff + c * c_out;
                        T acc{};
                        for (std::size_t f = 0; f < c_out; ++f) {
                            gkc[f] += iv * uprow[f];
                            acc += kc[f] * uprow[f];
                        }
                        gin[ioff + c] += acc;
                    }
                }
            }
        }
    }
}

/// 2x2 stride-2 max pool; trailing odd row/column dropped. `argmax` records
/// the flat input index feeding each output element (first in row-major
/// order wins ties) so the backward pass can route gradients.
template <typename T>
void maxpool2x2_forward(const TensorT<T>& input, TensorT<T>& out,
                        std::vector<std::size_t>& argmax) {
    if (input.rank() != 3) throw ContractError("maxpool2x2: input must be rank 3");
    const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
    if (h < 2 || w < 2)
        throw ContractError("maxpool2x2: spatial size " + shape_string(input.shape()) +
                            " is below 2x2");
    const std::size_t oh = h / 2, ow = w / 2;
    out = TensorT<T>({oh, ow, c});
    argmax.assign(oh * ow * c, 0);

    const T* in = input.data();
    T* o = out.data();
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                std::size_t best_idx = (2 * y * w + 2 * x) * c + ch;
                T best = in[best_idx];
                for (std::size_t dy = 0; dy < 2; ++dy) {
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = ((2 * y + dy) * w + (2 * x + dx)) * c + ch;
                        if (in[idx] > best) {
                            best = in[idx];
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t oidx = (y * ow + x) * c + ch;
                o[oidx] = best;
                argmax[oidx] = best_idx;
            }
        }
    }
}

template <typename T>
void maxpool2x2_backward(const TensorT<T>& upstream, const std::vector<std::size_t>& argmax,
                         const std::vector<std::size_t>& input_shape, TensorT<T>& grad_input) {
    if (upstream.size() != argmax.size())
        throw ContractError("maxpool2x2_backward: upstream does not match argmax cache");
    grad_input = TensorT<T>(input_shape);
    T* gin = grad_input.data();
    const T* up = upstream.data();
    for (std::size_t i = 0; i < argmax.size(); ++i) gin[argmax[i]] += up[i];
}

template <typename T>
void relu_forward(const TensorT<T>& input, TensorT<T>& out) {
    out = TensorT<T>(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{} ? input[i] : T{};
}

template <typename T>
void relu_backward(const TensorT<T>& upstream, const TensorT<T>& input, TensorT<T>& grad_input) {
    if (!upstream.same_shape(input))
        throw ContractError("relu_backward: shape mismatch");
    grad_input = TensorT<T>(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i)
        grad_input[i] = input[i] > T{} ? upstream[i] : T{};
}

/// Inverted-dropout mask: each element is 0 with probability `rate`,
/// otherwise 1/(1-rate). rate must lie in [0, 1).
template <typename T>
std::vector<T> make_dropout_mask(std::size_t size, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw ContractError("dropout rate must be in [0,1), got " + std::to_string(rate));
    std::vector<T> mask(size);
    const T keep_scale = T(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < size; ++i)
        mask[i] = rng.uniform01() < rate ? T{} : keep_scale;
    return mask;
}

template <typename T>
void dropout_apply(const TensorT<T>& input, const std::vector<T>& mask, TensorT<T>& out) {
    if (mask.size() != input.size()) throw ContractError("dropout: mask size mismatch");
    out = TensorT<T>(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] * mask[i];
}

/// weights are (in, units) row-major; input and output are rank 1.
template <typename T>
void dense_forward(const TensorT<T>& input, const TensorT<T>& weights,
                   const std::vector<T>& bias, TensorT<T>& out) {
    if (input.rank() != 1 || weights.rank() != 2 || weights.dim(0) != input.dim(0) ||
        weights.dim(1) != bias.size())
        throw ContractError("dense: shape mismatch, input " + shape_string(input.shape()) +
                            " weights " + shape_string(weights.shape()));
    const std::size_t n = input.dim(0), m = weights.dim(1);
    out = TensorT<T>({m});
    T* o = out.data();
    for (std::size_t j = 0; j < m; ++j) o[j] = bias[j];
    const T* in = input.data();
    const T* w = weights.data();
    for (std::size_t i = 0; i < n; ++i) {
        const T iv = in[i];
        const T* wrow = w + i * m;
        for (std::size_t j = 0; j < m; ++j) o[j] += iv * wrow[j];
    }
}

template <typename T>
void dense_backward(const TensorT<T>& upstream, const TensorT<T>& input,
                    const TensorT<T>& weights, TensorT<T>& grad_input,
                    TensorT<T>& grad_weights, std::vector<T>& grad_bias) {
    const std::size_t n = input.dim(0), m = weights.dim(1);
    if (upstream.rank() != 1 || upstream.dim(0) != m)
        throw ContractError("dense_backward: upstream shape mismatch");
    grad_input = TensorT<T>({n});
    grad_weights = TensorT<T>(weights.shape());
    grad_bias.assign(upstream.data(), upstream.data() + m);

    const T* up = upstream.data();
    const T* in = input.data();
    const T* w = weights.data();
    T* gin = grad_input.data();
    T* gw = grad_weights.data();
    for (std::size_t i = 0; i < n; ++i) {
        const T iv = in[i];
        const T* wrow = w + i * m;
        T* gwrow = gw + i * m;
        T acc{};
        for (std::size_t j = 0; j < m; ++j) {
            gwrow[j] += iv * up[j];
            acc += wrow[j] * up[j];
        }
        gin[i] = acc;
    }
}

template <typename T>
TensorT<T> flatten(const TensorT<T>& input) {
    return TensorT<T>({input.size()}, input.values());
}

/// Numerically stable row softmax (max subtraction).
template <typename T>
void softmax_row(const T* logits, std::size_t k, T* probs) {
    T m = logits[0];
    for (std::size_t i = 1; i < k; ++i) m = std::max(m, logits[i]);
    T sum{};
    for (std::size_t i = 0; i < k; ++i) {
        probs[i] = std::exp(logits[i] - m);
        sum += probs[i];
    }
    for (std::size_t i = 0; i < k; ++i) probs[i] /= sum;
}

template <typename T>
struct SoftmaxCrossEntropyResult {
    T loss{};                // mean negative log-likelihood over rows
    TensorT<T> grad_logits;  // (softmax - onehot) / n
    TensorT<T> probabilities;
};

/// logits are (n, k); labels are class indices per row.
template <typename T>
SoftmaxCrossEntropyResult<T> softmax_cross_entropy(const TensorT<T>& logits,
                                                   const std::vector<int>& labels) {
    if (logits.rank() != 2) throw ContractError("softmax_cross_entropy: logits must be (n,k)");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    if (labels.size() != n) throw ContractError("softmax_cross_entropy: labels length mismatch");

    SoftmaxCrossEntropyResult<T> result;
    result.grad_logits = TensorT<T>(logits.shape());
    result.probabilities = TensorT<T>(logits.shape());

    T total_loss{};
    for (std::size_t row = 0; row < n; ++row) {
        const T* l = logits.data() + row * k;
        T* p = result.probabilities.data() + row * k;
        softmax_row(l, k, p);
        const int label = labels[row];
        if (label < 0 || std::size_t(label) >= k)
            throw ContractError("softmax_cross_entropy: label out of range");
        // Clamp keeps the log finite when a probability underflows to 0.
        const T prob_true = std::max(p[std::size_t(label)], std::numeric_limits<T>::min());
        total_loss -= std::log(prob_true);
        T* g = result.grad_logits.data() + row * k;
        for (std::size_t i = 0; i < k; ++i)
            g[i] = (p[i] - (std::size_t(label) == i ? T{1} : T{})) / T(n);
    }
    result.loss = total_loss / T(n);
    return result;
}

} // namespace candlecast::nn
