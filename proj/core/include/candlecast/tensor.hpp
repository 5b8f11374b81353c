#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "candlecast/error.hpp"

namespace candlecast::nn {

/// Dense n-dimensional array, row-major. float for training and inference;
/// the double instantiation exists for finite-difference gradient checks.
template <typename T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<std::size_t> shape)
        : shape_(std::move(shape)),
          data_(std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                std::multiplies<>()),
                T{}) {}

    TensorT(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        std::size_t n = 1;
        for (auto d : shape_) n *= d;
        if (n != data_.size())
            throw ContractError("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape product " + std::to_string(n));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    /// (h, w, c) accessor for rank-3 tensors.
    T& at(std::size_t h, std::size_t w, std::size_t c) {
        return data_[(h * shape_[1] + w) * shape_[2] + c];
    }
    const T& at(std::size_t h, std::size_t w, std::size_t c) const {
        return data_[(h * shape_[1] + w) * shape_[2] + c];
    }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(double(v))) return false;
        return true;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = U(data_[i]);
        return out;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

inline std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    s += ")";
    return s;
}

} // namespace candlecast::nn
