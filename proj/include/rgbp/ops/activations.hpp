#pragma once

#include <cmath>
#include <utility>

#include "rgbp/tensor.hpp"

namespace rgbp::ops {

template <typename T>
T sigmoid_scalar(T x) {
    return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> y = x.zeros_like();
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid_scalar(x[i]);
    return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& x, const Tensor<T>& gy) {
    Tensor<T> gx = x.zeros_like();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T s = sigmoid_scalar(x[i]);
        gx[i] = gy[i] * s * (T(1) - s);
    }
    return gx;
}

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
    Tensor<T> y = x.zeros_like();
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * sigmoid_scalar(x[i]);
    return y;
}

template <typename T>
Tensor<T> silu_backward(const Tensor<T>& x, const Tensor<T>& gy) {
    Tensor<T> gx = x.zeros_like();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T s = sigmoid_scalar(x[i]);
        gx[i] = gy[i] * (s + x[i] * s * (T(1) - s));
    }
    return gx;
}

// Elementwise two-way softmax: (a, b) -> (alpha, beta) with alpha + beta = 1.
// alpha = sigmoid(a - b), which is the numerically stable form.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> softmax_pair(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "softmax_pair");
    Tensor<T> alpha = a.zeros_like(), beta = a.zeros_like();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const T s = sigmoid_scalar(static_cast<T>(a[i] - b[i]));
        alpha[i] = s;
        beta[i] = T(1) - s;
    }
    return {alpha, beta};
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> softmax_pair_backward(const Tensor<T>& a,
                                                      const Tensor<T>& b,
                                                      const Tensor<T>& galpha,
                                                      const Tensor<T>& gbeta) {
    require_same_shape(a, b, "softmax_pair_backward");
    Tensor<T> ga = a.zeros_like(), gb = a.zeros_like();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const T s = sigmoid_scalar(static_cast<T>(a[i] - b[i]));
        const T d = s * (T(1) - s) * (galpha[i] - gbeta[i]);
        ga[i] = d;
        gb[i] = -d;
    }
    return {ga, gb};
}

} // namespace rgbp::ops
