#pragma once

#include <vector>

#include "rgbp/tensor.hpp"

namespace rgbp::ops {

// Fully connected layer on flat vectors carried as (N, D, 1, 1) tensors.
template <typename T>
struct LinearParams {
    Tensor<T> weight;    // (D_out, D_in, 1, 1)
    std::vector<T> bias; // size D_out

    int d_out() const { return weight.n(); }
    int d_in() const { return weight.c(); }

    void check(int in_dim) const {
        if (in_dim != d_in())
            throw ShapeError("fully_connected: input dim " + std::to_string(in_dim) +
                             " != D_in " + std::to_string(d_in()));
        if (static_cast<int>(bias.size()) != d_out())
            throw ShapeError("fully_connected: bias size != D_out");
    }
};

template <typename T>
struct LinearGrads {
    Tensor<T> gx;
    Tensor<T> gw;
    std::vector<T> gb;
};

template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const LinearParams<T>& p) {
    if (x.h() != 1 || x.w() != 1)
        throw ShapeError("fully_connected: expects (N, D, 1, 1), got " + x.shape_str());
    p.check(x.c());
    Tensor<T> y(x.n(), p.d_out(), 1, 1);
    for (int n = 0; n < x.n(); ++n)
        for (int o = 0; o < p.d_out(); ++o) {
            double acc = p.bias[o];
            for (int i = 0; i < p.d_in(); ++i)
                acc += static_cast<double>(p.weight(o, i, 0, 0)) * x(n, i, 0, 0);
            y(n, o, 0, 0) = static_cast<T>(acc);
        }
    return y;
}

template <typename T>
LinearGrads<T> fully_connected_backward(const Tensor<T>& x, const LinearParams<T>& p,
                                        const Tensor<T>& gy) {
    p.check(x.c());
    LinearGrads<T> g;
    g.gx = x.zeros_like();
    g.gw = p.weight.zeros_like();
    g.gb.assign(p.bias.size(), T(0));
    for (int n = 0; n < x.n(); ++n)
        for (int o = 0; o < p.d_out(); ++o) {
            const T go = gy(n, o, 0, 0);
            g.gb[o] += go;
            for (int i = 0; i < p.d_in(); ++i) {
                g.gx(n, i, 0, 0) += go * p.weight(o, i, 0, 0);
                g.gw(o, i, 0, 0) += go * x(n, i, 0, 0);
            }
        }
    return g;
}

} // namespace rgbp::ops
