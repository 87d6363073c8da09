#pragma once

#include <utility>
#include <vector>

#include "rgbp/tensor.hpp"

namespace rgbp::ops {

// Shape algebra: channel concat/split, broadcasting elementwise arithmetic
// and scalar scaling. Broadcasting follows per-dim rules: a dim matches if
// equal or 1 on either operand.

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    int c_total = 0;
    for (const auto* t : parts) {
        if (t->n() != parts[0]->n() || t->h() != parts[0]->h() ||
            t->w() != parts[0]->w())
            throw ShapeError("concat_channels: mismatched N/H/W");
        c_total += t->c();
    }
    Tensor<T> y(parts[0]->n(), c_total, parts[0]->h(), parts[0]->w());
    int c_off = 0;
    for (const auto* t : parts) {
        for (int n = 0; n < t->n(); ++n)
            for (int c = 0; c < t->c(); ++c)
                for (int h = 0; h < t->h(); ++h)
                    for (int w = 0; w < t->w(); ++w)
                        y(n, c_off + c, h, w) = (*t)(n, c, h, w);
        c_off += t->c();
    }
    return y;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    return concat_channels<T>({&a, &b});
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, const std::vector<int>& sizes) {
    int total = 0;
    for (int s : sizes) {
        if (s <= 0) throw ShapeError("split_channels: non-positive split size");
        total += s;
    }
    if (total != x.c())
        throw ShapeError("split_channels: sizes sum to " + std::to_string(total) +
                         " but C = " + std::to_string(x.c()));
    std::vector<Tensor<T>> out;
    int c_off = 0;
    for (int s : sizes) {
        Tensor<T> t(x.n(), s, x.h(), x.w());
        for (int n = 0; n < x.n(); ++n)
            for (int c = 0; c < s; ++c)
                for (int h = 0; h < x.h(); ++h)
                    for (int w = 0; w < x.w(); ++w)
                        t(n, c, h, w) = x(n, c_off + c, h, w);
        out.push_back(std::move(t));
        c_off += s;
    }
    return out;
}

namespace detail {

inline int broadcast_dim(int a, int b, const char* what) {
    if (a == b) return a;
    if (a == 1) return b;
    if (b == 1) return a;
    throw ShapeError(std::string(what) + ": cannot broadcast dims " +
                     std::to_string(a) + " vs " + std::to_string(b));
}

template <typename T>
T bval(const Tensor<T>& t, int n, int c, int h, int w) {
    return t(t.n() == 1 ? 0 : n, t.c() == 1 ? 0 : c, t.h() == 1 ? 0 : h,
             t.w() == 1 ? 0 : w);
}

template <typename T>
T& bref(Tensor<T>& t, int n, int c, int h, int w) {
    return t(t.n() == 1 ? 0 : n, t.c() == 1 ? 0 : c, t.h() == 1 ? 0 : h,
             t.w() == 1 ? 0 : w);
}

} // namespace detail

template <typename T, typename Op>
Tensor<T> broadcast_binary(const Tensor<T>& a, const Tensor<T>& b, Op op,
                           const char* what) {
    const int n = detail::broadcast_dim(a.n(), b.n(), what);
    const int c = detail::broadcast_dim(a.c(), b.c(), what);
    const int h = detail::broadcast_dim(a.h(), b.h(), what);
    const int w = detail::broadcast_dim(a.w(), b.w(), what);
    Tensor<T> y(n, c, h, w);
    for (int in = 0; in < n; ++in)
        for (int ic = 0; ic < c; ++ic)
            for (int ih = 0; ih < h; ++ih)
                for (int iw = 0; iw < w; ++iw)
                    y(in, ic, ih, iw) = op(detail::bval(a, in, ic, ih, iw),
                                           detail::bval(b, in, ic, ih, iw));
    return y;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return broadcast_binary(a, b, [](T x, T y) { return x * y; }, "mul");
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return broadcast_binary(a, b, [](T x, T y) { return x + y; }, "add");
}

// VJP of mul: grad wrt each operand, summed over its broadcast dims.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> mul_backward(const Tensor<T>& a, const Tensor<T>& b,
                                             const Tensor<T>& gy) {
    Tensor<T> ga = a.zeros_like();
    Tensor<T> gb = b.zeros_like();
    for (int n = 0; n < gy.n(); ++n)
        for (int c = 0; c < gy.c(); ++c)
            for (int h = 0; h < gy.h(); ++h)
                for (int w = 0; w < gy.w(); ++w) {
                    const T go = gy(n, c, h, w);
                    detail::bref(ga, n, c, h, w) += go * detail::bval(b, n, c, h, w);
                    detail::bref(gb, n, c, h, w) += go * detail::bval(a, n, c, h, w);
                }
    return {std::move(ga), std::move(gb)};
}

// VJP of add: pass-through, summed over broadcast dims.
template <typename T>
Tensor<T> add_backward_operand(const Tensor<T>& operand, const Tensor<T>& gy) {
    Tensor<T> g = operand.zeros_like();
    for (int n = 0; n < gy.n(); ++n)
        for (int c = 0; c < gy.c(); ++c)
            for (int h = 0; h < gy.h(); ++h)
                for (int w = 0; w < gy.w(); ++w)
                    detail::bref(g, n, c, h, w) += gy(n, c, h, w);
    return g;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T k) {
    Tensor<T> y = x.zeros_like();
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * k;
    return y;
}

template <typename T>
void accumulate(Tensor<T>& into, const Tensor<T>& g) {
    require_same_shape(into, g, "accumulate");
    for (std::size_t i = 0; i < g.size(); ++i) into[i] += g[i];
}

} // namespace rgbp::ops
