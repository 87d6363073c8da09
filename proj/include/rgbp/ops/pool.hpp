#pragma once

#include <limits>

#include "rgbp/ops/conv.hpp"
#include "rgbp/tensor.hpp"

namespace rgbp::ops {

// Spatial pooling with the same strict shape policy as conv2d. Average
// pooling divides by the number of in-bounds cells, so constants are
// preserved even at padded borders. Max pooling breaks ties toward the
// first window cell in row-major order.

template <typename T>
Tensor<T> max_pool(const Tensor<T>& x, int k, int s, int p) {
    const int Ho = detail::conv_out_dim(x.h(), k, s, p);
    const int Wo = detail::conv_out_dim(x.w(), k, s, p);
    Tensor<T> y(x.n(), x.c(), Ho, Wo);
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo) {
                    T best = -std::numeric_limits<T>::infinity();
                    for (int kh = 0; kh < k; ++kh) {
                        const int hi = ho * s - p + kh;
                        if (hi < 0 || hi >= x.h()) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int wi = wo * s - p + kw;
                            if (wi < 0 || wi >= x.w()) continue;
                            if (x(n, c, hi, wi) > best) best = x(n, c, hi, wi);
                        }
                    }
                    y(n, c, ho, wo) = best;
                }
    return y;
}

template <typename T>
Tensor<T> max_pool_backward(const Tensor<T>& x, int k, int s, int p,
                            const Tensor<T>& gy) {
    Tensor<T> gx = x.zeros_like();
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int ho = 0; ho < gy.h(); ++ho)
                for (int wo = 0; wo < gy.w(); ++wo) {
                    T best = -std::numeric_limits<T>::infinity();
                    int bh = -1, bw = -1;
                    for (int kh = 0; kh < k; ++kh) {
                        const int hi = ho * s - p + kh;
                        if (hi < 0 || hi >= x.h()) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int wi = wo * s - p + kw;
                            if (wi < 0 || wi >= x.w()) continue;
                            if (x(n, c, hi, wi) > best) {
                                best = x(n, c, hi, wi);
                                bh = hi;
                                bw = wi;
                            }
                        }
                    }
                    if (bh >= 0) gx(n, c, bh, bw) += gy(n, c, ho, wo);
                }
    return gx;
}

template <typename T>
Tensor<T> avg_pool(const Tensor<T>& x, int k, int s, int p) {
    const int Ho = detail::conv_out_dim(x.h(), k, s, p);
    const int Wo = detail::conv_out_dim(x.w(), k, s, p);
    Tensor<T> y(x.n(), x.c(), Ho, Wo);
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo) {
                    double acc = 0.0;
                    int cnt = 0;
                    for (int kh = 0; kh < k; ++kh) {
                        const int hi = ho * s - p + kh;
                        if (hi < 0 || hi >= x.h()) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int wi = wo * s - p + kw;
                            if (wi < 0 || wi >= x.w()) continue;
                            acc += x(n, c, hi, wi);
                            ++cnt;
                        }
                    }
                    y(n, c, ho, wo) = static_cast<T>(acc / cnt);
                }
    return y;
}

template <typename T>
Tensor<T> avg_pool_backward(const Tensor<T>& x, int k, int s, int p,
                            const Tensor<T>& gy) {
    Tensor<T> gx = x.zeros_like();
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int ho = 0; ho < gy.h(); ++ho)
                for (int wo = 0; wo < gy.w(); ++wo) {
                    int cnt = 0;
                    for (int kh = 0; kh < k; ++kh) {
                        const int hi = ho * s - p + kh;
                        if (hi < 0 || hi >= x.h()) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int wi = wo * s - p + kw;
                            if (wi < 0 || wi >= x.w()) continue;
                            ++cnt;
                        }
                    }
                    const T share = gy(n, c, ho, wo) / static_cast<T>(cnt);
                    for (int kh = 0; kh < k; ++kh) {
                        const int hi = ho * s - p + kh;
                        if (hi < 0 || hi >= x.h()) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int wi = wo * s - p + kw;
                            if (wi < 0 || wi >= x.w()) continue;
                            gx(n, c, hi, wi) += share;
                        }
                    }
                }
    return gx;
}

// Channel reductions: C -> 1, spatial extent kept.
template <typename T>
Tensor<T> channel_max(const Tensor<T>& x) {
    Tensor<T> y(x.n(), 1, x.h(), x.w());
    for (int n = 0; n < x.n(); ++n)
        for (int h = 0; h < x.h(); ++h)
            for (int w = 0; w < x.w(); ++w) {
                T best = x(n, 0, h, w);
                for (int c = 1; c < x.c(); ++c)
                    if (x(n, c, h, w) > best) best = x(n, c, h, w);
                y(n, 0, h, w) = best;
            }
    return y;
}

template <typename T>
Tensor<T> channel_max_backward(const Tensor<T>& x, const Tensor<T>& gy) {
    Tensor<T> gx = x.zeros_like();
    for (int n = 0; n < x.n(); ++n)
        for (int h = 0; h < x.h(); ++h)
            for (int w = 0; w < x.w(); ++w) {
                int bc = 0;
                for (int c = 1; c < x.c(); ++c)
                    if (x(n, c, h, w) > x(n, bc, h, w)) bc = c;
                gx(n, bc, h, w) += gy(n, 0, h, w);
            }
    return gx;
}

template <typename T>
Tensor<T> channel_avg(const Tensor<T>& x) {
    Tensor<T> y(x.n(), 1, x.h(), x.w());
    for (int n = 0; n < x.n(); ++n)
        for (int h = 0; h < x.h(); ++h)
            for (int w = 0; w < x.w(); ++w) {
                double acc = 0.0;
                for (int c = 0; c < x.c(); ++c) acc += x(n, c, h, w);
                y(n, 0, h, w) = static_cast<T>(acc / x.c());
            }
    return y;
}

template <typename T>
Tensor<T> channel_avg_backward(const Tensor<T>& x, const Tensor<T>& gy) {
    Tensor<T> gx = x.zeros_like();
    for (int n = 0; n < x.n(); ++n)
        for (int h = 0; h < x.h(); ++h)
            for (int w = 0; w < x.w(); ++w) {
                const T share = gy(n, 0, h, w) / static_cast<T>(x.c());
                for (int c = 0; c < x.c(); ++c) gx(n, c, h, w) += share;
            }
    return gx;
}

// Global reductions: (N, C, H, W) -> (N, C, 1, 1).
template <typename T>
Tensor<T> global_max(const Tensor<T>& x) {
    Tensor<T> y(x.n(), x.c(), 1, 1);
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c) {
            T best = x(n, c, 0, 0);
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w)
                    if (x(n, c, h, w) > best) best = x(n, c, h, w);
            y(n, c, 0, 0) = best;
        }
    return y;
}

template <typename T>
Tensor<T> global_max_backward(const Tensor<T>& x, const Tensor<T>& gy) {
    Tensor<T> gx = x.zeros_like();
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c) {
            int bh = 0, bw = 0;
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w)
                    if (x(n, c, h, w) > x(n, c, bh, bw)) {
                        bh = h;
                        bw = w;
                    }
            gx(n, c, bh, bw) += gy(n, c, 0, 0);
        }
    return gx;
}

template <typename T>
Tensor<T> global_avg(const Tensor<T>& x) {
    Tensor<T> y(x.n(), x.c(), 1, 1);
    const double m = static_cast<double>(x.h()) * x.w();
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c) {
            double acc = 0.0;
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w) acc += x(n, c, h, w);
            y(n, c, 0, 0) = static_cast<T>(acc / m);
        }
    return y;
}

template <typename T>
Tensor<T> global_avg_backward(const Tensor<T>& x, const Tensor<T>& gy) {
    Tensor<T> gx = x.zeros_like();
    const T m = static_cast<T>(x.h()) * static_cast<T>(x.w());
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c) {
            const T share = gy(n, c, 0, 0) / m;
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w) gx(n, c, h, w) += share;
        }
    return gx;
}

} // namespace rgbp::ops
