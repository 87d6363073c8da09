#pragma once

#include <vector>

#include "rgbp/tensor.hpp"

namespace rgbp::ops {

// Cross-correlation with strict shape policy: output sizes must come out
// as positive integers, otherwise a ShapeError is raised. No implicit
// flooring, so strided blocks and their transposed inverses compose
// exactly.
template <typename T>
struct ConvParams {
    Tensor<T> weight;     // (C_out, C_in, k, k)
    std::vector<T> bias;  // size C_out, or empty for no bias
    int stride = 1;
    int pad = 0;
    bool transposed = false;

    int k() const { return weight.h(); }
    int c_out() const { return weight.n(); }
    int c_in() const { return weight.c(); }
};

template <typename T>
struct ConvGrads {
    Tensor<T> gx;
    Tensor<T> gw;
    std::vector<T> gb;
};

namespace detail {

template <typename T>
void check_conv(const Tensor<T>& x, const ConvParams<T>& p) {
    if (p.weight.h() != p.weight.w())
        throw ShapeError("conv2d: non-square kernel " + p.weight.shape_str());
    if (x.c() != p.c_in())
        throw ShapeError("conv2d: input channels " + std::to_string(x.c()) +
                         " != weight C_in " + std::to_string(p.c_in()));
    if (!p.bias.empty() && static_cast<int>(p.bias.size()) != p.c_out())
        throw ShapeError("conv2d: bias size mismatch");
    if (p.k() < 1 || p.stride < 1 || p.pad < 0)
        throw ShapeError("conv2d: invalid kernel/stride/padding");
}

inline int conv_out_dim(int in, int k, int s, int p) {
    const int span = in + 2 * p - k;
    if (span >= 0 && span % s == 0) return span / s + 1;
    // Same-padding strided case (2p == k-1): an exact in/s reduction. The
    // final partial window is dropped, which is the only flooring allowed.
    if (span >= 0 && 2 * p == k - 1 && in % s == 0) return in / s;
    throw ShapeError("conv2d: size " + std::to_string(in) + " with k=" +
                     std::to_string(k) + " s=" + std::to_string(s) + " p=" +
                     std::to_string(p) + " has no integer output size");
}

// Plain strided cross-correlation y = x * w (+ bias), parallel over (n, c_out).
template <typename T>
Tensor<T> conv_fwd(const Tensor<T>& x, const Tensor<T>& w,
                   const std::vector<T>& bias, int s, int p) {
    const int k = w.h();
    const int Ho = conv_out_dim(x.h(), k, s, p);
    const int Wo = conv_out_dim(x.w(), k, s, p);
    Tensor<T> y(x.n(), w.n(), Ho, Wo);
    parallel_for(static_cast<std::int64_t>(x.n()) * w.n(), [&](std::int64_t job) {
        const int n = static_cast<int>(job / w.n());
        const int co = static_cast<int>(job % w.n());
        const T b = bias.empty() ? T(0) : bias[co];
        for (int ho = 0; ho < Ho; ++ho) {
            for (int wo = 0; wo < Wo; ++wo) {
                double acc = b;
                for (int ci = 0; ci < x.c(); ++ci) {
                    for (int kh = 0; kh < k; ++kh) {
                        const int hi = ho * s - p + kh;
                        if (hi < 0 || hi >= x.h()) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int wi = wo * s - p + kw;
                            if (wi < 0 || wi >= x.w()) continue;
                            acc += static_cast<double>(x(n, ci, hi, wi)) *
                                   static_cast<double>(w(co, ci, kh, kw));
                        }
                    }
                }
                y(n, co, ho, wo) = static_cast<T>(acc);
            }
        }
    });
    return y;
}

} // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvParams<T>& p) {
    detail::check_conv(x, p);
    const int k = p.k(), s = p.stride, pd = p.pad;
    if (!p.transposed) return detail::conv_fwd(x, p.weight, p.bias, s, pd);

    // Transposed: scatter form, H' = (H-1)*s - 2p + k. Weight layout stays
    // (C_out, C_in, k, k) with C_in = input channels of this op.
    const int Ho = (x.h() - 1) * s - 2 * pd + k;
    const int Wo = (x.w() - 1) * s - 2 * pd + k;
    if (Ho <= 0 || Wo <= 0)
        throw ShapeError("transposed conv2d: non-positive output size");
    Tensor<T> y(x.n(), p.c_out(), Ho, Wo);
    parallel_for(static_cast<std::int64_t>(x.n()) * p.c_out(), [&](std::int64_t job) {
        const int n = static_cast<int>(job / p.c_out());
        const int co = static_cast<int>(job % p.c_out());
        const T b = p.bias.empty() ? T(0) : p.bias[co];
        for (int ho = 0; ho < Ho; ++ho) {
            for (int wo = 0; wo < Wo; ++wo) {
                // gather form of the scatter: hi*s - p + kh == ho
                double acc = b;
                for (int ci = 0; ci < x.c(); ++ci) {
                    for (int kh = 0; kh < k; ++kh) {
                        const int num_h = ho + pd - kh;
                        if (num_h < 0 || num_h % s != 0) continue;
                        const int hi = num_h / s;
                        if (hi >= x.h()) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int num_w = wo + pd - kw;
                            if (num_w < 0 || num_w % s != 0) continue;
                            const int wi = num_w / s;
                            if (wi >= x.w()) continue;
                            acc += static_cast<double>(x(n, ci, hi, wi)) *
                                   static_cast<double>(p.weight(co, ci, kh, kw));
                        }
                    }
                }
                y(n, co, ho, wo) = static_cast<T>(acc);
            }
        }
    });
    return y;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const ConvParams<T>& p,
                             const Tensor<T>& gy) {
    detail::check_conv(x, p);
    const int k = p.k(), s = p.stride, pd = p.pad;
    ConvGrads<T> g;
    g.gx = x.zeros_like();
    g.gw = p.weight.zeros_like();
    if (!p.bias.empty()) g.gb.assign(p.bias.size(), T(0));

    if (!p.transposed) {
        for (int n = 0; n < x.n(); ++n) {
            for (int co = 0; co < p.c_out(); ++co) {
                for (int ho = 0; ho < gy.h(); ++ho) {
                    for (int wo = 0; wo < gy.w(); ++wo) {
                        const T go = gy(n, co, ho, wo);
                        if (!p.bias.empty()) g.gb[co] += go;
                        for (int ci = 0; ci < x.c(); ++ci) {
                            for (int kh = 0; kh < k; ++kh) {
                                const int hi = ho * s - pd + kh;
                                if (hi < 0 || hi >= x.h()) continue;
                                for (int kw = 0; kw < k; ++kw) {
                                    const int wi = wo * s - pd + kw;
                                    if (wi < 0 || wi >= x.w()) continue;
                                    g.gx(n, ci, hi, wi) += go * p.weight(co, ci, kh, kw);
                                    g.gw(co, ci, kh, kw) += go * x(n, ci, hi, wi);
                                }
                            }
                        }
                    }
                }
            }
        }
    } else {
        for (int n = 0; n < x.n(); ++n) {
            for (int co = 0; co < p.c_out(); ++co) {
                for (int hi = 0; hi < x.h(); ++hi) {
                    for (int wi = 0; wi < x.w(); ++wi) {
                        for (int kh = 0; kh < k; ++kh) {
                            const int ho = hi * s - pd + kh;
                            if (ho < 0 || ho >= gy.h()) continue;
                            for (int kw = 0; kw < k; ++kw) {
                                const int wo = wi * s - pd + kw;
                                if (wo < 0 || wo >= gy.w()) continue;
                                const T go = gy(n, co, ho, wo);
                                for (int ci = 0; ci < x.c(); ++ci) {
                                    g.gx(n, ci, hi, wi) += go * p.weight(co, ci, kh, kw);
                                    g.gw(co, ci, kh, kw) += go * x(n, ci, hi, wi);
                                }
                            }
                        }
                    }
                }
            }
        }
        if (!p.bias.empty())
            for (int n = 0; n < gy.n(); ++n)
                for (int co = 0; co < gy.c(); ++co)
                    for (int ho = 0; ho < gy.h(); ++ho)
                        for (int wo = 0; wo < gy.w(); ++wo)
                            g.gb[co] += gy(n, co, ho, wo);
    }
    return g;
}

} // namespace rgbp::ops
