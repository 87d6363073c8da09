#pragma once

#include <cmath>
#include <vector>

#include "rgbp/tensor.hpp"

namespace rgbp::ops {

enum class BnMode { kBatchStats, kRunningStats };

template <typename T>
struct BatchNormParams {
    std::vector<T> gamma, beta;
    std::vector<T> running_mean, running_var;
    T eps = static_cast<T>(1e-5);
    BnMode mode = BnMode::kRunningStats;

    static BatchNormParams identity(int channels) {
        BatchNormParams p;
        p.gamma.assign(channels, T(1));
        p.beta.assign(channels, T(0));
        p.running_mean.assign(channels, T(0));
        p.running_var.assign(channels, T(1));
        return p;
    }

    void check(int channels) const {
        if (static_cast<int>(gamma.size()) != channels ||
            static_cast<int>(beta.size()) != channels ||
            static_cast<int>(running_mean.size()) != channels ||
            static_cast<int>(running_var.size()) != channels)
            throw ShapeError("batch_norm: parameter size != channel count");
        if (!(eps > T(0))) throw ValidationError("batch_norm: eps must be > 0");
    }
};

template <typename T>
struct BnGrads {
    Tensor<T> gx;
    std::vector<T> ggamma, gbeta;
};

namespace detail {

template <typename T>
void bn_stats(const Tensor<T>& x, const BatchNormParams<T>& p,
              std::vector<double>& mean, std::vector<double>& var) {
    const int C = x.c();
    mean.assign(C, 0.0);
    var.assign(C, 0.0);
    if (p.mode == BnMode::kRunningStats) {
        for (int c = 0; c < C; ++c) {
            mean[c] = p.running_mean[c];
            var[c] = p.running_var[c];
        }
        return;
    }
    const double m = static_cast<double>(x.n()) * x.h() * x.w();
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w)
                    mean[c] += x(n, c, h, w);
    for (int c = 0; c < C; ++c) mean[c] /= m;
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w) {
                    const double d = x(n, c, h, w) - mean[c];
                    var[c] += d * d;
                }
    for (int c = 0; c < C; ++c) var[c] /= m; // biased variance
}

} // namespace detail

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const BatchNormParams<T>& p) {
    p.check(x.c());
    std::vector<double> mean, var;
    detail::bn_stats(x, p, mean, var);
    Tensor<T> y = x.zeros_like();
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c) {
            const double inv = 1.0 / std::sqrt(var[c] + static_cast<double>(p.eps));
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w)
                    y(n, c, h, w) = static_cast<T>(
                        (x(n, c, h, w) - mean[c]) * inv * p.gamma[c] + p.beta[c]);
        }
    return y;
}

template <typename T>
BnGrads<T> batch_norm_backward(const Tensor<T>& x, const BatchNormParams<T>& p,
                               const Tensor<T>& gy) {
    p.check(x.c());
    std::vector<double> mean, var;
    detail::bn_stats(x, p, mean, var);
    const int C = x.c();
    const double m = static_cast<double>(x.n()) * x.h() * x.w();
    BnGrads<T> g;
    g.gx = x.zeros_like();
    g.ggamma.assign(C, T(0));
    g.gbeta.assign(C, T(0));

    std::vector<double> sum_gy(C, 0.0), sum_gy_xhat(C, 0.0);
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < C; ++c) {
            const double inv = 1.0 / std::sqrt(var[c] + static_cast<double>(p.eps));
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w) {
                    const double xhat = (x(n, c, h, w) - mean[c]) * inv;
                    const double go = gy(n, c, h, w);
                    sum_gy[c] += go;
                    sum_gy_xhat[c] += go * xhat;
                }
        }
    for (int c = 0; c < C; ++c) {
        g.ggamma[c] = static_cast<T>(sum_gy_xhat[c]);
        g.gbeta[c] = static_cast<T>(sum_gy[c]);
    }
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < C; ++c) {
            const double inv = 1.0 / std::sqrt(var[c] + static_cast<double>(p.eps));
            const double gscale = p.gamma[c] * inv;
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w) {
                    const double go = gy(n, c, h, w);
                    if (p.mode == BnMode::kRunningStats) {
                        g.gx(n, c, h, w) = static_cast<T>(go * gscale);
                    } else {
                        const double xhat = (x(n, c, h, w) - mean[c]) * inv;
                        g.gx(n, c, h, w) = static_cast<T>(
                            gscale * (go - sum_gy[c] / m - xhat * sum_gy_xhat[c] / m));
                    }
                }
        }
    return g;
}

} // namespace rgbp::ops
