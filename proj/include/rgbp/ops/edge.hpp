#pragma once

#include <cmath>

#include "rgbp/tensor.hpp"

namespace rgbp::ops {

// Per-channel Scharr gradient magnitude with reflect padding (mirror
// without repeating the border pixel). Kernels are normalized by 1/16 so
// a unit step produces a unit response. Subgradient 0 where the magnitude
// is exactly zero.

namespace detail {

inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

// scharr_x[kh][kw] / 16; scharr_y is its transpose
inline constexpr double kScharr[3] = {3.0 / 16.0, 10.0 / 16.0, 3.0 / 16.0};

template <typename T>
void scharr_gradients(const Tensor<T>& x, int n, int c, int h, int w,
                      double& gx, double& gy) {
    gx = 0.0;
    gy = 0.0;
    for (int kh = -1; kh <= 1; ++kh) {
        const int hi = reflect_index(h + kh, x.h());
        for (int kw = -1; kw <= 1; ++kw) {
            const int wi = reflect_index(w + kw, x.w());
            const double v = x(n, c, hi, wi);
            gx += v * kw * kScharr[kh + 1];
            gy += v * kh * kScharr[kw + 1];
        }
    }
}

} // namespace detail

template <typename T>
Tensor<T> scharr_edge(const Tensor<T>& x) {
    Tensor<T> y = x.zeros_like();
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w) {
                    double gx, gy;
                    detail::scharr_gradients(x, n, c, h, w, gx, gy);
                    y(n, c, h, w) = static_cast<T>(std::sqrt(gx * gx + gy * gy));
                }
    return y;
}

template <typename T>
Tensor<T> scharr_edge_backward(const Tensor<T>& x, const Tensor<T>& gout) {
    Tensor<T> gin = x.zeros_like();
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int h = 0; h < x.h(); ++h)
                for (int w = 0; w < x.w(); ++w) {
                    double gx, gy;
                    detail::scharr_gradients(x, n, c, h, w, gx, gy);
                    const double mag = std::sqrt(gx * gx + gy * gy);
                    if (mag == 0.0) continue;
                    const double dgx = gout(n, c, h, w) * gx / mag;
                    const double dgy = gout(n, c, h, w) * gy / mag;
                    for (int kh = -1; kh <= 1; ++kh) {
                        const int hi = detail::reflect_index(h + kh, x.h());
                        for (int kw = -1; kw <= 1; ++kw) {
                            const int wi = detail::reflect_index(w + kw, x.w());
                            gin(n, c, hi, wi) += static_cast<T>(
                                dgx * kw * detail::kScharr[kh + 1] +
                                dgy * kh * detail::kScharr[kw + 1]);
                        }
                    }
                }
    return gin;
}

} // namespace rgbp::ops
