#pragma once

#include "rgbp/ops.hpp"

namespace rgbp::net {

// Composite conv -> batch norm -> SiLU block. Both the strided and the
// transposed variants of the notation share this structure; the block
// constructor enforces the ordering. BN/activation can be disabled for
// the few places that use a bare conv (1x1 gates on pooled vectors, the
// detection head output).
template <typename T>
struct ConvBlock {
    ops::ConvParams<T> conv;
    ops::BatchNormParams<T> bn;
    bool use_bn = true;
    bool use_act = true;

    // k x k conv, stride s, "same" padding (k-1)/2 unless overridden.
    static ConvBlock make(int c_in, int c_out, int k, int s, int pad,
                          bool transposed = false, bool with_bn = true,
                          bool with_act = true) {
        ConvBlock b;
        b.conv.weight = Tensor<T>(c_out, c_in, k, k);
        b.conv.bias.assign(c_out, T(0));
        b.conv.stride = s;
        b.conv.pad = pad;
        b.conv.transposed = transposed;
        b.bn = ops::BatchNormParams<T>::identity(c_out);
        b.use_bn = with_bn;
        b.use_act = with_act;
        return b;
    }

    // theta_{k.s}: stride-s conv with same padding
    static ConvBlock theta(int c_in, int c_out, int k, int s) {
        return make(c_in, c_out, k, s, (k - 1) / 2);
    }

    // rho_{2.2}: exact-doubling transposed conv
    static ConvBlock rho22(int c_in, int c_out) {
        return make(c_in, c_out, 2, 2, 0, /*transposed=*/true);
    }

    struct Cache {
        Tensor<T> x, y_conv, y_bn;
    };

    Tensor<T> forward(const Tensor<T>& x, Cache& cc) const {
        cc.x = x;
        cc.y_conv = ops::conv2d(x, conv);
        cc.y_bn = use_bn ? ops::batch_norm(cc.y_conv, bn) : cc.y_conv;
        return use_act ? ops::silu(cc.y_bn) : cc.y_bn;
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        Cache cc;
        return forward(x, cc);
    }

    // Accumulates parameter gradients into `grads` (a zero-initialized
    // mirror of this block) and returns the input gradient.
    Tensor<T> backward(const Cache& cc, const Tensor<T>& gy, ConvBlock& grads) const {
        Tensor<T> g = use_act ? ops::silu_backward(cc.y_bn, gy) : gy;
        if (use_bn) {
            auto bg = ops::batch_norm_backward(cc.y_conv, bn, g);
            for (std::size_t i = 0; i < bg.ggamma.size(); ++i) {
                grads.bn.gamma[i] += bg.ggamma[i];
                grads.bn.beta[i] += bg.gbeta[i];
            }
            g = std::move(bg.gx);
        }
        auto cg = ops::conv2d_backward(cc.x, conv, g);
        ops::accumulate(grads.conv.weight, cg.gw);
        for (std::size_t i = 0; i < cg.gb.size(); ++i) grads.conv.bias[i] += cg.gb[i];
        return std::move(cg.gx);
    }

    ConvBlock zeros_like() const {
        ConvBlock z = *this;
        z.conv.weight = conv.weight.zeros_like();
        std::fill(z.conv.bias.begin(), z.conv.bias.end(), T(0));
        std::fill(z.bn.gamma.begin(), z.bn.gamma.end(), T(0));
        std::fill(z.bn.beta.begin(), z.bn.beta.end(), T(0));
        return z;
    }
};

} // namespace rgbp::net
