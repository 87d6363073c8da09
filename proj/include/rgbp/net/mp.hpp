#pragma once

#include "rgbp/net/block.hpp"

namespace rgbp::net {

enum class MpVariant { kSpatial, kChannel };

// Material perception: shape-preserving bottlenecks on the polarization
// branch. The spatial variant (MSP) runs two strided convs and two
// transposed convs; the channel variant (MCP) inserts a squeeze-excite
// style gate M(x) = x + x (x) sigmoid(m2(m1(gavg(x)))) between a single
// downsample and its transposed inverse.
template <typename T>
struct MpWeights {
    MpVariant variant = MpVariant::kSpatial;

    // spatial
    ConvBlock<T> down1, down2, up1, up2;

    // channel
    ConvBlock<T> down, mix, up;
    ops::LinearParams<T> m1, m2;

    static MpWeights spatial(int channels) {
        MpWeights w;
        w.variant = MpVariant::kSpatial;
        w.down1 = ConvBlock<T>::theta(channels, channels, 3, 2);
        w.down2 = ConvBlock<T>::theta(channels, channels, 3, 2);
        w.up1 = ConvBlock<T>::rho22(channels, channels);
        w.up2 = ConvBlock<T>::rho22(channels, channels);
        return w;
    }

    static MpWeights channel(int channels, int reduction = 4) {
        if (reduction < 1 || channels % reduction != 0)
            throw ShapeError("MCP: reduction must divide the channel count");
        MpWeights w;
        w.variant = MpVariant::kChannel;
        w.down = ConvBlock<T>::theta(channels, channels, 3, 2);
        w.mix = ConvBlock<T>::theta(channels, channels, 1, 1);
        w.m1.weight = Tensor<T>(channels / reduction, channels, 1, 1);
        w.m1.bias.assign(channels / reduction, T(0));
        w.m2.weight = Tensor<T>(channels, channels / reduction, 1, 1);
        w.m2.bias.assign(channels, T(0));
        w.up = ConvBlock<T>::rho22(channels, channels);
        return w;
    }

    MpWeights zeros_like() const {
        MpWeights z = *this;
        if (variant == MpVariant::kSpatial) {
            z.down1 = down1.zeros_like();
            z.down2 = down2.zeros_like();
            z.up1 = up1.zeros_like();
            z.up2 = up2.zeros_like();
        } else {
            z.down = down.zeros_like();
            z.mix = mix.zeros_like();
            z.up = up.zeros_like();
            z.m1.weight = m1.weight.zeros_like();
            std::fill(z.m1.bias.begin(), z.m1.bias.end(), T(0));
            z.m2.weight = m2.weight.zeros_like();
            std::fill(z.m2.bias.begin(), z.m2.bias.end(), T(0));
        }
        return z;
    }

    struct Cache {
        typename ConvBlock<T>::Cache cc1, cc2, cc3, cc4;
        // channel gate intermediates
        Tensor<T> gate_in;  // mix block output, input of M
        Tensor<T> h1, h2;   // fc activations, pre-sigmoid for h2
        Tensor<T> gate;     // sigmoid(h2)
    };

    Tensor<T> forward(const Tensor<T>& f, Cache& cc) const {
        if (variant == MpVariant::kSpatial) {
            if (f.h() % 4 != 0 || f.w() % 4 != 0)
                throw ShapeError("MSP: spatial dims must be divisible by 4, got " +
                                 f.shape_str());
            auto a = down1.forward(f, cc.cc1);
            auto b = down2.forward(a, cc.cc2);
            auto c = up1.forward(b, cc.cc3);
            return up2.forward(c, cc.cc4);
        }
        if (f.h() % 2 != 0 || f.w() % 2 != 0)
            throw ShapeError("MCP: spatial dims must be divisible by 2, got " +
                             f.shape_str());
        auto a = down.forward(f, cc.cc1);
        cc.gate_in = mix.forward(a, cc.cc2);
        cc.h1 = ops::fully_connected(ops::global_avg(cc.gate_in), m1);
        cc.h2 = ops::fully_connected(cc.h1, m2);
        cc.gate = ops::sigmoid(cc.h2);
        auto gated = ops::add(cc.gate_in, ops::mul(cc.gate_in, cc.gate));
        return up.forward(gated, cc.cc3);
    }

    Tensor<T> forward(const Tensor<T>& f) const {
        Cache cc;
        return forward(f, cc);
    }

    Tensor<T> backward(const Cache& cc, const Tensor<T>& gy, MpWeights& grads) const {
        if (variant == MpVariant::kSpatial) {
            auto g = up2.backward(cc.cc4, gy, grads.up2);
            g = up1.backward(cc.cc3, g, grads.up1);
            g = down2.backward(cc.cc2, g, grads.down2);
            return down1.backward(cc.cc1, g, grads.down1);
        }
        auto g_gated = up.backward(cc.cc3, gy, grads.up);
        // gated = x + x*gate, x = gate_in
        auto gx = g_gated;
        auto [gx2, ggate] = ops::mul_backward(cc.gate_in, cc.gate, g_gated);
        ops::accumulate(gx, gx2);
        auto gh2 = ops::sigmoid_backward(cc.h2, ggate);
        auto g2 = ops::fully_connected_backward(cc.h1, m2, gh2);
        ops::accumulate(grads.m2.weight, g2.gw);
        for (std::size_t i = 0; i < g2.gb.size(); ++i) grads.m2.bias[i] += g2.gb[i];
        auto ga_in = ops::global_avg(cc.gate_in);
        auto g1 = ops::fully_connected_backward(ga_in, m1, g2.gx);
        ops::accumulate(grads.m1.weight, g1.gw);
        for (std::size_t i = 0; i < g1.gb.size(); ++i) grads.m1.bias[i] += g1.gb[i];
        ops::accumulate(gx, ops::global_avg_backward(cc.gate_in, g1.gx));
        auto g_mixin = mix.backward(cc.cc2, gx, grads.mix);
        return down.backward(cc.cc1, g_mixin, grads.down);
    }
};

// msp_forward / mcp_forward naming used by the CLI and tests.
template <typename T>
Tensor<T> msp_forward(const Tensor<T>& f, const MpWeights<T>& w) {
    if (w.variant != MpVariant::kSpatial)
        throw ShapeError("msp_forward: weights are not the spatial variant");
    return w.forward(f);
}

template <typename T>
Tensor<T> mcp_forward(const Tensor<T>& f, const MpWeights<T>& w) {
    if (w.variant != MpVariant::kChannel)
        throw ShapeError("mcp_forward: weights are not the channel variant");
    return w.forward(f);
}

} // namespace rgbp::net
