#pragma once

#include <utility>

#include "rgbp/net/block.hpp"

namespace rgbp::net {

// Polarization integration: fuses the (normalized) angle map with the
// degree map. The angle is gated by degree-derived attention, since the
// measured angle is unreliable where the polarization degree is low; a
// second branch folds in the degree's edge response.
//
//   F_ar  = phi (x) ( theta3([cavg(rho), cmax(rho)]) + sigmoid(maxpool5(theta3(rho))) )
//   F_pol = theta3([ theta3(F_ar), theta3(rho + edges(rho)) ])
template <typename T>
struct PiWeights {
    ConvBlock<T> conv_attn;  // 2 -> 3 on stacked channel pools
    ConvBlock<T> conv_pool;  // 3 -> 3 ahead of the spatial max pool
    ConvBlock<T> conv_phi;   // 3 -> C/2 on the gated angle feature
    ConvBlock<T> conv_edge;  // 3 -> C/2 on rho + edge response
    ConvBlock<T> conv_out;   // C -> C

    static PiWeights make(int c_pi) {
        if (c_pi < 2 || c_pi % 2 != 0)
            throw ShapeError("PI: C_pi must be even and >= 2");
        PiWeights w;
        w.conv_attn = ConvBlock<T>::theta(2, 3, 3, 1);
        w.conv_pool = ConvBlock<T>::theta(3, 3, 3, 1);
        w.conv_phi = ConvBlock<T>::theta(3, c_pi / 2, 3, 1);
        w.conv_edge = ConvBlock<T>::theta(3, c_pi / 2, 3, 1);
        w.conv_out = ConvBlock<T>::theta(c_pi, c_pi, 3, 1);
        return w;
    }

    int c_pi() const { return conv_out.conv.c_out(); }

    PiWeights zeros_like() const {
        PiWeights z;
        z.conv_attn = conv_attn.zeros_like();
        z.conv_pool = conv_pool.zeros_like();
        z.conv_phi = conv_phi.zeros_like();
        z.conv_edge = conv_edge.zeros_like();
        z.conv_out = conv_out.zeros_like();
        return z;
    }

    struct Cache {
        Tensor<T> aolp, dolp;
        typename ConvBlock<T>::Cache attn_cc, pool_cc, phi_cc, edge_cc, out_cc;
        Tensor<T> pool_out;     // conv_pool block output (max pool input)
        Tensor<T> pool_pre_sig; // max-pooled conv_pool output, pre-sigmoid
        Tensor<T> gate;         // t1 + sigmoid(pool_pre_sig)
    };

    Tensor<T> forward(const Tensor<T>& aolp, const Tensor<T>& dolp, Cache& cc) const {
        if (aolp.c() != 3 || dolp.c() != 3)
            throw ShapeError("PI: inputs must have 3 channels, got " +
                             aolp.shape_str() + " / " + dolp.shape_str());
        require_same_shape(aolp, dolp, "PI");
        if (aolp.h() < 5 || aolp.w() < 5)
            throw ShapeError("PI: spatial dims must be >= 5");
        cc.aolp = aolp;
        cc.dolp = dolp;

        auto pools = ops::concat_channels(ops::channel_avg(dolp), ops::channel_max(dolp));
        auto t1 = conv_attn.forward(pools, cc.attn_cc);
        cc.pool_out = conv_pool.forward(dolp, cc.pool_cc);
        cc.pool_pre_sig = ops::max_pool(cc.pool_out, 5, 1, 2);
        cc.gate = ops::add(t1, ops::sigmoid(cc.pool_pre_sig));
        auto f_ar = ops::mul(aolp, cc.gate);

        auto b_phi = conv_phi.forward(f_ar, cc.phi_cc);
        auto edge_in = ops::add(dolp, ops::scharr_edge(dolp));
        auto b_edge = conv_edge.forward(edge_in, cc.edge_cc);
        return conv_out.forward(ops::concat_channels(b_phi, b_edge), cc.out_cc);
    }

    Tensor<T> forward(const Tensor<T>& aolp, const Tensor<T>& dolp) const {
        Cache cc;
        return forward(aolp, dolp, cc);
    }

    // Returns (g_aolp, g_dolp); parameter gradients accumulate into `grads`.
    std::pair<Tensor<T>, Tensor<T>> backward(const Cache& cc, const Tensor<T>& gy,
                                             PiWeights& grads) const {
        const int half = c_pi() / 2;
        auto gcat = conv_out.backward(cc.out_cc, gy, grads.conv_out);
        auto parts = ops::split_channels(gcat, {half, half});

        auto g_edge_in = conv_edge.backward(cc.edge_cc, parts[1], grads.conv_edge);
        auto g_dolp = g_edge_in; // direct term of rho + edges(rho)
        ops::accumulate(g_dolp, ops::scharr_edge_backward(cc.dolp, g_edge_in));

        auto g_far = conv_phi.backward(cc.phi_cc, parts[0], grads.conv_phi);
        auto [g_aolp, g_gate] = ops::mul_backward(cc.aolp, cc.gate, g_far);

        // gate = t1 + sigmoid(max_pool(conv_pool(rho)))
        auto g_pool = ops::sigmoid_backward(cc.pool_pre_sig, g_gate);
        auto g_u = ops::max_pool_backward(cc.pool_out, 5, 1, 2, g_pool);
        ops::accumulate(g_dolp, conv_pool.backward(cc.pool_cc, g_u, grads.conv_pool));

        auto g_pools = conv_attn.backward(cc.attn_cc, g_gate, grads.conv_attn);
        auto pool_parts = ops::split_channels(g_pools, {1, 1});
        ops::accumulate(g_dolp, ops::channel_avg_backward(cc.dolp, pool_parts[0]));
        ops::accumulate(g_dolp, ops::channel_max_backward(cc.dolp, pool_parts[1]));

        return {std::move(g_aolp), std::move(g_dolp)};
    }
};

} // namespace rgbp::net
