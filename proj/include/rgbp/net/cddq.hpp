#pragma once

#include <utility>

#include "rgbp/net/block.hpp"

namespace rgbp::net {

// Cross-domain fusion. SDMD enhances the RGB feature with a channel
// attention vector eta and a spatial demand map mu, then forwards a
// smoothed copy of mu to gate the polarization feature. CWDA pools both
// enhanced features and assigns per-channel fusion weights (alpha, beta)
// that are positive and sum to 1.
//
// The sigmoid-then-softmax order in the weight pipeline is kept exactly
// as specified even though it is unusual.
template <typename T>
struct CddqWeights {
    ConvBlock<T> conv_eta_max;  // 1x1 C->C on the global-max vector, no BN
    ConvBlock<T> conv_eta_avg;  // 1x1 C->C on the global-avg vector, no BN
    ConvBlock<T> conv_mu;       // 7x7 2->1 on stacked channel pools
    ConvBlock<T> conv_pol_gate; // 3x3 1->C on the smoothed demand map
    ops::LinearParams<T> fc1;   // 2C -> C
    ops::LinearParams<T> fc2;   // C -> 2C
    ConvBlock<T> conv_fuse;     // 1x1 2C -> C_out

    static CddqWeights make(int channels, int c_out) {
        CddqWeights w;
        // BN over a 1x1 spatial extent is degenerate, so the eta blocks run
        // without it; the two terms have independent weights.
        w.conv_eta_max = ConvBlock<T>::make(channels, channels, 1, 1, 0, false,
                                            /*with_bn=*/false);
        w.conv_eta_avg = ConvBlock<T>::make(channels, channels, 1, 1, 0, false,
                                            /*with_bn=*/false);
        w.conv_mu = ConvBlock<T>::theta(2, 1, 7, 1);
        w.conv_pol_gate = ConvBlock<T>::theta(1, channels, 3, 1);
        w.fc1.weight = Tensor<T>(channels, 2 * channels, 1, 1);
        w.fc1.bias.assign(channels, T(0));
        w.fc2.weight = Tensor<T>(2 * channels, channels, 1, 1);
        w.fc2.bias.assign(2 * channels, T(0));
        w.conv_fuse = ConvBlock<T>::theta(2 * channels, c_out, 1, 1);
        return w;
    }

    int channels() const { return conv_pol_gate.conv.c_out(); }
    int c_out() const { return conv_fuse.conv.c_out(); }

    CddqWeights zeros_like() const {
        CddqWeights z = *this;
        z.conv_eta_max = conv_eta_max.zeros_like();
        z.conv_eta_avg = conv_eta_avg.zeros_like();
        z.conv_mu = conv_mu.zeros_like();
        z.conv_pol_gate = conv_pol_gate.zeros_like();
        z.conv_fuse = conv_fuse.zeros_like();
        z.fc1.weight = fc1.weight.zeros_like();
        std::fill(z.fc1.bias.begin(), z.fc1.bias.end(), T(0));
        z.fc2.weight = fc2.weight.zeros_like();
        std::fill(z.fc2.bias.begin(), z.fc2.bias.end(), T(0));
        return z;
    }
};

template <typename T>
struct SdmdOutputs {
    Tensor<T> f_rgb_star, f_pol_star;
    Tensor<T> mu;  // (N, 1, H, W), values in (0, 1)
    Tensor<T> eta; // (N, C, 1, 1), values in (0, 1)
};

template <typename T>
struct SdmdCache {
    Tensor<T> f_rgb, f_pol;
    typename ConvBlock<T>::Cache eta_max_cc, eta_avg_cc, mu_cc, gate_cc;
    Tensor<T> eta_pre, eta;
    Tensor<T> f_prime;
    Tensor<T> mu_pre, mu;
    Tensor<T> pol_gate;
};

template <typename T>
SdmdOutputs<T> sdmd_forward(const Tensor<T>& f_rgb, const Tensor<T>& f_pol,
                            const CddqWeights<T>& w, SdmdCache<T>& cc) {
    require_same_shape(f_rgb, f_pol, "SDMD");
    if (f_rgb.c() != w.channels())
        throw ShapeError("SDMD: channel count " + std::to_string(f_rgb.c()) +
                         " != weights " + std::to_string(w.channels()));
    cc.f_rgb = f_rgb;
    cc.f_pol = f_pol;

    auto tm = w.conv_eta_max.forward(ops::global_max(f_rgb), cc.eta_max_cc);
    auto ta = w.conv_eta_avg.forward(ops::global_avg(f_rgb), cc.eta_avg_cc);
    cc.eta_pre = ops::add(tm, ta);
    cc.eta = ops::sigmoid(cc.eta_pre);

    cc.f_prime = ops::mul(cc.eta, f_rgb);
    auto stacked = ops::concat_channels(ops::channel_avg(cc.f_prime),
                                        ops::channel_max(cc.f_prime));
    cc.mu_pre = w.conv_mu.forward(stacked, cc.mu_cc);
    cc.mu = ops::sigmoid(cc.mu_pre);

    SdmdOutputs<T> out;
    out.f_rgb_star = ops::add(f_rgb, ops::mul(cc.mu, cc.f_prime));
    cc.pol_gate = w.conv_pol_gate.forward(ops::avg_pool(cc.mu, 3, 1, 1), cc.gate_cc);
    out.f_pol_star = ops::add(f_pol, ops::mul(cc.pol_gate, f_pol));
    out.mu = cc.mu;
    out.eta = cc.eta;
    return out;
}

template <typename T>
SdmdOutputs<T> sdmd_forward(const Tensor<T>& f_rgb, const Tensor<T>& f_pol,
                            const CddqWeights<T>& w) {
    SdmdCache<T> cc;
    return sdmd_forward(f_rgb, f_pol, w, cc);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> sdmd_backward(const SdmdCache<T>& cc,
                                              const CddqWeights<T>& w,
                                              const Tensor<T>& g_rgb_star,
                                              const Tensor<T>& g_pol_star,
                                              CddqWeights<T>& grads) {
    // f_pol_star = f_pol + pol_gate * f_pol
    auto g_pol = g_pol_star;
    auto [g_gate, g_pol2] = ops::mul_backward(cc.pol_gate, cc.f_pol, g_pol_star);
    ops::accumulate(g_pol, g_pol2);
    auto g_amu = w.conv_pol_gate.backward(cc.gate_cc, g_gate, grads.conv_pol_gate);
    auto g_mu = ops::avg_pool_backward(cc.mu, 3, 1, 1, g_amu);

    // f_rgb_star = f_rgb + mu * f_prime
    auto g_rgb = g_rgb_star;
    auto [g_mu2, g_fprime] = ops::mul_backward(cc.mu, cc.f_prime, g_rgb_star);
    ops::accumulate(g_mu, g_mu2);

    // mu = sigmoid(conv_mu([cavg(f'), cmax(f')]))
    auto g_mu_pre = ops::sigmoid_backward(cc.mu_pre, g_mu);
    auto g_stacked = w.conv_mu.backward(cc.mu_cc, g_mu_pre, grads.conv_mu);
    auto parts = ops::split_channels(g_stacked, {1, 1});
    ops::accumulate(g_fprime, ops::channel_avg_backward(cc.f_prime, parts[0]));
    ops::accumulate(g_fprime, ops::channel_max_backward(cc.f_prime, parts[1]));

    // f_prime = eta * f_rgb
    auto [g_eta, g_rgb2] = ops::mul_backward(cc.eta, cc.f_rgb, g_fprime);
    ops::accumulate(g_rgb, g_rgb2);

    // eta = sigmoid(conv_max(gmax(F)) + conv_avg(gavg(F)))
    auto g_eta_pre = ops::sigmoid_backward(cc.eta_pre, g_eta);
    auto g_gm = w.conv_eta_max.backward(cc.eta_max_cc, g_eta_pre, grads.conv_eta_max);
    auto g_ga = w.conv_eta_avg.backward(cc.eta_avg_cc, g_eta_pre, grads.conv_eta_avg);
    ops::accumulate(g_rgb, ops::global_max_backward(cc.f_rgb, g_gm));
    ops::accumulate(g_rgb, ops::global_avg_backward(cc.f_rgb, g_ga));

    return {std::move(g_rgb), std::move(g_pol)};
}

template <typename T>
struct CwdaOutputs {
    Tensor<T> f_fused;
    Tensor<T> alpha, beta; // (N, C, 1, 1), alpha + beta = 1 per channel
};

template <typename T>
struct CwdaCache {
    Tensor<T> f_rgb_star, f_pol_star;
    Tensor<T> pooled;          // (N, 2C, 1, 1)
    Tensor<T> fc1_pre;         // fc1 output, pre-SiLU
    Tensor<T> h1;              // silu(fc1_pre)
    Tensor<T> fc2_pre;         // fc2 output, pre-sigmoid
    Tensor<T> logit_a, logit_b;
    Tensor<T> alpha, beta;
    typename ConvBlock<T>::Cache fuse_cc;
};

template <typename T>
CwdaOutputs<T> cwda_forward(const Tensor<T>& f_rgb_star, const Tensor<T>& f_pol_star,
                            const CddqWeights<T>& w, CwdaCache<T>& cc) {
    require_same_shape(f_rgb_star, f_pol_star, "CWDA");
    const int C = f_rgb_star.c();
    cc.f_rgb_star = f_rgb_star;
    cc.f_pol_star = f_pol_star;
    cc.pooled = ops::concat_channels(ops::global_avg(f_rgb_star),
                                     ops::global_avg(f_pol_star));
    cc.fc1_pre = ops::fully_connected(cc.pooled, w.fc1);
    cc.h1 = ops::silu(cc.fc1_pre);
    cc.fc2_pre = ops::fully_connected(cc.h1, w.fc2);
    auto logits = ops::sigmoid(cc.fc2_pre);
    auto halves = ops::split_channels(logits, {C, C});
    cc.logit_a = halves[0];
    cc.logit_b = halves[1];
    auto [alpha, beta] = ops::softmax_pair(cc.logit_a, cc.logit_b);
    cc.alpha = alpha;
    cc.beta = beta;

    CwdaOutputs<T> out;
    out.f_fused = w.conv_fuse.forward(
        ops::concat_channels(ops::mul(alpha, f_rgb_star), ops::mul(beta, f_pol_star)),
        cc.fuse_cc);
    out.alpha = std::move(alpha);
    out.beta = std::move(beta);
    return out;
}

template <typename T>
CwdaOutputs<T> cwda_forward(const Tensor<T>& f_rgb_star, const Tensor<T>& f_pol_star,
                            const CddqWeights<T>& w) {
    CwdaCache<T> cc;
    return cwda_forward(f_rgb_star, f_pol_star, w, cc);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> cwda_backward(const CwdaCache<T>& cc,
                                              const CddqWeights<T>& w,
                                              const Tensor<T>& g_fused,
                                              CddqWeights<T>& grads) {
    const int C = cc.f_rgb_star.c();
    auto g_cat = w.conv_fuse.backward(cc.fuse_cc, g_fused, grads.conv_fuse);
    auto parts = ops::split_channels(g_cat, {C, C});
    auto [g_alpha, g_frs] = ops::mul_backward(cc.alpha, cc.f_rgb_star, parts[0]);
    auto [g_beta, g_fps] = ops::mul_backward(cc.beta, cc.f_pol_star, parts[1]);

    auto [g_la, g_lb] = ops::softmax_pair_backward(cc.logit_a, cc.logit_b,
                                                   g_alpha, g_beta);
    auto g_logits = ops::concat_channels(g_la, g_lb);
    auto g_fc2_pre = ops::sigmoid_backward(cc.fc2_pre, g_logits);
    auto g2 = ops::fully_connected_backward(cc.h1, w.fc2, g_fc2_pre);
    ops::accumulate(grads.fc2.weight, g2.gw);
    for (std::size_t i = 0; i < g2.gb.size(); ++i) grads.fc2.bias[i] += g2.gb[i];
    auto g_fc1_pre = ops::silu_backward(cc.fc1_pre, g2.gx);
    auto g1 = ops::fully_connected_backward(cc.pooled, w.fc1, g_fc1_pre);
    ops::accumulate(grads.fc1.weight, g1.gw);
    for (std::size_t i = 0; i < g1.gb.size(); ++i) grads.fc1.bias[i] += g1.gb[i];
    auto g_pooled = ops::split_channels(g1.gx, {C, C});
    ops::accumulate(g_frs, ops::global_avg_backward(cc.f_rgb_star, g_pooled[0]));
    ops::accumulate(g_fps, ops::global_avg_backward(cc.f_pol_star, g_pooled[1]));
    return {std::move(g_frs), std::move(g_fps)};
}

template <typename T>
struct CddqDiagnostics {
    Tensor<T> mu, eta, alpha, beta;
};

template <typename T>
struct CddqCache {
    SdmdCache<T> sdmd;
    CwdaCache<T> cwda;
};

// Full block: SDMD then CWDA. `skip_sdmd` is the ablation hook that
// passes both features through unchanged before fusion.
template <typename T>
std::pair<Tensor<T>, CddqDiagnostics<T>> cddq_forward(const Tensor<T>& f_rgb,
                                                      const Tensor<T>& f_pol,
                                                      const CddqWeights<T>& w,
                                                      CddqCache<T>& cc,
                                                      bool skip_sdmd = false) {
    CddqDiagnostics<T> diag;
    Tensor<T> frs = f_rgb, fps = f_pol;
    if (!skip_sdmd) {
        auto s = sdmd_forward(f_rgb, f_pol, w, cc.sdmd);
        frs = std::move(s.f_rgb_star);
        fps = std::move(s.f_pol_star);
        diag.mu = std::move(s.mu);
        diag.eta = std::move(s.eta);
    }
    auto c = cwda_forward(frs, fps, w, cc.cwda);
    diag.alpha = c.alpha;
    diag.beta = c.beta;
    return {std::move(c.f_fused), std::move(diag)};
}

template <typename T>
std::pair<Tensor<T>, CddqDiagnostics<T>> cddq_forward(const Tensor<T>& f_rgb,
                                                      const Tensor<T>& f_pol,
                                                      const CddqWeights<T>& w,
                                                      bool skip_sdmd = false) {
    CddqCache<T> cc;
    return cddq_forward(f_rgb, f_pol, w, cc, skip_sdmd);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> cddq_backward(const CddqCache<T>& cc,
                                              const CddqWeights<T>& w,
                                              const Tensor<T>& g_fused,
                                              CddqWeights<T>& grads,
                                              bool skip_sdmd = false) {
    auto [g_frs, g_fps] = cwda_backward(cc.cwda, w, g_fused, grads);
    if (skip_sdmd) return {std::move(g_frs), std::move(g_fps)};
    return sdmd_backward(cc.sdmd, w, g_frs, g_fps, grads);
}

} // namespace rgbp::net
