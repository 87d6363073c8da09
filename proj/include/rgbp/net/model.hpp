#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "rgbp/boxes.hpp"
#include "rgbp/net/cddq.hpp"
#include "rgbp/net/config.hpp"
#include "rgbp/net/mp.hpp"
#include "rgbp/net/pi.hpp"
#include "rgbp/rng.hpp"

namespace rgbp::net {

template <typename T>
struct StageWeights {
    ConvBlock<T> rgb_down, rgb_mix, pol_down, pol_mix;
    MpWeights<T> mp;
    CddqWeights<T> cddq;

    StageWeights zeros_like() const {
        StageWeights z = *this;
        z.rgb_down = rgb_down.zeros_like();
        z.rgb_mix = rgb_mix.zeros_like();
        z.pol_down = pol_down.zeros_like();
        z.pol_mix = pol_mix.zeros_like();
        z.mp = mp.zeros_like();
        z.cddq = cddq.zeros_like();
        return z;
    }
};

template <typename T>
struct NetWeights {
    PiWeights<T> pi;
    std::vector<StageWeights<T>> stages;
    std::vector<ConvBlock<T>> head; // bare 1x1 conv per pyramid level

    NetWeights zeros_like() const {
        NetWeights z;
        z.pi = pi.zeros_like();
        z.stages.reserve(stages.size());
        for (const auto& s : stages) z.stages.push_back(s.zeros_like());
        z.head.reserve(head.size());
        for (const auto& h : head) z.head.push_back(h.zeros_like());
        return z;
    }
};

template <typename T>
NetWeights<T> make_net_weights(const NetworkConfig& cfg) {
    cfg.validate();
    NetWeights<T> w;
    w.pi = PiWeights<T>::make(cfg.c_pi);
    const int anchors = static_cast<int>(cfg.anchors.size());
    for (int i = 0; i < cfg.stages(); ++i) {
        const int width = cfg.widths[i];
        const int in_rgb = i == 0 ? 3 : cfg.widths[i - 1];
        const int in_pol = i == 0 ? cfg.c_pi : cfg.widths[i - 1];
        StageWeights<T> s;
        s.rgb_down = ConvBlock<T>::theta(in_rgb, width, 3, 2);
        s.rgb_mix = ConvBlock<T>::theta(width, width, 3, 1);
        s.pol_down = ConvBlock<T>::theta(in_pol, width, 3, 2);
        s.pol_mix = ConvBlock<T>::theta(width, width, 3, 1);
        s.mp = cfg.mp_assignment[i] == MpVariant::kSpatial
                   ? MpWeights<T>::spatial(width)
                   : MpWeights<T>::channel(width, cfg.mcp_reduction);
        s.cddq = CddqWeights<T>::make(width, width);
        w.stages.push_back(std::move(s));
        w.head.push_back(ConvBlock<T>::make(width, 5 * anchors, 1, 1, 0, false,
                                            /*with_bn=*/false, /*with_act=*/false));
    }
    return w;
}

// -------- parameter traversal --------
//
// Every weight tensor/vector in the model visited in one fixed, named
// order. The visitor receives (name, param, trainable); running BN
// statistics are visited with trainable=false so initialization skips
// them while serialization still covers them.

template <typename B, typename V>
void visit_block(B&& b, const std::string& p, V&& v) {
    v(p + ".w", b.conv.weight, true);
    v(p + ".b", b.conv.bias, true);
    if (b.use_bn) {
        v(p + ".gamma", b.bn.gamma, true);
        v(p + ".beta", b.bn.beta, true);
        v(p + ".rmean", b.bn.running_mean, false);
        v(p + ".rvar", b.bn.running_var, false);
    }
}

template <typename W, typename V>
void visit_pi(W&& w, const std::string& p, V&& v) {
    visit_block(w.conv_attn, p + ".attn", v);
    visit_block(w.conv_pool, p + ".pool", v);
    visit_block(w.conv_phi, p + ".phi", v);
    visit_block(w.conv_edge, p + ".edge", v);
    visit_block(w.conv_out, p + ".out", v);
}

template <typename W, typename V>
void visit_mp(W&& w, const std::string& p, V&& v) {
    if (w.variant == MpVariant::kSpatial) {
        visit_block(w.down1, p + ".down1", v);
        visit_block(w.down2, p + ".down2", v);
        visit_block(w.up1, p + ".up1", v);
        visit_block(w.up2, p + ".up2", v);
    } else {
        visit_block(w.down, p + ".down", v);
        visit_block(w.mix, p + ".mix", v);
        v(p + ".m1.w", w.m1.weight, true);
        v(p + ".m1.b", w.m1.bias, true);
        v(p + ".m2.w", w.m2.weight, true);
        v(p + ".m2.b", w.m2.bias, true);
        visit_block(w.up, p + ".up", v);
    }
}

template <typename W, typename V>
void visit_cddq(W&& w, const std::string& p, V&& v) {
    visit_block(w.conv_eta_max, p + ".eta_max", v);
    visit_block(w.conv_eta_avg, p + ".eta_avg", v);
    visit_block(w.conv_mu, p + ".mu", v);
    visit_block(w.conv_pol_gate, p + ".pol_gate", v);
    v(p + ".fc1.w", w.fc1.weight, true);
    v(p + ".fc1.b", w.fc1.bias, true);
    v(p + ".fc2.w", w.fc2.weight, true);
    v(p + ".fc2.b", w.fc2.bias, true);
    visit_block(w.conv_fuse, p + ".fuse", v);
}

template <typename W, typename V>
void visit_net(W&& w, V&& v) {
    visit_pi(w.pi, "pi", v);
    for (std::size_t i = 0; i < w.stages.size(); ++i) {
        const std::string p = "stage" + std::to_string(i);
        auto& s = w.stages[i];
        visit_block(s.rgb_down, p + ".rgb_down", v);
        visit_block(s.rgb_mix, p + ".rgb_mix", v);
        visit_block(s.pol_down, p + ".pol_down", v);
        visit_block(s.pol_mix, p + ".pol_mix", v);
        visit_mp(s.mp, p + ".mp", v);
        visit_cddq(s.cddq, p + ".cddq", v);
    }
    for (std::size_t i = 0; i < w.head.size(); ++i)
        visit_block(w.head[i], "head" + std::to_string(i), v);
}

// Fan-in scaled uniform init from the portable PRNG: weight tensors get
// U(-sqrt(6/fan_in), sqrt(6/fan_in)) drawn in visit order; biases stay
// zero and BN stays identity.
template <typename T>
NetWeights<T> init_weights(const NetworkConfig& cfg) {
    auto w = make_net_weights<T>(cfg);
    Rng rng(cfg.seed);
    visit_net(w, [&](const std::string&, auto& p, bool trainable) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Tensor<T>>) {
            if (!trainable) return;
            const double fan_in = static_cast<double>(p.c()) * p.h() * p.w();
            const double bound = std::sqrt(6.0 / fan_in);
            for (std::size_t i = 0; i < p.size(); ++i)
                p[i] = static_cast<T>(rng.uniform(-bound, bound));
        }
    });
    return w;
}

// -------- backbone --------

template <typename T>
struct StageCache {
    typename ConvBlock<T>::Cache rd, rm, pd, pm;
    typename MpWeights<T>::Cache mp;
    CddqCache<T> cddq;
    // plain-fuse path (use_cwda = false)
    SdmdCache<T> sdmd;
    typename ConvBlock<T>::Cache fuse;
    int cat_channels = 0;
};

template <typename T>
struct BackboneCache {
    std::vector<StageCache<T>> stages;
    std::vector<CddqDiagnostics<T>> diag;
};

template <typename T>
std::vector<Tensor<T>> backbone_forward(const Tensor<T>& rgb, const Tensor<T>& pol,
                                        const NetworkConfig& cfg, const NetWeights<T>& w,
                                        BackboneCache<T>& cache) {
    cfg.validate();
    if (rgb.n() != pol.n() || rgb.h() != pol.h() || rgb.w() != pol.w())
        throw ShapeError("backbone: rgb/pol spatial mismatch " + rgb.shape_str() + " vs " +
                         pol.shape_str());
    if (rgb.c() != 3)
        throw ShapeError("backbone: rgb input must have 3 channels, got " + rgb.shape_str());
    if (pol.c() != cfg.c_pi)
        throw ShapeError("backbone: pol input channels != c_pi, got " + pol.shape_str());
    const int d = cfg.min_divisor();
    if (rgb.h() % d != 0 || rgb.w() % d != 0)
        throw ShapeError("backbone: spatial dims must be divisible by " + std::to_string(d) +
                         ", got " + rgb.shape_str());

    cache.stages.resize(cfg.stages());
    cache.diag.resize(cfg.stages());
    std::vector<Tensor<T>> pyramid;
    Tensor<T> frgb = rgb, fpol = pol;
    for (int i = 0; i < cfg.stages(); ++i) {
        const auto& s = w.stages[i];
        auto& cc = cache.stages[i];
        frgb = s.rgb_mix.forward(s.rgb_down.forward(frgb, cc.rd), cc.rm);
        fpol = s.pol_mix.forward(s.pol_down.forward(fpol, cc.pd), cc.pm);
        if (cfg.use_mp) fpol = s.mp.forward(fpol, cc.mp);

        if (!cfg.fusion[i]) {
            pyramid.push_back(frgb);
            continue;
        }
        if (cfg.use_cwda) {
            auto [fused, diag] = cddq_forward(frgb, fpol, s.cddq, cc.cddq, !cfg.use_sdmd);
            cache.diag[i] = std::move(diag);
            pyramid.push_back(std::move(fused));
        } else {
            Tensor<T> frs = frgb, fps = fpol;
            if (cfg.use_sdmd) {
                auto out = sdmd_forward(frgb, fpol, s.cddq, cc.sdmd);
                frs = std::move(out.f_rgb_star);
                fps = std::move(out.f_pol_star);
                cache.diag[i].mu = std::move(out.mu);
                cache.diag[i].eta = std::move(out.eta);
            }
            cc.cat_channels = frs.c();
            pyramid.push_back(
                s.cddq.conv_fuse.forward(ops::concat_channels(frs, fps), cc.fuse));
        }
    }
    return pyramid;
}

template <typename T>
std::vector<Tensor<T>> backbone_forward(const Tensor<T>& rgb, const Tensor<T>& pol,
                                        const NetworkConfig& cfg, const NetWeights<T>& w) {
    BackboneCache<T> cache;
    return backbone_forward(rgb, pol, cfg, w, cache);
}

// Returns (g_rgb, g_pol) given one cotangent per pyramid level.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> backbone_backward(const BackboneCache<T>& cache,
                                                  const NetworkConfig& cfg,
                                                  const NetWeights<T>& w,
                                                  const std::vector<Tensor<T>>& g_pyramid,
                                                  NetWeights<T>& grads) {
    if (static_cast<int>(g_pyramid.size()) != cfg.stages())
        throw ShapeError("backbone backward: cotangent count != stage count");
    Tensor<T> g_frgb, g_fpol;
    for (int i = cfg.stages() - 1; i >= 0; --i) {
        const auto& s = w.stages[i];
        auto& gs = grads.stages[i];
        const auto& cc = cache.stages[i];
        Tensor<T> gr = g_frgb.size() ? g_frgb : Tensor<T>();
        Tensor<T> gp = g_fpol;

        if (cfg.fusion[i]) {
            Tensor<T> ga, gb;
            if (cfg.use_cwda) {
                std::tie(ga, gb) =
                    cddq_backward(cc.cddq, s.cddq, g_pyramid[i], gs.cddq, !cfg.use_sdmd);
            } else {
                auto g_cat = s.cddq.conv_fuse.backward(cc.fuse, g_pyramid[i], gs.cddq.conv_fuse);
                auto parts = ops::split_channels(g_cat, {cc.cat_channels, cc.cat_channels});
                if (cfg.use_sdmd)
                    std::tie(ga, gb) =
                        sdmd_backward(cc.sdmd, s.cddq, parts[0], parts[1], gs.cddq);
                else {
                    ga = std::move(parts[0]);
                    gb = std::move(parts[1]);
                }
            }
            if (gr.size())
                ops::accumulate(gr, ga);
            else
                gr = std::move(ga);
            if (gp.size())
                ops::accumulate(gp, gb);
            else
                gp = std::move(gb);
        } else {
            if (gr.size())
                ops::accumulate(gr, g_pyramid[i]);
            else
                gr = g_pyramid[i];
        }
        // stages whose pol feature is never consumed downstream get a zero
        // cotangent of the matching shape
        if (!gp.size()) gp = Tensor<T>(gr.n(), cfg.widths[i], gr.h(), gr.w());

        if (cfg.use_mp) gp = s.mp.backward(cc.mp, gp, gs.mp);
        gp = s.pol_down.backward(cc.pd, s.pol_mix.backward(cc.pm, gp, gs.pol_mix), gs.pol_down);
        gr = s.rgb_down.backward(cc.rd, s.rgb_mix.backward(cc.rm, gr, gs.rgb_mix), gs.rgb_down);
        g_frgb = std::move(gr);
        g_fpol = std::move(gp);
    }
    return {std::move(g_frgb), std::move(g_fpol)};
}

// -------- head --------

template <typename T>
struct HeadCache {
    std::vector<typename ConvBlock<T>::Cache> levels;
};

// Raw per-level maps: (N, 5*A, H_l, W_l) with (tx, ty, tw, th, obj) per anchor.
template <typename T>
std::vector<Tensor<T>> head_forward(const std::vector<Tensor<T>>& pyramid,
                                    const NetWeights<T>& w, HeadCache<T>& cache) {
    if (pyramid.size() != w.head.size())
        throw ShapeError("head: pyramid level count != head conv count");
    cache.levels.resize(pyramid.size());
    std::vector<Tensor<T>> maps;
    for (std::size_t i = 0; i < pyramid.size(); ++i)
        maps.push_back(w.head[i].forward(pyramid[i], cache.levels[i]));
    return maps;
}

template <typename T>
std::vector<Tensor<T>> head_backward(const HeadCache<T>& cache, const NetWeights<T>& w,
                                     const std::vector<Tensor<T>>& g_maps,
                                     NetWeights<T>& grads) {
    std::vector<Tensor<T>> g_pyr;
    for (std::size_t i = 0; i < g_maps.size(); ++i)
        g_pyr.push_back(w.head[i].backward(cache.levels[i], g_maps[i], grads.head[i]));
    return g_pyr;
}

// Box decode per the documented rules; detections below score_thresh are
// dropped. `input_h`/`input_w` recover each level's stride.
template <typename T>
std::vector<Detection> head_decode(const std::vector<Tensor<T>>& maps,
                                   const NetworkConfig& cfg, int input_h, int input_w,
                                   int image_id = 0) {
    const int A = static_cast<int>(cfg.anchors.size());
    std::vector<Detection> dets;
    for (const auto& m : maps) {
        if (m.c() != 5 * A)
            throw ShapeError("head_decode: expected " + std::to_string(5 * A) +
                             " channels, got " + m.shape_str());
        const double stride_y = static_cast<double>(input_h) / m.h();
        const double stride_x = static_cast<double>(input_w) / m.w();
        for (int n = 0; n < m.n(); ++n)
            for (int a = 0; a < A; ++a) {
                const auto [aw, ah] = cfg.anchors[a];
                for (int gy = 0; gy < m.h(); ++gy)
                    for (int gx = 0; gx < m.w(); ++gx) {
                        const double obj = m(n, a * 5 + 4, gy, gx);
                        const double score = 1.0 / (1.0 + std::exp(-obj));
                        if (score < cfg.score_thresh) continue;
                        const double tx = m(n, a * 5 + 0, gy, gx);
                        const double ty = m(n, a * 5 + 1, gy, gx);
                        const double tw = std::clamp<double>(m(n, a * 5 + 2, gy, gx), -4, 4);
                        const double th = std::clamp<double>(m(n, a * 5 + 3, gy, gx), -4, 4);
                        const double cx = (1.0 / (1.0 + std::exp(-tx)) + gx) * stride_x;
                        const double cy = (1.0 / (1.0 + std::exp(-ty)) + gy) * stride_y;
                        const double bw = aw * std::exp(tw);
                        const double bh = ah * std::exp(th);
                        dets.push_back({{cx - bw / 2, cy - bh / 2, bw, bh}, score, image_id});
                    }
            }
    }
    return dets;
}

// -------- whole model --------

template <typename T>
struct ModelCache {
    typename PiWeights<T>::Cache pi;
    BackboneCache<T> backbone;
    HeadCache<T> head;
};

// PI -> backbone -> head; aolp is expected pre-normalized to [0,1].
template <typename T>
std::vector<Tensor<T>> model_forward(const Tensor<T>& rgb, const Tensor<T>& aolp,
                                     const Tensor<T>& dolp, const NetworkConfig& cfg,
                                     const NetWeights<T>& w, ModelCache<T>& cache) {
    auto pol = w.pi.forward(aolp, dolp, cache.pi);
    auto pyramid = backbone_forward(rgb, pol, cfg, w, cache.backbone);
    return head_forward(pyramid, w, cache.head);
}

template <typename T>
std::vector<Tensor<T>> model_forward(const Tensor<T>& rgb, const Tensor<T>& aolp,
                                     const Tensor<T>& dolp, const NetworkConfig& cfg,
                                     const NetWeights<T>& w) {
    ModelCache<T> cache;
    return model_forward(rgb, aolp, dolp, cfg, w, cache);
}

// Returns (g_rgb, g_aolp, g_dolp).
template <typename T>
std::tuple<Tensor<T>, Tensor<T>, Tensor<T>> model_backward(
    const ModelCache<T>& cache, const NetworkConfig& cfg, const NetWeights<T>& w,
    const std::vector<Tensor<T>>& g_maps, NetWeights<T>& grads) {
    auto g_pyr = head_backward(cache.head, w, g_maps, grads);
    auto [g_rgb, g_pol] = backbone_backward(cache.backbone, cfg, w, g_pyr, grads);
    auto [g_aolp, g_dolp] = w.pi.backward(cache.pi, g_pol, grads.pi);
    return {std::move(g_rgb), std::move(g_aolp), std::move(g_dolp)};
}

// Detections for one image: forward, decode, suppress.
template <typename T>
std::vector<Detection> detect(const Tensor<T>& rgb, const Tensor<T>& aolp,
                              const Tensor<T>& dolp, const NetworkConfig& cfg,
                              const NetWeights<T>& w, int image_id = 0) {
    auto maps = model_forward(rgb, aolp, dolp, cfg, w);
    auto dets = head_decode(maps, cfg, rgb.h(), rgb.w(), image_id);
    return nms(std::move(dets), cfg.nms_iou);
}

} // namespace rgbp::net
