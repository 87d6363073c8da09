#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rgbp/net/model.hpp"

namespace rgbp::suite {

// Named finite-difference checks over every differentiable op and every
// composite module, shared by the CLI and the acceptance runner.

namespace detail {

using ops::FlatFn;
using ops::FlatPacker;
using ops::GradCheckReport;

inline std::vector<double> flatten(const Tensor<double>& t) {
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i];
    return out;
}

inline Tensor<double> unflatten(const std::vector<double>& c, std::size_t& k,
                                const Tensor<double>& like) {
    Tensor<double> t = like.zeros_like();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = c[k++];
    return t;
}

template <typename W, typename VF>
void randomize(W& w, VF&& vf, Rng& rng) {
    vf(w, [&](const std::string&, auto& p, bool trainable) {
        if (!trainable) return;
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, Tensor<double>>) {
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = rng.uniform(-0.5, 0.5);
        } else {
            for (auto& x : p) x = rng.uniform(-0.2, 0.2);
        }
    });
}

// single-tensor-input op with fixed forward/backward closures
inline GradCheckReport check_unary(
    const std::string& name, std::uint64_t seed, Tensor<double> x,
    std::function<Tensor<double>(const Tensor<double>&)> f,
    std::function<Tensor<double>(const Tensor<double>&, const Tensor<double>&)> b) {
    std::vector<double> theta = flatten(x);
    FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        Tensor<double> xi = x;
        for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = th[i];
        return flatten(f(xi));
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        Tensor<double> xi = x;
        for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = th[i];
        auto y = f(xi);
        std::size_t k = 0;
        auto gy = unflatten(c, k, y);
        return flatten(b(xi, gy));
    };
    return ops::grad_check(name, fn, theta, seed);
}

} // namespace detail

inline detail::GradCheckReport check_conv(std::uint64_t seed, bool transposed) {
    Rng rng(seed);
    auto x = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(2, 2, 6, 6, rng, -1, 1));
    auto p = std::make_shared<ops::ConvParams<double>>();
    const int k = transposed ? 2 : 3;
    p->weight = Tensor<double>::random_uniform(3, 2, k, k, rng, -1, 1);
    p->bias = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    p->stride = transposed ? 2 : 1;
    p->pad = transposed ? 0 : 1;
    p->transposed = transposed;

    auto packer = std::make_shared<ops::FlatPacker<double>>();
    packer->add(*x);
    packer->add(p->weight);
    packer->add(p->bias);
    ops::FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        packer->unpack(th);
        return detail::flatten(ops::conv2d(*x, *p));
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        packer->unpack(th);
        auto y = ops::conv2d(*x, *p);
        std::size_t k2 = 0;
        auto gy = detail::unflatten(c, k2, y);
        auto g = ops::conv2d_backward(*x, *p, gy);
        ops::FlatPacker<double> gp;
        gp.add(g.gx);
        gp.add(g.gw);
        gp.add(g.gb);
        return gp.pack();
    };
    return ops::grad_check(transposed ? "transposed_conv" : "conv2d", fn, packer->pack(),
                           seed);
}

inline detail::GradCheckReport check_batch_norm(std::uint64_t seed) {
    Rng rng(seed);
    auto x = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(2, 3, 4, 4, rng, -2, 2));
    auto p = std::make_shared<ops::BatchNormParams<double>>(
        ops::BatchNormParams<double>::identity(3));
    p->mode = ops::BnMode::kBatchStats;
    for (auto& g : p->gamma) g = rng.uniform(0.5, 1.5);
    for (auto& b : p->beta) b = rng.uniform(-0.5, 0.5);
    auto packer = std::make_shared<ops::FlatPacker<double>>();
    packer->add(*x);
    packer->add(p->gamma);
    packer->add(p->beta);
    ops::FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        packer->unpack(th);
        return detail::flatten(ops::batch_norm(*x, *p));
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        packer->unpack(th);
        auto y = ops::batch_norm(*x, *p);
        std::size_t k = 0;
        auto gy = detail::unflatten(c, k, y);
        auto g = ops::batch_norm_backward(*x, *p, gy);
        ops::FlatPacker<double> gp;
        gp.add(g.gx);
        gp.add(g.ggamma);
        gp.add(g.gbeta);
        return gp.pack();
    };
    return ops::grad_check("batch_norm", fn, packer->pack(), seed);
}

inline detail::GradCheckReport check_fully_connected(std::uint64_t seed) {
    Rng rng(seed);
    auto x = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(2, 4, 1, 1, rng, -1, 1));
    auto p = std::make_shared<ops::LinearParams<double>>();
    p->weight = Tensor<double>::random_uniform(3, 4, 1, 1, rng, -1, 1);
    p->bias = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    auto packer = std::make_shared<ops::FlatPacker<double>>();
    packer->add(*x);
    packer->add(p->weight);
    packer->add(p->bias);
    ops::FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        packer->unpack(th);
        return detail::flatten(ops::fully_connected(*x, *p));
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        packer->unpack(th);
        auto y = ops::fully_connected(*x, *p);
        std::size_t k = 0;
        auto gy = detail::unflatten(c, k, y);
        auto g = ops::fully_connected_backward(*x, *p, gy);
        ops::FlatPacker<double> gp;
        gp.add(g.gx);
        gp.add(g.gw);
        gp.add(g.gb);
        return gp.pack();
    };
    return ops::grad_check("fully_connected", fn, packer->pack(), seed);
}

inline std::vector<detail::GradCheckReport> check_activations(std::uint64_t seed) {
    Rng rng(seed);
    auto x = Tensor<double>::random_uniform(2, 3, 4, 4, rng, -3, 3);
    std::vector<detail::GradCheckReport> reps;
    reps.push_back(detail::check_unary("silu", seed, x, ops::silu<double>,
                                       ops::silu_backward<double>));
    reps.push_back(detail::check_unary("sigmoid", seed + 1, x, ops::sigmoid<double>,
                                       ops::sigmoid_backward<double>));

    // softmax_pair over two tensors
    auto a = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(1, 4, 3, 3, rng, -2, 2));
    auto b = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(1, 4, 3, 3, rng, -2, 2));
    auto packer = std::make_shared<ops::FlatPacker<double>>();
    packer->add(*a);
    packer->add(*b);
    ops::FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        packer->unpack(th);
        auto [alpha, beta] = ops::softmax_pair(*a, *b);
        auto out = detail::flatten(alpha);
        auto out2 = detail::flatten(beta);
        out.insert(out.end(), out2.begin(), out2.end());
        return out;
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        packer->unpack(th);
        auto [alpha, beta] = ops::softmax_pair(*a, *b);
        std::size_t k = 0;
        auto ga = detail::unflatten(c, k, alpha);
        auto gb = detail::unflatten(c, k, beta);
        auto [gxa, gxb] = ops::softmax_pair_backward(*a, *b, ga, gb);
        ops::FlatPacker<double> gp;
        gp.add(gxa);
        gp.add(gxb);
        return gp.pack();
    };
    reps.push_back(ops::grad_check("softmax_pair", fn, packer->pack(), seed + 2));
    return reps;
}

inline std::vector<detail::GradCheckReport> check_pools(std::uint64_t seed) {
    Rng rng(seed);
    auto x = Tensor<double>::random_uniform(2, 3, 6, 6, rng, -1, 1);
    std::vector<detail::GradCheckReport> reps;
    auto add = [&](const std::string& name, auto f, auto b) {
        reps.push_back(detail::check_unary(name, seed, x, f, b));
    };
    add("max_pool", [](const Tensor<double>& t) { return ops::max_pool(t, 3, 1, 1); },
        [](const Tensor<double>& t, const Tensor<double>& g) {
            return ops::max_pool_backward(t, 3, 1, 1, g);
        });
    add("avg_pool", [](const Tensor<double>& t) { return ops::avg_pool(t, 2, 2, 0); },
        [](const Tensor<double>& t, const Tensor<double>& g) {
            return ops::avg_pool_backward(t, 2, 2, 0, g);
        });
    add("channel_max", [](const Tensor<double>& t) { return ops::channel_max(t); },
        [](const Tensor<double>& t, const Tensor<double>& g) {
            return ops::channel_max_backward(t, g);
        });
    add("channel_avg", [](const Tensor<double>& t) { return ops::channel_avg(t); },
        [](const Tensor<double>& t, const Tensor<double>& g) {
            return ops::channel_avg_backward(t, g);
        });
    add("global_max", [](const Tensor<double>& t) { return ops::global_max(t); },
        [](const Tensor<double>& t, const Tensor<double>& g) {
            return ops::global_max_backward(t, g);
        });
    add("global_avg", [](const Tensor<double>& t) { return ops::global_avg(t); },
        [](const Tensor<double>& t, const Tensor<double>& g) {
            return ops::global_avg_backward(t, g);
        });
    return reps;
}

inline detail::GradCheckReport check_scharr(std::uint64_t seed) {
    Rng rng(seed);
    auto x = Tensor<double>::random_uniform(1, 2, 7, 7, rng, -1, 1);
    return detail::check_unary(
        "scharr_edge", seed, x,
        [](const Tensor<double>& t) { return ops::scharr_edge(t); },
        [](const Tensor<double>& t, const Tensor<double>& g) {
            return ops::scharr_edge_backward(t, g);
        });
}

inline detail::GradCheckReport check_pi(std::uint64_t seed) {
    Rng rng(seed);
    auto w = std::make_shared<net::PiWeights<double>>(net::PiWeights<double>::make(4));
    detail::randomize(*w, [](auto& x, auto&& v) { net::visit_pi(x, "pi", v); }, rng);
    auto aolp = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(1, 3, 8, 8, rng, 0.1, 0.9));
    auto dolp = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(1, 3, 8, 8, rng, 0.1, 0.9));
    auto packer = std::make_shared<ops::FlatPacker<double>>();
    packer->add(*aolp);
    packer->add(*dolp);
    net::visit_pi(*w, "pi", [&](const std::string&, auto& p, bool t) {
        if (t) packer->add(p);
    });
    ops::FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        packer->unpack(th);
        return detail::flatten(w->forward(*aolp, *dolp));
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        packer->unpack(th);
        typename net::PiWeights<double>::Cache cc;
        auto y = w->forward(*aolp, *dolp, cc);
        std::size_t k = 0;
        auto gy = detail::unflatten(c, k, y);
        auto grads = w->zeros_like();
        auto [ga, gd] = w->backward(cc, gy, grads);
        ops::FlatPacker<double> gp;
        gp.add(ga);
        gp.add(gd);
        net::visit_pi(grads, "pi", [&](const std::string&, auto& p, bool t) {
            if (t) gp.add(p);
        });
        return gp.pack();
    };
    return ops::grad_check("pi", fn, packer->pack(), seed);
}

inline detail::GradCheckReport check_mp(net::MpVariant variant, std::uint64_t seed) {
    Rng rng(seed);
    auto w = std::make_shared<net::MpWeights<double>>(
        variant == net::MpVariant::kSpatial ? net::MpWeights<double>::spatial(4)
                                            : net::MpWeights<double>::channel(4, 2));
    detail::randomize(*w, [](auto& x, auto&& v) { net::visit_mp(x, "mp", v); }, rng);
    auto x = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(1, 4, 8, 8, rng, -1, 1));
    auto packer = std::make_shared<ops::FlatPacker<double>>();
    packer->add(*x);
    net::visit_mp(*w, "mp", [&](const std::string&, auto& p, bool t) {
        if (t) packer->add(p);
    });
    ops::FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        packer->unpack(th);
        return detail::flatten(w->forward(*x));
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        packer->unpack(th);
        typename net::MpWeights<double>::Cache cc;
        auto y = w->forward(*x, cc);
        std::size_t k = 0;
        auto gy = detail::unflatten(c, k, y);
        auto grads = w->zeros_like();
        auto gx = w->backward(cc, gy, grads);
        ops::FlatPacker<double> gp;
        gp.add(gx);
        net::visit_mp(grads, "mp", [&](const std::string&, auto& p, bool t) {
            if (t) gp.add(p);
        });
        return gp.pack();
    };
    return ops::grad_check(variant == net::MpVariant::kSpatial ? "msp" : "mcp", fn,
                           packer->pack(), seed);
}

inline detail::GradCheckReport check_sdmd(std::uint64_t seed) {
    Rng rng(seed);
    auto w = std::make_shared<net::CddqWeights<double>>(net::CddqWeights<double>::make(4, 4));
    detail::randomize(*w, [](auto& x, auto&& v) { net::visit_cddq(x, "cddq", v); }, rng);
    auto fr = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(1, 4, 6, 6, rng, -1, 1));
    auto fp = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(1, 4, 6, 6, rng, -1, 1));
    auto packer = std::make_shared<ops::FlatPacker<double>>();
    packer->add(*fr);
    packer->add(*fp);
    net::visit_cddq(*w, "cddq", [&](const std::string&, auto& p, bool t) {
        if (t) packer->add(p);
    });
    ops::FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        packer->unpack(th);
        auto o = net::sdmd_forward(*fr, *fp, *w);
        auto out = detail::flatten(o.f_rgb_star);
        auto out2 = detail::flatten(o.f_pol_star);
        out.insert(out.end(), out2.begin(), out2.end());
        return out;
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        packer->unpack(th);
        net::SdmdCache<double> cc;
        auto o = net::sdmd_forward(*fr, *fp, *w, cc);
        std::size_t k = 0;
        auto g1 = detail::unflatten(c, k, o.f_rgb_star);
        auto g2 = detail::unflatten(c, k, o.f_pol_star);
        auto grads = w->zeros_like();
        auto [ga, gb] = net::sdmd_backward(cc, *w, g1, g2, grads);
        ops::FlatPacker<double> gp;
        gp.add(ga);
        gp.add(gb);
        net::visit_cddq(grads, "cddq", [&](const std::string&, auto& p, bool t) {
            if (t) gp.add(p);
        });
        return gp.pack();
    };
    return ops::grad_check("sdmd", fn, packer->pack(), seed);
}

inline detail::GradCheckReport check_cwda(std::uint64_t seed) {
    Rng rng(seed);
    auto w = std::make_shared<net::CddqWeights<double>>(net::CddqWeights<double>::make(4, 4));
    detail::randomize(*w, [](auto& x, auto&& v) { net::visit_cddq(x, "cddq", v); }, rng);
    auto fr = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(1, 4, 5, 5, rng, -1, 1));
    auto fp = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(1, 4, 5, 5, rng, -1, 1));
    auto packer = std::make_shared<ops::FlatPacker<double>>();
    packer->add(*fr);
    packer->add(*fp);
    net::visit_cddq(*w, "cddq", [&](const std::string&, auto& p, bool t) {
        if (t) packer->add(p);
    });
    ops::FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        packer->unpack(th);
        return detail::flatten(net::cwda_forward(*fr, *fp, *w).f_fused);
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        packer->unpack(th);
        net::CwdaCache<double> cc;
        auto o = net::cwda_forward(*fr, *fp, *w, cc);
        std::size_t k = 0;
        auto gy = detail::unflatten(c, k, o.f_fused);
        auto grads = w->zeros_like();
        auto [ga, gb] = net::cwda_backward(cc, *w, gy, grads);
        ops::FlatPacker<double> gp;
        gp.add(ga);
        gp.add(gb);
        net::visit_cddq(grads, "cddq", [&](const std::string&, auto& p, bool t) {
            if (t) gp.add(p);
        });
        return gp.pack();
    };
    return ops::grad_check("cwda", fn, packer->pack(), seed);
}

inline detail::GradCheckReport check_model(std::uint64_t seed, std::size_t stride = 7) {
    net::NetworkConfig cfg;
    cfg.c_pi = 2;
    cfg.widths = {2, 2, 4};
    cfg.anchors = {{16, 16}};
    cfg.seed = seed;
    auto w = std::make_shared<net::NetWeights<double>>(net::make_net_weights<double>(cfg));
    Rng rng(seed);
    detail::randomize(*w, [](auto& x, auto&& v) { net::visit_net(x, v); }, rng);
    auto rgb = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(1, 3, 32, 32, rng, 0, 1));
    auto aolp = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(1, 3, 32, 32, rng, 0.1, 0.9));
    auto dolp = std::make_shared<Tensor<double>>(
        Tensor<double>::random_uniform(1, 3, 32, 32, rng, 0.1, 0.9));
    auto packer = std::make_shared<ops::FlatPacker<double>>();
    packer->add(*rgb);
    packer->add(*aolp);
    packer->add(*dolp);
    net::visit_net(*w, [&](const std::string&, auto& p, bool t) {
        if (t) packer->add(p);
    });
    ops::FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        packer->unpack(th);
        auto maps = net::model_forward(*rgb, *aolp, *dolp, cfg, *w);
        std::vector<double> out;
        for (const auto& m : maps) {
            auto f = detail::flatten(m);
            out.insert(out.end(), f.begin(), f.end());
        }
        return out;
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        packer->unpack(th);
        net::ModelCache<double> cache;
        auto maps = net::model_forward(*rgb, *aolp, *dolp, cfg, *w, cache);
        std::size_t k = 0;
        std::vector<Tensor<double>> gm;
        for (const auto& m : maps) gm.push_back(detail::unflatten(c, k, m));
        auto grads = w->zeros_like();
        auto [gr, ga, gd] = net::model_backward(cache, cfg, *w, gm, grads);
        ops::FlatPacker<double> gp;
        gp.add(gr);
        gp.add(ga);
        gp.add(gd);
        net::visit_net(grads, [&](const std::string&, auto& p, bool t) {
            if (t) gp.add(p);
        });
        return gp.pack();
    };
    return ops::grad_check("model", fn, packer->pack(), seed, 1e-5, 1e-5, stride);
}

// The whole battery: every primitive plus every composite.
inline std::vector<detail::GradCheckReport> run_all(std::uint64_t seed) {
    std::vector<detail::GradCheckReport> reps;
    reps.push_back(check_conv(seed, false));
    reps.push_back(check_conv(seed + 1, true));
    reps.push_back(check_batch_norm(seed + 2));
    reps.push_back(check_fully_connected(seed + 3));
    for (auto& r : check_activations(seed + 4)) reps.push_back(r);
    for (auto& r : check_pools(seed + 5)) reps.push_back(r);
    reps.push_back(check_scharr(seed + 6));
    reps.push_back(check_pi(7));
    reps.push_back(check_mp(net::MpVariant::kSpatial, 3));
    reps.push_back(check_mp(net::MpVariant::kChannel, 5));
    reps.push_back(check_sdmd(11));
    reps.push_back(check_cwda(13));
    reps.push_back(check_model(seed + 7));
    return reps;
}

} // namespace rgbp::suite
