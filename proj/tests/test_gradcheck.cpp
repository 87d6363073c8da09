#include <catch2/catch_amalgamated.hpp>

#include "rgbp/ops.hpp"
#include "rgbp/rng.hpp"

using namespace rgbp;
using namespace rgbp::ops;

namespace {

void append(std::vector<double>& flat, const Tensor<double>& t) {
    for (std::size_t i = 0; i < t.size(); ++i) flat.push_back(t[i]);
}

void append(std::vector<double>& flat, const std::vector<double>& v) {
    flat.insert(flat.end(), v.begin(), v.end());
}

void take(const std::vector<double>& flat, std::size_t& k, Tensor<double>& t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = flat[k++];
}

void take(const std::vector<double>& flat, std::size_t& k, std::vector<double>& v) {
    for (auto& x : v) x = flat[k++];
}

Tensor<double> cotangent_tensor(const std::vector<double>& c, std::size_t& k,
                                const Tensor<double>& like) {
    Tensor<double> t = like.zeros_like();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = c[k++];
    return t;
}

// conv2d (optionally transposed) with x, w, b as coordinates
GradCheckReport check_conv(std::uint64_t seed, bool transposed, int stride, int pad,
                           double corrupt_gw = 1.0) {
    Rng rng(seed);
    auto x = Tensor<double>::random_uniform(2, 2, 6, 6, rng, -1, 1);
    ConvParams<double> proto;
    proto.weight = Tensor<double>::random_uniform(3, 2, transposed ? 2 : 3, transposed ? 2 : 3,
                                                  rng, -1, 1);
    proto.bias = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    proto.stride = stride;
    proto.pad = pad;
    proto.transposed = transposed;

    std::vector<double> theta;
    append(theta, x);
    append(theta, proto.weight);
    append(theta, proto.bias);

    FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        Tensor<double> xi = x;
        ConvParams<double> p = proto;
        std::size_t k = 0;
        take(th, k, xi);
        take(th, k, p.weight);
        take(th, k, p.bias);
        std::vector<double> out;
        append(out, conv2d(xi, p));
        return out;
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        Tensor<double> xi = x;
        ConvParams<double> p = proto;
        std::size_t k = 0;
        take(th, k, xi);
        take(th, k, p.weight);
        take(th, k, p.bias);
        auto y = conv2d(xi, p);
        std::size_t ck = 0;
        auto gy = cotangent_tensor(c, ck, y);
        auto g = conv2d_backward(xi, p, gy);
        for (std::size_t i = 0; i < g.gw.size(); ++i) g.gw[i] *= corrupt_gw;
        std::vector<double> out;
        append(out, g.gx);
        append(out, g.gw);
        append(out, g.gb);
        return out;
    };
    return grad_check(transposed ? "transposed_conv" : "conv2d", fn, theta, seed);
}

} // namespace

TEST_CASE("conv2d backward matches finite differences") {
    auto rep = check_conv(42, false, 1, 1);
    INFO(rep.max_rel_err);
    CHECK(rep.pass);
}

TEST_CASE("strided conv backward") {
    Rng rng(43);
    auto x = Tensor<double>::random_uniform(1, 2, 6, 6, rng, -1, 1);
    ConvParams<double> proto;
    proto.weight = Tensor<double>::random_uniform(2, 2, 2, 2, rng, -1, 1);
    proto.stride = 2;
    std::vector<double> theta;
    append(theta, x);
    append(theta, proto.weight);
    FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        Tensor<double> xi = x;
        ConvParams<double> p = proto;
        std::size_t k = 0;
        take(th, k, xi);
        take(th, k, p.weight);
        std::vector<double> out;
        append(out, conv2d(xi, p));
        return out;
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        Tensor<double> xi = x;
        ConvParams<double> p = proto;
        std::size_t k = 0;
        take(th, k, xi);
        take(th, k, p.weight);
        auto y = conv2d(xi, p);
        std::size_t ck = 0;
        auto gy = cotangent_tensor(c, ck, y);
        auto g = conv2d_backward(xi, p, gy);
        std::vector<double> out;
        append(out, g.gx);
        append(out, g.gw);
        return out;
    };
    CHECK(grad_check("conv_s2", fn, theta, 43).pass);
}

TEST_CASE("transposed conv backward") {
    auto rep = check_conv(44, true, 2, 0);
    INFO(rep.max_rel_err);
    CHECK(rep.pass);
}

TEST_CASE("corrupted weight gradient is caught") {
    auto rep = check_conv(42, false, 1, 1, 2.0);
    CHECK_FALSE(rep.pass);
}

TEST_CASE("batch_norm batch-stats backward") {
    Rng rng(7);
    auto x = Tensor<double>::random_uniform(2, 3, 4, 4, rng, -2, 2);
    auto proto = BatchNormParams<double>::identity(3);
    proto.mode = BnMode::kBatchStats;
    for (auto& g : proto.gamma) g = rng.uniform(0.5, 1.5);
    for (auto& b : proto.beta) b = rng.uniform(-0.5, 0.5);

    std::vector<double> theta;
    append(theta, x);
    append(theta, proto.gamma);
    append(theta, proto.beta);
    FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        Tensor<double> xi = x;
        BatchNormParams<double> p = proto;
        std::size_t k = 0;
        take(th, k, xi);
        take(th, k, p.gamma);
        take(th, k, p.beta);
        std::vector<double> out;
        append(out, batch_norm(xi, p));
        return out;
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        Tensor<double> xi = x;
        BatchNormParams<double> p = proto;
        std::size_t k = 0;
        take(th, k, xi);
        take(th, k, p.gamma);
        take(th, k, p.beta);
        auto y = batch_norm(xi, p);
        std::size_t ck = 0;
        auto gy = cotangent_tensor(c, ck, y);
        auto g = batch_norm_backward(xi, p, gy);
        std::vector<double> out;
        append(out, g.gx);
        append(out, g.ggamma);
        append(out, g.gbeta);
        return out;
    };
    auto rep = grad_check("batch_norm", fn, theta, 7);
    INFO(rep.max_rel_err);
    CHECK(rep.pass);
}

namespace {

// elementwise / unary ops of a single tensor input
GradCheckReport check_unary(const std::string& name, std::uint64_t seed,
                            Tensor<double> x,
                            std::function<Tensor<double>(const Tensor<double>&)> f,
                            std::function<Tensor<double>(const Tensor<double>&,
                                                         const Tensor<double>&)> b) {
    std::vector<double> theta;
    append(theta, x);
    FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        Tensor<double> xi = x;
        std::size_t k = 0;
        take(th, k, xi);
        std::vector<double> out;
        append(out, f(xi));
        return out;
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        Tensor<double> xi = x;
        std::size_t k = 0;
        take(th, k, xi);
        auto y = f(xi);
        std::size_t ck = 0;
        auto gy = cotangent_tensor(c, ck, y);
        std::vector<double> out;
        append(out, b(xi, gy));
        return out;
    };
    return grad_check(name, fn, theta, seed);
}

} // namespace

TEST_CASE("silu and sigmoid backward") {
    Rng rng(0);
    auto x = Tensor<double>::random_uniform(2, 3, 4, 4, rng, -3, 3);
    CHECK(check_unary("silu", 0, x, silu<double>, silu_backward<double>).pass);
    CHECK(check_unary("sigmoid", 1, x, sigmoid<double>, sigmoid_backward<double>).pass);
}

TEST_CASE("softmax_pair backward") {
    Rng rng(12);
    auto a = Tensor<double>::random_uniform(1, 3, 3, 3, rng, -2, 2);
    auto b = Tensor<double>::random_uniform(1, 3, 3, 3, rng, -2, 2);
    std::vector<double> theta;
    append(theta, a);
    append(theta, b);
    FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        Tensor<double> ai = a, bi = b;
        std::size_t k = 0;
        take(th, k, ai);
        take(th, k, bi);
        auto [al, be] = softmax_pair(ai, bi);
        std::vector<double> out;
        append(out, al);
        append(out, be);
        return out;
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        Tensor<double> ai = a, bi = b;
        std::size_t k = 0;
        take(th, k, ai);
        take(th, k, bi);
        std::size_t ck = 0;
        auto ga = cotangent_tensor(c, ck, ai);
        auto gb = cotangent_tensor(c, ck, bi);
        auto [da, db] = softmax_pair_backward(ai, bi, ga, gb);
        std::vector<double> out;
        append(out, da);
        append(out, db);
        return out;
    };
    CHECK(grad_check("softmax_pair", fn, theta, 12).pass);
}

TEST_CASE("pooling backward family") {
    Rng rng(42);
    // tie-free random input keeps max pools differentiable at theta
    auto x = Tensor<double>::random_uniform(2, 3, 6, 6, rng, -1, 1);
    auto mk = [&](const std::string& n,
                  std::function<Tensor<double>(const Tensor<double>&)> f,
                  std::function<Tensor<double>(const Tensor<double>&,
                                               const Tensor<double>&)> b) {
        auto rep = check_unary(n, 42, x, f, b);
        INFO(n << " " << rep.max_rel_err);
        CHECK(rep.pass);
    };
    mk("max_pool", [](const auto& t) { return max_pool(t, 2, 2, 0); },
       [](const auto& t, const auto& g) { return max_pool_backward(t, 2, 2, 0, g); });
    mk("max_pool5", [](const auto& t) { return max_pool(t, 5, 1, 2); },
       [](const auto& t, const auto& g) { return max_pool_backward(t, 5, 1, 2, g); });
    mk("avg_pool", [](const auto& t) { return avg_pool(t, 3, 1, 1); },
       [](const auto& t, const auto& g) { return avg_pool_backward(t, 3, 1, 1, g); });
    mk("channel_max", [](const auto& t) { return channel_max(t); },
       [](const auto& t, const auto& g) { return channel_max_backward(t, g); });
    mk("channel_avg", [](const auto& t) { return channel_avg(t); },
       [](const auto& t, const auto& g) { return channel_avg_backward(t, g); });
    mk("global_max", [](const auto& t) { return global_max(t); },
       [](const auto& t, const auto& g) { return global_max_backward(t, g); });
    mk("global_avg", [](const auto& t) { return global_avg(t); },
       [](const auto& t, const auto& g) { return global_avg_backward(t, g); });
}

TEST_CASE("fully_connected backward") {
    Rng rng(3);
    auto x = Tensor<double>::random_uniform(2, 4, 1, 1, rng, -1, 1);
    LinearParams<double> proto;
    proto.weight = Tensor<double>::random_uniform(3, 4, 1, 1, rng, -1, 1);
    proto.bias = {0.1, -0.2, 0.3};
    std::vector<double> theta;
    append(theta, x);
    append(theta, proto.weight);
    append(theta, proto.bias);
    FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        Tensor<double> xi = x;
        LinearParams<double> p = proto;
        std::size_t k = 0;
        take(th, k, xi);
        take(th, k, p.weight);
        take(th, k, p.bias);
        std::vector<double> out;
        append(out, fully_connected(xi, p));
        return out;
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        Tensor<double> xi = x;
        LinearParams<double> p = proto;
        std::size_t k = 0;
        take(th, k, xi);
        take(th, k, p.weight);
        take(th, k, p.bias);
        auto y = fully_connected(xi, p);
        std::size_t ck = 0;
        auto gy = cotangent_tensor(c, ck, y);
        auto g = fully_connected_backward(xi, p, gy);
        std::vector<double> out;
        append(out, g.gx);
        append(out, g.gw);
        append(out, g.gb);
        return out;
    };
    CHECK(grad_check("fully_connected", fn, theta, 3).pass);
}

TEST_CASE("scharr_edge backward") {
    Rng rng(8);
    auto x = Tensor<double>::random_uniform(1, 2, 6, 6, rng, -1, 1);
    auto rep = check_unary("scharr_edge", 8, x, scharr_edge<double>,
                           scharr_edge_backward<double>);
    INFO(rep.max_rel_err);
    CHECK(rep.pass);
}

TEST_CASE("broadcast mul backward") {
    Rng rng(15);
    auto a = Tensor<double>::random_uniform(1, 1, 4, 4, rng, -1, 1); // spatial gate
    auto b = Tensor<double>::random_uniform(1, 3, 4, 4, rng, -1, 1);
    std::vector<double> theta;
    append(theta, a);
    append(theta, b);
    FlatFn fn;
    fn.forward = [=](const std::vector<double>& th) {
        Tensor<double> ai = a, bi = b;
        std::size_t k = 0;
        take(th, k, ai);
        take(th, k, bi);
        std::vector<double> out;
        append(out, mul(ai, bi));
        return out;
    };
    fn.vjp = [=](const std::vector<double>& th, const std::vector<double>& c) {
        Tensor<double> ai = a, bi = b;
        std::size_t k = 0;
        take(th, k, ai);
        take(th, k, bi);
        auto y = mul(ai, bi);
        std::size_t ck = 0;
        auto gy = cotangent_tensor(c, ck, y);
        auto [ga, gb] = mul_backward(ai, bi, gy);
        std::vector<double> out;
        append(out, ga);
        append(out, gb);
        return out;
    };
    CHECK(grad_check("broadcast_mul", fn, theta, 15).pass);
}
