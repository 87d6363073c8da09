#include <catch2/catch_amalgamated.hpp>

#include "rgbp/ops.hpp"
#include "rgbp/rng.hpp"

using namespace rgbp;
using namespace rgbp::ops;

TEST_CASE("conv2d 1x1 identity kernel") {
    Rng rng(1);
    auto x = Tensor<double>::random_uniform(2, 3, 5, 5, rng, -1, 1);
    ConvParams<double> p;
    p.weight = Tensor<double>(3, 3, 1, 1);
    for (int c = 0; c < 3; ++c) p.weight(c, c, 0, 0) = 1.0;
    auto y = conv2d(x, p);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(y[i] == Catch::Approx(x[i]));
}

TEST_CASE("conv2d 3x3 box kernel on constant plane") {
    auto x = Tensor<double>::full(1, 1, 5, 5, 2.0);
    ConvParams<double> p;
    p.weight = Tensor<double>::full(1, 1, 3, 3, 1.0 / 9.0);
    p.pad = 1;
    auto y = conv2d(x, p);
    CHECK(y(0, 0, 2, 2) == Catch::Approx(2.0));
    CHECK(y(0, 0, 0, 0) == Catch::Approx(2.0 * 4.0 / 9.0)); // zero padding at corner
}

TEST_CASE("conv2d strict shape policy") {
    auto x = Tensor<double>::full(1, 1, 5, 5, 1.0);
    ConvParams<double> p;
    p.weight = Tensor<double>::full(1, 1, 2, 2, 1.0);
    p.stride = 2;
    CHECK_THROWS_AS(conv2d(x, p), ShapeError); // 5 with k=2,s=2 does not divide

    ConvParams<double> mism;
    mism.weight = Tensor<double>::full(1, 2, 3, 3, 1.0);
    mism.pad = 1;
    CHECK_THROWS_AS(conv2d(x, mism), ShapeError);
}

TEST_CASE("conv then transposed conv restores spatial dims") {
    Rng rng(5);
    auto x = Tensor<double>::random_uniform(1, 2, 8, 8, rng, -1, 1);
    ConvParams<double> down;
    down.weight = Tensor<double>::random_uniform(2, 2, 2, 2, rng, -1, 1);
    down.stride = 2;
    auto mid = conv2d(x, down);
    CHECK(mid.h() == 4);

    ConvParams<double> up;
    up.weight = Tensor<double>::random_uniform(2, 2, 2, 2, rng, -1, 1);
    up.stride = 2;
    up.transposed = true;
    auto y = conv2d(mid, up);
    CHECK(y.h() == 8);
    CHECK(y.w() == 8);
}

TEST_CASE("conv2d linearity", "[property]") {
    Rng rng(17);
    ConvParams<double> p;
    p.weight = Tensor<double>::random_uniform(3, 2, 3, 3, rng, -1, 1);
    p.pad = 1;
    auto x = Tensor<double>::random_uniform(1, 2, 6, 6, rng, -1, 1);
    auto y = Tensor<double>::random_uniform(1, 2, 6, 6, rng, -1, 1);
    const double a = 0.7, b = -1.3;
    Tensor<double> mix = x.zeros_like();
    for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * y[i];
    auto lhs = conv2d(mix, p);
    auto fx = conv2d(x, p), fy = conv2d(y, p);
    for (std::size_t i = 0; i < lhs.size(); ++i)
        REQUIRE(lhs[i] == Catch::Approx(a * fx[i] + b * fy[i]).epsilon(1e-6).margin(1e-9));
}

TEST_CASE("batch_norm running-stats identity") {
    Rng rng(2);
    auto x = Tensor<double>::random_uniform(2, 3, 4, 4, rng, -2, 2);
    auto p = BatchNormParams<double>::identity(3);
    p.eps = 1e-12;
    auto y = batch_norm(x, p);
    for (std::size_t i = 0; i < x.size(); ++i)
        REQUIRE(y[i] == Catch::Approx(x[i]).epsilon(1e-6));
}

TEST_CASE("batch_norm batch-stats normalizes per channel") {
    Rng rng(3);
    auto x = Tensor<double>::random_uniform(2, 3, 4, 4, rng, -5, 5);
    auto p = BatchNormParams<double>::identity(3);
    p.mode = BnMode::kBatchStats;
    auto y = batch_norm(x, p);
    for (int c = 0; c < 3; ++c) {
        double mean = 0, var = 0;
        const double m = 2 * 4 * 4;
        for (int n = 0; n < 2; ++n)
            for (int h = 0; h < 4; ++h)
                for (int w = 0; w < 4; ++w) mean += y(n, c, h, w);
        mean /= m;
        for (int n = 0; n < 2; ++n)
            for (int h = 0; h < 4; ++h)
                for (int w = 0; w < 4; ++w) var += (y(n, c, h, w) - mean) * (y(n, c, h, w) - mean);
        var /= m;
        CHECK(mean == Catch::Approx(0.0).margin(1e-10));
        CHECK(var == Catch::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("activation values") {
    auto x = Tensor<double>::full(1, 1, 1, 1, 0.0);
    CHECK(silu(x)[0] == 0.0);
    CHECK(sigmoid(x)[0] == 0.5);
    auto one = Tensor<double>::full(1, 1, 1, 1, 1.0);
    CHECK(silu(one)[0] == Catch::Approx(0.731059).epsilon(1e-5));
}

TEST_CASE("softmax_pair symmetry and normalization", "[property]") {
    Rng rng(9);
    auto a = Tensor<double>::random_uniform(1, 4, 3, 3, rng, -3, 3);
    auto [alpha, beta] = softmax_pair(a, a);
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(alpha[i] == 0.5);
        REQUIRE(beta[i] == 0.5);
    }
    auto b = Tensor<double>::random_uniform(1, 4, 3, 3, rng, -3, 3);
    auto [p, q] = softmax_pair(a, b);
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(std::abs(p[i] + q[i] - 1.0) < 1e-7);
        REQUIRE(p[i] > 0.0);
        REQUIRE(q[i] > 0.0);
    }
}

TEST_CASE("pooling on constants and channel reductions") {
    auto c = Tensor<double>::full(1, 2, 6, 6, 3.5);
    auto mp = max_pool(c, 3, 1, 1);
    auto ap = avg_pool(c, 3, 1, 1);
    for (std::size_t i = 0; i < mp.size(); ++i) {
        REQUIRE(mp[i] == 3.5);
        REQUIRE(ap[i] == Catch::Approx(3.5)); // padding excluded from divisor
    }

    Tensor<double> x(1, 3, 1, 1);
    x(0, 0, 0, 0) = 1;
    x(0, 1, 0, 0) = 3;
    x(0, 2, 0, 0) = 2;
    CHECK(channel_max(x)(0, 0, 0, 0) == 3.0);
    CHECK(channel_avg(x)(0, 0, 0, 0) == Catch::Approx(2.0));

    Rng rng(4);
    auto t = Tensor<double>::random_uniform(2, 3, 4, 4, rng);
    auto gm = global_max(t);
    auto ga = global_avg(t);
    CHECK(gm.h() == 1);
    CHECK(ga.w() == 1);
}

TEST_CASE("fully_connected hand case") {
    Tensor<double> x(1, 2, 1, 1);
    x(0, 0, 0, 0) = 2;
    x(0, 1, 0, 0) = 3;
    LinearParams<double> p;
    p.weight = Tensor<double>(2, 2, 1, 1);
    p.weight(0, 0, 0, 0) = 1;
    p.weight(0, 1, 0, 0) = 1;
    p.weight(1, 0, 0, 0) = 1;
    p.weight(1, 1, 0, 0) = -1;
    p.bias = {0.0, 0.0};
    auto y = fully_connected(x, p);
    CHECK(y(0, 0, 0, 0) == 5.0);
    CHECK(y(0, 1, 0, 0) == -1.0);

    Tensor<double> bad(1, 3, 1, 1);
    CHECK_THROWS_AS(fully_connected(bad, p), ShapeError);
}

TEST_CASE("scharr_edge on a constant plane is zero") {
    auto c = Tensor<double>::full(1, 1, 6, 6, 0.8);
    CHECK(scharr_edge(c).max_abs() == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("scharr unit step magnitude") {
    Tensor<double> step(1, 1, 7, 7);
    for (int h = 0; h < 7; ++h)
        for (int w = 0; w < 7; ++w) step(0, 0, h, w) = w >= 3 ? 1.0 : 0.0;
    auto e = scharr_edge(step);
    // Gx over the 3x3 window centered on an interior edge column = 16/16
    CHECK(e(0, 0, 3, 3) == Catch::Approx(1.0));
    CHECK(e(0, 0, 3, 0) == Catch::Approx(0.0).margin(1e-12));
    CHECK(e(0, 0, 3, 6) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("split is the left inverse of concat; broadcasting works") {
    Rng rng(6);
    auto a = Tensor<double>::random_uniform(1, 2, 3, 3, rng);
    auto b = Tensor<double>::random_uniform(1, 3, 3, 3, rng);
    auto cat = concat_channels(a, b);
    auto parts = split_channels(cat, {2, 3});
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(parts[0][i] == a[i]);
    for (std::size_t i = 0; i < b.size(); ++i) REQUIRE(parts[1][i] == b[i]);

    auto spatial = Tensor<double>::random_uniform(1, 1, 3, 3, rng);
    auto full = Tensor<double>::random_uniform(1, 4, 3, 3, rng);
    auto m1 = mul(spatial, full);
    CHECK(m1.c() == 4);
    CHECK(m1(0, 2, 1, 1) == Catch::Approx(spatial(0, 0, 1, 1) * full(0, 2, 1, 1)));

    auto chan = Tensor<double>::random_uniform(1, 4, 1, 1, rng);
    auto m2 = mul(chan, full);
    CHECK(m2(0, 2, 1, 1) == Catch::Approx(chan(0, 2, 0, 0) * full(0, 2, 1, 1)));

    CHECK_THROWS_AS(mul(Tensor<double>(1, 2, 3, 3), Tensor<double>(1, 3, 3, 3)),
                    ShapeError);
}

TEST_CASE("deterministic across runs") {
    Rng rng(21);
    auto x = Tensor<double>::random_uniform(1, 3, 8, 8, rng, -1, 1);
    ConvParams<double> p;
    p.weight = Tensor<double>::random_uniform(4, 3, 3, 3, rng, -1, 1);
    p.pad = 1;
    auto y1 = conv2d(x, p);
    auto y2 = conv2d(x, p);
    for (std::size_t i = 0; i < y1.size(); ++i) REQUIRE(y1[i] == y2[i]);
}
