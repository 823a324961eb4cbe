#include <catch2/catch_amalgamated.hpp>

#include "useg/layers.hpp"
#include "useg/ops.hpp"

using namespace useg;

namespace {

template <typename T>
CtxT<T> eval_ctx() {
    return CtxT<T>{nullptr, false, nullptr};
}

Var<float> constf(Shape s, std::vector<float> v) {
    return Var<float>::constant(Tensor(std::move(s), std::move(v)));
}

}  // namespace

TEST_CASE("conv1d identity and sliding-window values") {
    auto ctx = eval_ctx<float>();
    Var<float> x = constf({1, 3}, {1, 2, 3});

    SECTION("identity kernel") {
        Var<float> w = constf({1, 1, 1}, {1});
        Var<float> b = constf({1}, {0});
        Var<float> y = ops::conv1d(ctx, x, w, b, 1, size_t{0});
        REQUIRE(y.shape() == Shape{1, 3});
        REQUIRE(y.val()[0] == 1.0f);
        REQUIRE(y.val()[1] == 2.0f);
        REQUIRE(y.val()[2] == 3.0f);
    }
    SECTION("two-tap kernel") {
        Var<float> w = constf({1, 1, 2}, {1, 1});
        Var<float> b = constf({1}, {0});
        Var<float> y = ops::conv1d(ctx, x, w, b, 1, size_t{0});
        REQUIRE(y.shape() == Shape{1, 2});
        REQUIRE(y.val()[0] == 3.0f);
        REQUIRE(y.val()[1] == 5.0f);
    }
    SECTION("cross-correlation, no kernel flip") {
        Var<float> w = constf({1, 1, 2}, {1, 2});
        Var<float> b = constf({1}, {0});
        Var<float> y = ops::conv1d(ctx, x, w, b, 1, size_t{0});
        // out[0] = 1*1 + 2*2 (kernel applied left-to-right)
        REQUIRE(y.val()[0] == 5.0f);
        REQUIRE(y.val()[1] == 8.0f);
    }
}

TEST_CASE("conv1d shape algebra for a wide encoder row") {
    auto ctx = eval_ctx<float>();
    Rng rng(1);
    Var<float> x = Var<float>::constant(uniform_init<float>(rng, {19, 15360}, 1.0));
    Conv1dLayer<float> conv("c", rng, 19, 32, 11, 1, 5);
    Var<float> y = conv.forward(ctx, x);
    REQUIRE(y.shape() == Shape{32, 15360});
    REQUIRE(y.val().all_finite());
}

TEST_CASE("conv1d rejects channel mismatch and short input") {
    auto ctx = eval_ctx<float>();
    Var<float> x = constf({2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
    Var<float> w = constf({1, 1, 2}, {1, 1});
    Var<float> b = constf({1}, {0});
    REQUIRE_THROWS_WITH(ops::conv1d(ctx, x, w, b, 1, size_t{0}),
                        Catch::Matchers::ContainsSubstring("channels"));

    Var<float> x1 = constf({1, 2}, {1, 2});
    Var<float> w5 = constf({1, 1, 5}, {1, 1, 1, 1, 1});
    REQUIRE_THROWS_AS(ops::conv1d(ctx, x1, w5, b, 1, size_t{0}), ShapeError);
    REQUIRE_THROWS_AS(ops::conv1d(ctx, x1, w5, b, 0, size_t{1}), ShapeError);
}

TEST_CASE("maxpool1d values and shapes") {
    auto ctx = eval_ctx<float>();
    SECTION("constant input") {
        Var<float> x = constf({1, 4}, {5, 5, 5, 5});
        Var<float> y = ops::maxpool1d(ctx, x, 2, 2);
        REQUIRE(y.shape() == Shape{1, 2});
        REQUIRE(y.val()[0] == 5.0f);
        REQUIRE(y.val()[1] == 5.0f);
    }
    SECTION("window maxima") {
        Var<float> x = constf({1, 4}, {1, 3, 2, 4});
        Var<float> y = ops::maxpool1d(ctx, x, 2, 2);
        REQUIRE(y.val()[0] == 3.0f);
        REQUIRE(y.val()[1] == 4.0f);
    }
    SECTION("halves a wide map") {
        Rng rng(3);
        Var<float> x = Var<float>::constant(uniform_init<float>(rng, {32, 15360}, 1.0));
        REQUIRE(ops::maxpool1d(ctx, x, 2, 2).shape() == Shape{32, 7680});
    }
    SECTION("window larger than input is rejected") {
        Var<float> x = constf({1, 3}, {1, 2, 3});
        REQUIRE_THROWS_AS(ops::maxpool1d(ctx, x, 4, 1), ShapeError);
    }
}

TEST_CASE("upsample_nearest repeats samples") {
    auto ctx = eval_ctx<float>();
    Var<float> x = constf({1, 2}, {1, 2});
    Var<float> y = ops::upsample_nearest(ctx, x, 2);
    REQUIRE(y.val().vec() == std::vector<float>{1, 1, 2, 2});

    Var<float> same = ops::upsample_nearest(ctx, x, 1);
    REQUIRE(same.val().vec() == x.val().vec());

    Rng rng(5);
    Var<float> wide = Var<float>::constant(uniform_init<float>(rng, {512, 480}, 1.0));
    REQUIRE(ops::upsample_nearest(ctx, wide, 2).shape() == Shape{512, 960});
}

TEST_CASE("activation values") {
    auto ctx = eval_ctx<float>();
    Var<float> z = constf({2}, {0, 0});
    Var<float> sm = ops::softmax(ctx, z, 0);
    REQUIRE(sm.val()[0] == Catch::Approx(0.5));
    REQUIRE(sm.val()[1] == Catch::Approx(0.5));

    Var<float> s = ops::sigmoid(ctx, constf({1}, {0}));
    REQUIRE(s.val()[0] == Catch::Approx(0.5));

    Var<float> e = ops::elu(ctx, constf({3}, {-1, 0, 2}));
    REQUIRE(e.val()[0] == Catch::Approx(std::exp(-1.0) - 1.0).epsilon(1e-6));
    REQUIRE(e.val()[1] == 0.0f);
    REQUIRE(e.val()[2] == 2.0f);

    Var<float> r = ops::relu(ctx, constf({3}, {-1, 0, 2}));
    REQUIRE(r.val().vec() == std::vector<float>{0, 0, 2});
}

TEST_CASE("softmax rows sum to one") {
    auto ctx = eval_ctx<float>();
    Rng rng(11);
    Var<float> x = Var<float>::constant(uniform_init<float>(rng, {7, 13}, 4.0));
    Var<float> y = ops::softmax(ctx, x, 1);
    for (size_t i = 0; i < 7; ++i) {
        float row = 0;
        for (size_t j = 0; j < 13; ++j) row += y.val().at2(i, j);
        REQUIRE(row == Catch::Approx(1.0).margin(1e-5));
    }
    // axis 0 normalizes columns
    Var<float> yc = ops::softmax(ctx, x, 0);
    for (size_t j = 0; j < 13; ++j) {
        float col = 0;
        for (size_t i = 0; i < 7; ++i) col += yc.val().at2(i, j);
        REQUIRE(col == Catch::Approx(1.0).margin(1e-5));
    }
}

TEST_CASE("batchnorm1d normalizes per channel in train mode") {
    BatchNorm1d<float> bn("bn", 2);
    CtxT<float> ctx{nullptr, true, nullptr};
    Rng rng(2);
    Tensor x({2, 400});
    for (size_t i = 0; i < x.numel(); ++i) x[i] = float(rng.normal() * 2.0 + 3.0);
    Var<float> y = bn.forward(ctx, Var<float>::constant(x));
    for (size_t c = 0; c < 2; ++c) {
        double mean = 0, var = 0;
        for (size_t t = 0; t < 400; ++t) mean += y.val().at2(c, t);
        mean /= 400;
        for (size_t t = 0; t < 400; ++t) {
            const double d = y.val().at2(c, t) - mean;
            var += d * d;
        }
        var /= 400;
        REQUIRE(mean == Catch::Approx(0.0).margin(1e-4));
        REQUIRE(var == Catch::Approx(1.0).margin(1e-3));
    }
}

TEST_CASE("batchnorm1d constant channel collapses to shift") {
    BatchNorm1d<float> bn("bn", 1);
    bn.beta.value()[0] = 0.7f;
    CtxT<float> ctx{nullptr, true, nullptr};
    Var<float> y = bn.forward(ctx, Var<float>::constant(Tensor::full({1, 16}, 3.25f)));
    for (size_t t = 0; t < 16; ++t) {
        REQUIRE(is_finite(y.val()[t]));  // divisor sqrt(0 + 1e-3) keeps it finite
        REQUIRE(y.val()[t] == Catch::Approx(0.7).margin(1e-6));
    }
}

TEST_CASE("batchnorm1d eval before training uses init statistics") {
    BatchNorm1d<float> bn("bn", 1);
    CtxT<float> ctx{nullptr, false, nullptr};
    Var<float> y = bn.forward(ctx, Var<float>::constant(Tensor({1, 2}, {1.0f, -1.0f})));
    // (x - 0)/sqrt(1 + eps)
    REQUIRE(y.val()[0] == Catch::Approx(1.0 / std::sqrt(1.001)).epsilon(1e-5));

    CtxT<float> train{nullptr, true, nullptr};
    REQUIRE_THROWS_AS(bn.forward(train, Var<float>::constant(Tensor({1, 1}, {1.0f}))), ShapeError);
}

TEST_CASE("layernorm maps constant and antisymmetric rows") {
    LayerNorm<float> ln("ln", 2);
    auto ctx = eval_ctx<float>();
    Var<float> y = ln.forward(ctx, constf({2}, {1, 1}));
    REQUIRE(y.val()[0] == Catch::Approx(0.0).margin(1e-6));
    REQUIRE(y.val()[1] == Catch::Approx(0.0).margin(1e-6));

    Var<float> z = ln.forward(ctx, constf({2}, {-3, 3}));
    REQUIRE(z.val()[0] == Catch::Approx(-1.0).margin(1e-3));
    REQUIRE(z.val()[1] == Catch::Approx(1.0).margin(1e-3));
}

TEST_CASE("dropout semantics") {
    SECTION("eval mode is byte-identical identity") {
        auto ctx = eval_ctx<float>();
        Var<float> x = constf({4}, {1, 2, 3, 4});
        Var<float> y = ops::dropout(ctx, x, 0.5);
        REQUIRE(y.node() == x.node());
    }
    SECTION("rate zero is identity in train mode too") {
        Rng rng(1);
        CtxT<float> ctx{nullptr, true, &rng};
        Var<float> x = constf({4}, {1, 2, 3, 4});
        REQUIRE(ops::dropout(ctx, x, 0.0).node() == x.node());
    }
    SECTION("rate one is rejected") {
        auto ctx = eval_ctx<float>();
        Var<float> x = constf({1}, {1});
        REQUIRE_THROWS_AS(ops::dropout(ctx, x, 1.0), ConfigError);
    }
    SECTION("half rate keeps about half and doubles survivors") {
        Rng rng(9);
        CtxT<float> ctx{nullptr, true, &rng};
        const size_t n = 100000;
        Var<float> x = Var<float>::constant(Tensor::full({n}, 1.0f));
        Var<float> y = ops::dropout(ctx, x, 0.5);
        size_t kept = 0;
        for (size_t i = 0; i < n; ++i) {
            if (y.val()[i] != 0.0f) {
                ++kept;
                REQUIRE(y.val()[i] == 2.0f);
            }
        }
        REQUIRE(double(kept) / double(n) == Catch::Approx(0.5).margin(0.01));
    }
    SECTION("spatial dropout removes whole channels") {
        Rng rng(4);
        CtxT<float> ctx{nullptr, true, &rng};
        Var<float> x = Var<float>::constant(Tensor::full({64, 10}, 1.0f));
        Var<float> y = ops::spatial_dropout(ctx, x, 0.5);
        for (size_t c = 0; c < 64; ++c) {
            const float first = y.val().at2(c, 0);
            REQUIRE((first == 0.0f || first == 2.0f));
            for (size_t t = 1; t < 10; ++t) REQUIRE(y.val().at2(c, t) == first);
        }
    }
}

TEST_CASE("linear maps") {
    auto ctx = eval_ctx<float>();
    SECTION("identity weight") {
        Var<float> x = constf({2}, {3, -1});
        Var<float> w = constf({2, 2}, {1, 0, 0, 1});
        Var<float> b = constf({2}, {0, 0});
        Var<float> y = ops::linear(ctx, x, w, b);
        REQUIRE(y.val().vec() == std::vector<float>{3, -1});
    }
    SECTION("hand dot product") {
        Var<float> x = constf({2}, {1, 2});
        Var<float> w = constf({2, 1}, {1, 1});
        Var<float> b = constf({1}, {1});
        REQUIRE(ops::linear(ctx, x, w, b).val()[0] == 4.0f);
    }
    SECTION("inner mismatch rejected") {
        Var<float> x = constf({3}, {1, 2, 3});
        Var<float> w = constf({2, 1}, {1, 1});
        Var<float> b = constf({1}, {0});
        REQUIRE_THROWS_AS(ops::linear(ctx, x, w, b), ShapeError);
    }
}
