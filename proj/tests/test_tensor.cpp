#include <doctest.h>

#include <cmath>

#include "tecswin/rng.hpp"
#include "tecswin/tensor.hpp"
#include "testutil.hpp"

using namespace tecswin;
using testutil::max_abs_diff;
using testutil::max_grad_error;

TEST_CASE("rng: identical seed gives identical stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(42), d(43);
    int diff = 0;
    for (int i = 0; i < 100; ++i) diff += c.next_u64() != d.next_u64();
    CHECK(diff > 90);
}

TEST_CASE("rng: forked streams are independent of parent consumption") {
    Rng a(7);
    Rng child1 = a.fork(1);
    a.normal();
    a.normal();
    Rng b(7);
    Rng child2 = b.fork(1);
    for (int i = 0; i < 100; ++i) CHECK(child1.next_u64() == child2.next_u64());
}

TEST_CASE("rng: normal moments roughly standard") {
    Rng r(123);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double v = r.normal();
        sum += v;
        sq += v * v;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("add/mul broadcast matches manual expansion") {
    Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from_data({3}, {10, 20, 30});
    Tensor s = add(a, b);
    CHECK(s.data() == std::vector<float>{11, 22, 33, 14, 25, 36});
    Tensor p = mul(a, b);
    CHECK(p.data() == std::vector<float>{10, 40, 90, 40, 100, 180});

    Tensor col = Tensor::from_data({2, 1}, {100, 200});
    Tensor s2 = add(a, col);
    CHECK(s2.data() == std::vector<float>{101, 102, 103, 204, 205, 206});
}

TEST_CASE("add shape mismatch throws") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 4});
    CHECK_THROWS_AS(add(a, b), ShapeError);
}

TEST_CASE("matmul: identity and known product") {
    Tensor I = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor m = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
    CHECK(max_abs_diff(matmul(I, m), m) == 0.0);

    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_data({2, 2}, {5, 6, 7, 8});
    Tensor c = matmul(a, b);
    CHECK(c.data() == std::vector<float>{19, 22, 43, 50});
    // transpose_b path: b stored as [n,k]
    Tensor bt = Tensor::from_data({2, 2}, {5, 7, 6, 8});
    CHECK(max_abs_diff(matmul(a, bt, true), c) == 0.0);
}

TEST_CASE("matmul: batch broadcasting") {
    Rng rng(5);
    Tensor a = Tensor::randn({2, 3, 4}, rng);
    Tensor b = Tensor::randn({4, 5}, rng);
    Tensor c = matmul(a, b);
    REQUIRE(c.shape() == Shape{2, 3, 5});
    for (int64_t bt = 0; bt < 2; ++bt)
        for (int64_t i = 0; i < 3; ++i)
            for (int64_t j = 0; j < 5; ++j) {
                double acc = 0;
                for (int64_t k = 0; k < 4; ++k)
                    acc += a.data()[bt * 12 + i * 4 + k] * b.data()[k * 5 + j];
                CHECK(std::abs(c.data()[bt * 15 + i * 5 + j] - acc) < 1e-5);
            }
}

TEST_CASE("softmax rows sum to 1 and masked logits vanish") {
    Rng rng(11);
    Tensor x = Tensor::randn({4, 7}, rng, 3.0f);
    Tensor y = softmax(x, 1);
    for (int64_t r = 0; r < 4; ++r) {
        double s = 0;
        for (int64_t c = 0; c < 7; ++c) s += y.data()[r * 7 + c];
        CHECK(std::abs(s - 1.0) < 1e-6);
    }
    Tensor z = Tensor::from_data({1, 3}, {0.0f, -1e9f, 0.0f});
    Tensor yz = softmax(z, 1);
    CHECK(yz.data()[1] == 0.0f);  // -1e9 underflows to exact zero in f32
    CHECK(std::abs(yz.data()[0] - 0.5) < 1e-6);
}

TEST_CASE("layer_norm output statistics") {
    Rng rng(13);
    Tensor x = Tensor::randn({5, 16}, rng, 2.5f);
    Tensor g = Tensor::full({16}, 1.0f);
    Tensor b = Tensor::zeros({16});
    Tensor y = layer_norm(x, g, b);
    for (int64_t r = 0; r < 5; ++r) {
        double mean = 0, var = 0;
        for (int64_t c = 0; c < 16; ++c) mean += y.data()[r * 16 + c];
        mean /= 16;
        for (int64_t c = 0; c < 16; ++c) {
            double d = y.data()[r * 16 + c] - mean;
            var += d * d;
        }
        var /= 16;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::abs(var - 1.0) < 1e-3);
    }
}

TEST_CASE("gelu/silu known values") {
    Tensor x = Tensor::from_data({3}, {-1.0f, 0.0f, 1.0f});
    Tensor yg = gelu(x);
    CHECK(std::abs(yg.data()[0] - (-0.158655)) < 1e-5);
    CHECK(yg.data()[1] == 0.0f);
    CHECK(std::abs(yg.data()[2] - 0.841345) < 1e-5);
    Tensor ys = silu(x);
    CHECK(std::abs(ys.data()[0] - (-0.268941)) < 1e-5);
    CHECK(std::abs(ys.data()[2] - 0.731059) < 1e-5);
}

TEST_CASE("pixel shuffle round-trip and layout") {
    // channel groups of 4 map to 2x2 spatial positions row-major
    Tensor x = Tensor::from_data({1, 1, 1, 4}, {1, 2, 3, 4});
    Tensor y = pixel_shuffle(x);
    REQUIRE(y.shape() == Shape{1, 2, 2, 1});
    CHECK(y.data() == std::vector<float>{1, 2, 3, 4});

    Rng rng(17);
    Tensor big = Tensor::randn({2, 3, 5, 8}, rng);
    CHECK(max_abs_diff(pixel_unshuffle(pixel_shuffle(big)), big) == 0.0);
    Tensor down = Tensor::randn({2, 4, 6, 3}, rng);
    CHECK(max_abs_diff(pixel_shuffle(pixel_unshuffle(down)), down) == 0.0);
}

TEST_CASE("window partition/reverse exact inverse") {
    Rng rng(19);
    Tensor x = Tensor::randn({2, 8, 8, 5}, rng);
    Tensor w = window_partition(x, 4);
    REQUIRE(w.shape() == Shape{2 * 4, 16, 5});
    CHECK(max_abs_diff(window_reverse(w, 4, 2, 8, 8), x) == 0.0);
}

TEST_CASE("cyclic shift inverse and index trace") {
    Rng rng(23);
    Tensor x = Tensor::randn({1, 6, 6, 2}, rng);
    CHECK(max_abs_diff(cyclic_shift(cyclic_shift(x, 2, 2), -2, -2), x) == 0.0);
    CHECK(max_abs_diff(cyclic_shift(x, 0, 0), x) == 0.0);

    Tensor pin = Tensor::zeros({1, 4, 4, 1});
    pin.mutable_data()[0] = 1.0f;
    Tensor moved = cyclic_shift(pin, 1, 1);
    CHECK(moved.data()[(1 * 4 + 1)] == 1.0f);
}

TEST_CASE("backward: trivial gradients") {
    Rng rng(29);
    Tensor x = Tensor::randn({3, 4}, rng, 1.0f, true);
    backward(sum_all(x));
    for (float g : x.grad()) CHECK(g == 1.0f);

    x.zero_grad();
    backward(mul_scalar(sum_all(mul(x, x)), 0.5f));
    for (size_t i = 0; i < x.grad().size(); ++i)
        CHECK(std::abs(x.grad()[i] - x.data()[i]) < 1e-6);
}

TEST_CASE("backward rejects non-scalar loss") {
    Rng rng(1);
    Tensor x = Tensor::randn({2, 2}, rng, 1.0f, true);
    CHECK_THROWS(backward(add(x, x)));
}

TEST_CASE("gradcheck property suite over every differentiable op") {
    Rng rng(31);
    auto leaf = [&](Shape s) { return Tensor::randn(std::move(s), rng, 0.5f, true); };

    SUBCASE("add/sub/mul with broadcast") {
        Tensor a = leaf({2, 3}), b = leaf({3});
        auto loss = [&] { return sum_all(mul(add(a, b), sub(a, b))); };
        CHECK(max_grad_error(loss, {a, b}) < 1e-2);
    }
    SUBCASE("matmul both operands, both transpose modes") {
        Tensor a = leaf({2, 3, 4}), b = leaf({4, 5}), bt = leaf({5, 4});
        auto loss1 = [&] { return sum_all(mul(matmul(a, b), matmul(a, b))); };
        CHECK(max_grad_error(loss1, {a, b}) < 1e-2);
        auto loss2 = [&] { return sum_all(mul(matmul(a, bt, true), matmul(a, bt, true))); };
        CHECK(max_grad_error(loss2, {a, bt}) < 1e-2);
    }
    SUBCASE("linear") {
        Tensor x = leaf({4, 6}), w = leaf({6, 3}), b = leaf({3});
        auto loss = [&] { return sum_all(mul(linear(x, w, b), linear(x, w, b))); };
        CHECK(max_grad_error(loss, {x, w, b}) < 1e-2);
    }
    SUBCASE("gelu") {
        Tensor x = leaf({5, 5});
        auto loss = [&] { return sum_all(mul(gelu(x), gelu(x))); };
        CHECK(max_grad_error(loss, {x}) < 1e-2);
    }
    SUBCASE("silu") {
        Tensor x = leaf({5, 5});
        auto loss = [&] { return sum_all(mul(silu(x), silu(x))); };
        CHECK(max_grad_error(loss, {x}) < 1e-2);
    }
    SUBCASE("layer_norm") {
        Tensor x = leaf({3, 8}), g = leaf({8}), b = leaf({8});
        auto loss = [&] { return sum_all(mul(layer_norm(x, g, b), layer_norm(x, g, b))); };
        CHECK(max_grad_error(loss, {x, g, b}) < 1e-2);
    }
    SUBCASE("softmax") {
        Tensor x = leaf({4, 6});
        Tensor sel = Tensor::randn({4, 6}, rng);
        auto loss = [&] { return sum_all(mul(softmax(x, 1), sel)); };
        CHECK(max_grad_error(loss, {x}) < 1e-2);
    }
    SUBCASE("softmax over middle axis") {
        Tensor x = leaf({2, 3, 4});
        Tensor sel = Tensor::randn({2, 3, 4}, rng);
        auto loss = [&] { return sum_all(mul(softmax(x, 1), sel)); };
        CHECK(max_grad_error(loss, {x}) < 1e-2);
    }
    SUBCASE("structural ops") {
        Tensor x = leaf({2, 4, 4, 4});
        Tensor sel = Tensor::randn({2 * 2 * 2, 4, 4}, rng);
        auto loss = [&] {
            Tensor t = cyclic_shift(x, 1, -1);
            t = window_partition(t, 2);
            return sum_all(mul(t, sel));
        };
        CHECK(max_grad_error(loss, {x}) < 1e-2);
    }
    SUBCASE("pixel shuffle pair") {
        Tensor x = leaf({1, 2, 2, 8});
        auto loss = [&] { return sum_all(mul(pixel_shuffle(x), pixel_shuffle(x))); };
        CHECK(max_grad_error(loss, {x}) < 1e-2);
        Tensor y = leaf({1, 4, 4, 2});
        auto loss2 = [&] { return sum_all(mul(pixel_unshuffle(y), pixel_unshuffle(y))); };
        CHECK(max_grad_error(loss2, {y}) < 1e-2);
    }
    SUBCASE("concat/slice/reshape/permute") {
        Tensor a = leaf({2, 3}), b = leaf({2, 2});
        auto loss = [&] {
            Tensor c = concat({a, b}, 1);
            Tensor s = slice(c, 1, 1, 4);
            Tensor r = reshape(s, {3, 2});
            Tensor p = permute(r, {1, 0});
            return sum_all(mul(p, p));
        };
        CHECK(max_grad_error(loss, {a, b}) < 1e-2);
    }
    SUBCASE("gather_rows") {
        Tensor t = leaf({5, 3});
        std::vector<int64_t> idx = {4, 0, 0, 2};
        Tensor sel = Tensor::randn({4, 3}, rng);
        auto loss = [&] { return sum_all(mul(gather_rows(t, idx), sel)); };
        CHECK(max_grad_error(loss, {t}) < 1e-2);
    }
    SUBCASE("conv_1x1") {
        Tensor x = leaf({2, 3, 3, 4}), w = leaf({4, 5}), b = leaf({5});
        // mean keeps the loss small enough that f32 central differences stay
        // above the cancellation noise
        auto loss = [&] { return mean_all(mul(conv_1x1(x, w, b), conv_1x1(x, w, b))); };
        CHECK(max_grad_error(loss, {x, w, b}) < 1e-2);
    }
    SUBCASE("reductions and mse") {
        Tensor a = leaf({3, 4}), b = leaf({3, 4});
        auto loss = [&] { return mse(a, b); };
        CHECK(max_grad_error(loss, {a, b}) < 1e-2);
        auto loss2 = [&] { return sum_all(mul(mean_axis(a, 0), mean_axis(a, 0))); };
        CHECK(max_grad_error(loss2, {a}) < 1e-2);
        auto loss3 = [&] { return mean_all(mul(a, a)); };
        CHECK(max_grad_error(loss3, {a}) < 1e-2);
        auto loss4 = [&] {
            return sum_all(mul(broadcast_to(mean_axis(a, 1), {4, 3}), permute(b, {1, 0})));
        };
        CHECK(max_grad_error(loss4, {a, b}) < 1e-2);
    }
}

TEST_CASE("determinism: identical seed and inputs give bit-identical results") {
    auto run = [] {
        Rng rng(777);
        Tensor x = Tensor::randn({4, 8}, rng);
        Tensor w = Tensor::randn({8, 8}, rng);
        Tensor y = softmax(gelu(matmul(x, w)), 1);
        return y.data();
    };
    CHECK(run() == run());
}

TEST_CASE("no-grad guard produces constant leaves") {
    Rng rng(2);
    Tensor x = Tensor::randn({2, 2}, rng, 1.0f, true);
    NoGradGuard ng;
    Tensor y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
}
