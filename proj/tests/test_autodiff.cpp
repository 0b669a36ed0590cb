#include <doctest.h>

#include <array>
#include <cmath>

#include "safepatch/grad_check.hpp"
#include "safepatch/ops.hpp"
#include "safepatch/tape.hpp"

using namespace safepatch;

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("hand-derived gradient of mse(w*x, y)") {
    // d/dw (wx - y)^2 = 2(wx - y)x = 8 at w=1, x=2, y=0.
    Tensor w = Tensor::scalar(1.0);
    w.set_trainable(true);
    Tensor x = Tensor::scalar(2.0);
    Tensor y = Tensor::scalar(0.0);

    Tape tape;
    Tensor loss = ops::mse(ops::mul(w, x), y);
    std::array<Tensor*, 1> params{&w};
    tape.backward(loss, params);
    REQUIRE(w.has_grad());
    CHECK(w.grad()[0] == 8.0);
}

TEST_CASE("params outside the listed set receive no gradient") {
    Tensor w = Tensor::scalar(1.5);
    Tensor v = Tensor::scalar(2.5);
    w.set_trainable(true);
    v.set_trainable(true);

    Tape tape;
    Tensor loss = ops::mse(ops::mul(w, v), Tensor::scalar(0.0));
    std::array<Tensor*, 1> params{&w};
    tape.backward(loss, params);
    CHECK(w.has_grad());
    CHECK_FALSE(v.has_grad());
}

TEST_CASE("disconnected params get zero grad without error") {
    Tensor w = Tensor::scalar(1.0);
    Tensor unused = Tensor::scalar(5.0);
    w.set_trainable(true);
    unused.set_trainable(true);

    Tape tape;
    Tensor loss = ops::mse(w, Tensor::scalar(0.0));
    std::array<Tensor*, 2> params{&w, &unused};
    tape.backward(loss, params);
    REQUIRE(unused.has_grad());
    CHECK(unused.grad()[0] == 0.0);
}

TEST_CASE("stale tape and non-scalar loss are contract errors") {
    Tensor w = Tensor::scalar(1.0);
    w.set_trainable(true);
    std::array<Tensor*, 1> params{&w};

    Tape tape;
    Tensor loss = ops::mul(w, w);
    tape.backward(loss, params);
    CHECK_THROWS_AS(tape.backward(loss, params), ContractError);

    Tape tape2;
    Tensor vec = ops::add(Tensor::from_data({2}, {1, 2}), Tensor::from_data({2}, {0, 0}));
    CHECK_THROWS_AS(tape2.backward(vec, params), ContractError);

    // A loss computed while no tape was active cannot be backpropagated.
    Tensor off = ops::mse(w, Tensor::scalar(0.0));
    Tape tape3;
    CHECK_THROWS_AS(tape3.backward(off, params), ContractError);
}

TEST_CASE("grad_check on quadratic and linear functions") {
    Tensor w = Tensor::from_data({1}, {3.0});
    w.set_trainable(true);
    std::array<Tensor*, 1> params{&w};
    Rng rng(21);

    auto quad = [&]() { return ops::mul(w, w); };
    CHECK(grad_check(quad, params, 1e-5, 8, rng) < 1e-6);

    auto lin = [&]() { return ops::scale(w, 4.0); };
    CHECK(grad_check(lin, params, 1e-5, 8, rng) < 1e-9);
}

TEST_CASE("grad_check across every differentiable primitive") {
    Rng rng(77);
    Tensor target = Tensor::randn({4, 6}, rng);

    SUBCASE("matmul + add + silu chain") {
        Tensor a = Tensor::randn({4, 5}, rng);
        Tensor b = Tensor::randn({5, 6}, rng);
        a.set_trainable(true);
        b.set_trainable(true);
        std::array<Tensor*, 2> params{&a, &b};
        auto f = [&]() { return ops::mse(ops::silu(ops::matmul(a, b)), target); };
        CHECK(grad_check(f, params, 1e-5, 24, rng) < 1e-4);
    }

    SUBCASE("softmax + mul") {
        Tensor x = Tensor::randn({4, 6}, rng);
        x.set_trainable(true);
        std::array<Tensor*, 1> params{&x};
        auto f = [&]() { return ops::mse(ops::softmax(x), target); };
        CHECK(grad_check(f, params, 1e-5, 24, rng) < 1e-4);
    }

    SUBCASE("conv2d with stride and padding, kernel and bias") {
        Tensor x = Tensor::randn({2, 6, 6}, rng);
        Tensor k = Tensor::randn({3, 2, 3, 3}, rng);
        Tensor bias = Tensor::randn({3}, rng);
        Tensor tgt = Tensor::randn({3, 3, 3}, rng);
        x.set_trainable(true);
        k.set_trainable(true);
        bias.set_trainable(true);
        std::array<Tensor*, 3> params{&x, &k, &bias};
        auto f = [&]() { return ops::mse(ops::conv2d(x, k, bias, 2, 1), tgt); };
        CHECK(grad_check(f, params, 1e-5, 24, rng) < 1e-4);
    }

    SUBCASE("gather + transpose + sum") {
        Tensor table = Tensor::randn({5, 3}, rng);
        table.set_trainable(true);
        std::array<Tensor*, 1> params{&table};
        auto f = [&]() {
            Tensor g = ops::gather_rows(table, {0, 2, 2, 4});
            return ops::sum(ops::silu(ops::transpose(g)));
        };
        CHECK(grad_check(f, params, 1e-5, 15, rng) < 1e-4);
    }

    SUBCASE("upsample + concat + channel bias") {
        Tensor x = Tensor::randn({2, 3, 3}, rng);
        Tensor y = Tensor::randn({2, 6, 6}, rng);
        Tensor bias = Tensor::randn({4}, rng);
        x.set_trainable(true);
        y.set_trainable(true);
        bias.set_trainable(true);
        std::array<Tensor*, 3> params{&x, &y, &bias};
        auto f = [&]() {
            Tensor up = ops::upsample_nearest2(x);
            Tensor cat = ops::concat_channels(up, y);
            return ops::sum(ops::silu(ops::add_channel_bias(cat, bias)));
        };
        CHECK(grad_check(f, params, 1e-5, 24, rng) < 1e-4);
    }

    SUBCASE("elementwise mix") {
        Tensor a = Tensor::randn({7}, rng);
        Tensor b = Tensor::randn({7}, rng);
        a.set_trainable(true);
        b.set_trainable(true);
        std::array<Tensor*, 2> params{&a, &b};
        auto f = [&]() {
            Tensor u = ops::mul(ops::add(a, b), ops::sub(a, b));
            return ops::mse(ops::scale(u, 0.5), Tensor::zeros({7}));
        };
        CHECK(grad_check(f, params, 1e-5, 14, rng) < 1e-4);
    }
}

TEST_CASE("reused tensor accumulates both contributions") {
    Tensor w = Tensor::scalar(3.0);
    w.set_trainable(true);
    std::array<Tensor*, 1> params{&w};
    Tape tape;
    // f = w*w -> df/dw = 2w = 6
    Tensor loss = ops::mul(w, w);
    tape.backward(loss, params);
    CHECK(w.grad()[0] == 6.0);
}

TEST_SUITE_END();
