#include <doctest.h>

#include <array>
#include <cmath>
#include <cstring>
#include <limits>

#include "safepatch/optim.hpp"
#include "safepatch/ops.hpp"
#include "safepatch/tape.hpp"

using namespace safepatch;

TEST_SUITE_BEGIN("optim");

namespace {

void deposit_grad(Tensor& p, const std::vector<double>& g) {
    p.set_trainable(true);
    Tape tape;
    Tensor gt = Tensor::from_data(p.shape(), g);
    Tensor loss = ops::sum(ops::mul(p, gt));  // d/dp = g
    std::array<Tensor*, 1> params{&p};
    tape.backward(loss, params);
}

} // namespace

TEST_CASE("zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::from_data({3}, {1.0, -2.0, 0.5});
    std::vector<double> before(p.data(), p.data() + 3);
    deposit_grad(p, {0, 0, 0});
    std::array<Tensor*, 1> params{&p};
    AdamState st = AdamState::init(params);
    for (int i = 0; i < 5; ++i) {
        deposit_grad(p, {0, 0, 0});
        adam_step(params, st, {});
    }
    CHECK(std::memcmp(before.data(), p.data(), 3 * sizeof(double)) == 0);
}

TEST_CASE("first step magnitude is about lr * sign(g)") {
    Tensor p = Tensor::from_data({2}, {0.0, 0.0});
    deposit_grad(p, {3.0, -0.7});
    std::array<Tensor*, 1> params{&p};
    AdamState st = AdamState::init(params);
    AdamConfig cfg;
    cfg.lr = 0.01;
    adam_step(params, st, cfg);
    // Bias-corrected first step: delta = lr * g / (|g| + eps) ~ lr * sign(g).
    CHECK(p.data()[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(p.data()[1] == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("non-finite gradient aborts before mutating anything") {
    Tensor p = Tensor::from_data({2}, {1.0, 2.0});
    deposit_grad(p, {1.0, 1.0});
    p.grad_data()[1] = std::numeric_limits<double>::quiet_NaN();
    std::array<Tensor*, 1> params{&p};
    AdamState st = AdamState::init(params);
    CHECK_THROWS_AS(adam_step(params, st, {}), NonFiniteError);
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == 2.0);
    CHECK(st.step == 0);
}

TEST_CASE("updates are deterministic") {
    auto run = [](std::vector<double>& out) {
        Tensor p = Tensor::from_data({4}, {0.4, -0.3, 0.2, -0.1});
        std::array<Tensor*, 1> params{&p};
        AdamState st = AdamState::init(params);
        for (int i = 0; i < 10; ++i) {
            deposit_grad(p, {0.1 * i, -0.2, 0.05, 0.3});
            adam_step(params, st, {});
        }
        out.assign(p.data(), p.data() + 4);
    };
    std::vector<double> a, b;
    run(a);
    run(b);
    CHECK(std::memcmp(a.data(), b.data(), 4 * sizeof(double)) == 0);
}

TEST_SUITE_END();
