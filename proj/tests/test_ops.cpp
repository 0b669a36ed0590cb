#include <doctest.h>

#include <cmath>

#include "safepatch/ops.hpp"

using namespace safepatch;

TEST_SUITE_BEGIN("ops");

TEST_CASE("matmul against identity and hand arithmetic") {
    Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor b = Tensor::from_data({2, 2}, {3, 4, 5, 6});
    Tensor r = ops::matmul(eye, b);
    for (int i = 0; i < 4; ++i) CHECK(r.data()[i] == b.data()[i]);

    Tensor a = Tensor::from_data({1, 2}, {1, 2});
    Tensor c = Tensor::from_data({2, 1}, {3, 4});
    CHECK(ops::matmul(a, c).item() == 11.0);

    Tensor bad = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(ops::matmul(bad, bad), InvalidShapeError);
}

TEST_CASE("conv2d zero kernel, ones kernel, and scaling kernel") {
    Rng rng(3);
    Tensor x = Tensor::randn({1, 3, 3}, rng);

    Tensor zk = Tensor::zeros({2, 1, 3, 3});
    Tensor rz = ops::conv2d(x, zk, 1, 1);
    for (int i = 0; i < rz.numel(); ++i) CHECK(rz.data()[i] == 0.0);

    Tensor ones_x = Tensor::full({1, 3, 3}, 1.0);
    Tensor ones_k = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor r9 = ops::conv2d(ones_x, ones_k, 1, 0);
    CHECK(r9.shape() == Shape{1, 1, 1});
    CHECK(r9.item() == 9.0);

    Tensor two = Tensor::from_data({1, 1, 1, 1}, {2.0});
    Tensor rd = ops::conv2d(x, two, 1, 0);
    for (int i = 0; i < 9; ++i) CHECK(rd.data()[i] == 2.0 * x.data()[i]);
}

TEST_CASE("conv2d geometry and errors") {
    Rng rng(4);
    Tensor x = Tensor::randn({1, 16, 16}, rng);
    Tensor k = Tensor::randn({8, 1, 3, 3}, rng);
    Tensor y = ops::conv2d(x, k, 2, 1);
    CHECK(y.shape() == Shape{8, 8, 8});

    Tensor huge = Tensor::randn({1, 1, 5, 5}, rng);
    Tensor tiny = Tensor::randn({1, 3, 3}, rng);
    CHECK_THROWS_AS(ops::conv2d(tiny, huge, 1, 0), InvalidShapeError);

    Tensor bias = Tensor::from_data({8}, std::vector<double>(8, 0.5));
    Tensor yb = ops::conv2d(x, k, bias, 2, 1);
    for (int i = 0; i < 8 * 8; ++i) CHECK(yb.data()[i] == doctest::Approx(y.data()[i] + 0.5));
}

TEST_CASE("elementwise ops") {
    Tensor x = Tensor::from_data({3}, {1, -2, 3});
    Tensor z = Tensor::zeros({3});
    Tensor r = ops::add(x, z);
    for (int i = 0; i < 3; ++i) CHECK(r.data()[i] == x.data()[i]);

    CHECK(ops::silu(Tensor::scalar(0.0)).item() == 0.0);
    CHECK(ops::silu(Tensor::scalar(1.0)).item() == doctest::Approx(0.7310585786300049).epsilon(1e-15));

    Tensor y2 = Tensor::from_data({2}, {1, 2});
    CHECK_THROWS_AS(ops::add(x, y2), InvalidShapeError);
    CHECK_THROWS_AS(ops::mul(x, y2), InvalidShapeError);

    Tensor s = ops::scale(x, -3.0);
    CHECK(s.data()[1] == 6.0);
}

TEST_CASE("softmax values, stability, and normalisation") {
    Tensor a = ops::softmax(Tensor::from_data({1, 2}, {0, 0}));
    CHECK(a.data()[0] == 0.5);
    CHECK(a.data()[1] == 0.5);

    Tensor b = ops::softmax(Tensor::from_data({1, 2}, {1000, 0}));
    CHECK(b.data()[0] == doctest::Approx(1.0));
    CHECK(b.data()[1] == doctest::Approx(0.0));
    CHECK(b.all_finite());

    Tensor c = ops::softmax(Tensor::from_data({1, 3}, {1, 2, 3}));
    CHECK(c.data()[0] == doctest::Approx(0.09003057317038046).epsilon(1e-12));
    CHECK(c.data()[1] == doctest::Approx(0.24472847105479764).epsilon(1e-12));
    CHECK(c.data()[2] == doctest::Approx(0.6652409557748219).epsilon(1e-12));

    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = ops::scale(Tensor::randn({4, 7}, rng), 1e6);
        Tensor y = ops::softmax(x);
        REQUIRE(y.all_finite());
        for (int i = 0; i < 4; ++i) {
            double s = 0.0;
            for (int j = 0; j < 7; ++j) {
                s += y.data()[i * 7 + j];
                CHECK(y.data()[i * 7 + j] >= 0.0);
            }
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("mse basics and symmetry") {
    Tensor a = Tensor::from_data({2}, {0, 0});
    Tensor b = Tensor::from_data({2}, {2, 0});
    CHECK(ops::mse(a, b).item() == 2.0);
    CHECK(ops::mse(a, a).item() == 0.0);

    Tensor c = Tensor::from_data({3}, {1, 2, 3});
    CHECK_THROWS_AS(ops::mse(a, c), InvalidShapeError);

    Rng rng(9);
    for (int i = 0; i < 20; ++i) {
        Tensor x = Tensor::randn({5}, rng);
        Tensor y = Tensor::randn({5}, rng);
        CHECK(ops::mse(x, y).item() == ops::mse(y, x).item());
        CHECK(ops::mse(x, y).item() >= 0.0);
        CHECK(ops::mse(x, x).item() == 0.0);
    }
}

TEST_CASE("non-finite results are rejected") {
    Tensor big = Tensor::full({2}, 1e308);
    CHECK_THROWS_AS(ops::mul(big, big), NonFiniteError);
}

TEST_CASE("structural ops") {
    Rng rng(10);
    Tensor x = Tensor::randn({2, 2, 2}, rng);
    Tensor up = ops::upsample_nearest2(x);
    CHECK(up.shape() == Shape{2, 4, 4});
    CHECK(up.data()[0] == x.data()[0]);
    CHECK(up.data()[1] == x.data()[0]);
    CHECK(up.data()[4] == x.data()[0]);

    Tensor y = Tensor::randn({3, 2, 2}, rng);
    Tensor cat = ops::concat_channels(x, y);
    CHECK(cat.shape() == Shape{5, 2, 2});
    CHECK(cat.data()[8] == y.data()[0]);

    Tensor table = Tensor::from_data({3, 2}, {0, 1, 10, 11, 20, 21});
    Tensor g = ops::gather_rows(table, {2, 0});
    CHECK(g.data()[0] == 20.0);
    CHECK(g.data()[3] == 1.0);
    CHECK_THROWS_AS(ops::gather_rows(table, {3}), InvalidTokenError);

    Tensor tr = ops::transpose(Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}));
    CHECK(tr.shape() == Shape{3, 2});
    CHECK(tr.data()[1] == 4.0);

    Tensor bias = Tensor::from_data({2}, {1.0, -1.0});
    Tensor xb = ops::add_channel_bias(x, bias);
    CHECK(xb.data()[0] == x.data()[0] + 1.0);
    CHECK(xb.data()[4] == x.data()[4] - 1.0);
}

TEST_SUITE_END();
