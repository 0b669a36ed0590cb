#include <doctest.h>

#include <array>
#include <cmath>
#include <cstring>

#include "safepatch/datagen.hpp"
#include "safepatch/denoiser.hpp"
#include "safepatch/grad_check.hpp"
#include "safepatch/sampler.hpp"
#include "safepatch/tape.hpp"

using namespace safepatch;

TEST_SUITE_BEGIN("denoiser");

namespace {

DenoiserParams test_base(uint64_t seed = 2) {
    Rng rng(seed);
    return init_denoiser(rng);
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.numel() == b.numel() &&
           std::memcmp(a.data(), b.data(), static_cast<size_t>(a.numel()) * sizeof(double)) == 0;
}

} // namespace

TEST_CASE("encode_text basics") {
    DenoiserParams base = test_base();
    PromptTokens p({1, 9, 20});
    Tensor a = encode_text(base, p);
    Tensor b = encode_text(base, p);
    CHECK(bitwise_equal(a, b));
    CHECK(a.shape() == Shape{3, kEmbedDim});

    // single-token difference changes exactly that row
    Tensor c = encode_text(base, PromptTokens({1, 9, 21}));
    for (int j = 0; j < kEmbedDim; ++j) {
        CHECK(a.data()[0 * kEmbedDim + j] == c.data()[0 * kEmbedDim + j]);
        CHECK(a.data()[1 * kEmbedDim + j] == c.data()[1 * kEmbedDim + j]);
    }
    bool row2_differs = false;
    for (int j = 0; j < kEmbedDim; ++j)
        if (a.data()[2 * kEmbedDim + j] != c.data()[2 * kEmbedDim + j]) row2_differs = true;
    CHECK(row2_differs);

    CHECK_THROWS_AS(encode_text(base, PromptTokens({32})), InvalidTokenError);
    CHECK_THROWS_AS(PromptTokens(std::vector<int>{}), InvalidTokenError);
}

TEST_CASE("encode_image is a validating identity") {
    Rng rng(3);
    Tensor ok = clamp_image(Tensor::randn({1, 16, 16}, rng));
    Tensor out = encode_image(ok);
    CHECK(bitwise_equal(ok, out));
    CHECK(bitwise_equal(decode_image(encode_image(ok)), ok));

    Tensor bad = ok.clone();
    bad.data()[5] = 1.5;
    CHECK_THROWS_AS(encode_image(bad), InvalidImageError);
}

TEST_CASE("add_noise matches the affine form") {
    NoiseSchedule s = make_schedule(2, 0.1, 0.2);
    Rng rng(4);
    Tensor z0 = clamp_image(Tensor::randn({1, 16, 16}, rng));
    Tensor eps = Tensor::randn({1, 16, 16}, rng);

    SUBCASE("hand-computed coefficients at t=2") {
        Tensor zt = add_noise(z0, 2, eps, s);
        const double ca = std::sqrt(0.72), cb = std::sqrt(0.28);
        CHECK(ca == doctest::Approx(0.848528137423857).epsilon(1e-15));
        CHECK(cb == doctest::Approx(0.5291502622129181).epsilon(1e-15));
        for (int i = 0; i < 256; ++i)
            CHECK(zt.data()[i] == doctest::Approx(ca * z0.data()[i] + cb * eps.data()[i]).epsilon(1e-12));
    }

    SUBCASE("zero image leaves only scaled noise") {
        Tensor zt = add_noise(Tensor::zeros({1, 16, 16}), 2, eps, s);
        for (int i = 0; i < 256; ++i)
            CHECK(zt.data()[i] == doctest::Approx(std::sqrt(0.28) * eps.data()[i]).epsilon(1e-12));
    }

    SUBCASE("tiny beta keeps z_t near z0") {
        // beta = 1e-8 scales the noise by 1e-4, so the mean deviation sits at
        // the 1e-4 level and every pixel stays within a few multiples of it.
        NoiseSchedule tiny = make_schedule(1, 1e-8, 1e-8);
        Tensor zt = add_noise(z0, 1, eps, tiny);
        double mean_dev = 0.0;
        for (int i = 0; i < 256; ++i) {
            const double dev = std::abs(zt.data()[i] - z0.data()[i]);
            mean_dev += dev;
            CHECK(dev < 5e-4);
        }
        CHECK(mean_dev / 256.0 < 1e-4);
    }

    SUBCASE("step bounds") {
        CHECK_THROWS_AS(add_noise(z0, 0, eps, s), InvalidStepError);
        CHECK_THROWS_AS(add_noise(z0, 3, eps, s), InvalidStepError);
    }
}

TEST_CASE("forward-noising statistics match the affine form moments") {
    NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
    Rng z0_rng(5);
    Tensor z0 = clamp_image(Tensor::randn({1, 16, 16}, z0_rng));
    const int draws = 2000;
    for (int t : {1, 50, 100}) {
        const double abar = s.alpha_bar(t);
        Rng rng(100 + t);
        // track a single pixel over many draws
        double sum = 0.0, sumsq = 0.0;
        const int px = 37;
        for (int d = 0; d < draws; ++d) {
            Tensor eps = Tensor::randn({1, 16, 16}, rng);
            Tensor zt = add_noise(z0, t, eps, s);
            sum += zt.data()[px];
            sumsq += zt.data()[px] * zt.data()[px];
        }
        const double mean = sum / draws;
        const double var = sumsq / draws - mean * mean;
        const double expect_mean = std::sqrt(abar) * z0.data()[px];
        const double expect_var = 1.0 - abar;
        const double se_mean = std::sqrt(expect_var / draws);
        const double se_var = expect_var * std::sqrt(2.0 / (draws - 1));
        CHECK(std::abs(mean - expect_mean) <= 3.0 * se_mean);
        CHECK(std::abs(var - expect_var) <= 3.0 * se_var);
    }
}

TEST_CASE("predict_noise injection contract") {
    DenoiserParams base = test_base();
    Rng rng(6);
    Tensor zt = Tensor::randn({1, 16, 16}, rng);
    Tensor cp = encode_text(base, PromptTokens({3, 8, 17}));

    Tensor plain = predict_noise(base, zt, 10, cp);
    CHECK(plain.shape() == Shape{1, 16, 16});

    Injections zero;
    zero.mid = Tensor::zeros({32, 4, 4});
    zero.skip_e2 = Tensor::zeros({32, 4, 4});
    zero.skip_e1 = Tensor::zeros({16, 8, 8});
    Tensor with_zero = predict_noise(base, zt, 10, cp, &zero);
    CHECK(bitwise_equal(plain, with_zero));

    Tensor again = predict_noise(base, zt, 10, cp);
    CHECK(bitwise_equal(plain, again));

    Injections bad = zero;
    bad.skip_e1 = Tensor::zeros({16, 4, 4});
    CHECK_THROWS_AS(predict_noise(base, zt, 10, cp, &bad), InvalidInjectionError);
}

TEST_CASE("gradients flow through the full denoiser") {
    DenoiserParams base = test_base(7);
    base.set_trainable(true);
    NoiseSchedule s = make_schedule(10, 1e-3, 0.05);
    Rng rng(8);
    Tensor z0 = clamp_image(Tensor::randn({1, 16, 16}, rng));
    Tensor eps = Tensor::randn({1, 16, 16}, rng);
    PromptTokens prompt({1, 9, 18});

    auto f = [&]() {
        Tensor zt = add_noise(z0, 5, eps, s);
        Tensor cp = encode_text(base, prompt);
        return ops::mse(eps, predict_noise(base, zt, 5, cp));
    };
    std::vector<Tensor*> params = base.tensors();
    Rng check_rng(9);
    const double err = grad_check(f, params, 1e-5, 2, check_rng);
    base.set_trainable(false);
    CHECK(err < 1e-4);
}

TEST_CASE("sampling is deterministic and in range") {
    DenoiserParams base = test_base();
    NoiseSchedule s = make_schedule(8, 1e-3, 0.05);
    PromptTokens prompt({5, 8, 19});
    Sampler sampler(base, s);

    Tensor a = sampler.sample_seeded(prompt, 42);
    Tensor b = sampler.sample_seeded(prompt, 42);
    CHECK(bitwise_equal(a, b));
    for (int i = 0; i < 256; ++i) {
        CHECK(a.data()[i] >= -1.0);
        CHECK(a.data()[i] <= 1.0);
    }

    NoiseSchedule one = make_schedule(1, 0.01, 0.01);
    Sampler s1(base, one);
    Tensor c = s1.sample_seeded(prompt, 7);
    CHECK(c.all_finite());
}

TEST_CASE("train_base learns a single pair and zero lr is a no-op") {
    NoiseSchedule s = make_schedule(10, 1e-3, 0.05);
    std::vector<DatasetPair> corpus;
    Rng rng(10);
    DatasetPair rec;
    rec.prompt = PromptTokens({1, 9, 16});
    rec.image = render(rec.prompt, rng);
    rec.condition = concept_by_name("blob")->condition;
    rec.is_benign = false;
    corpus.push_back(rec);

    SUBCASE("loss decreases over 200 steps") {
        DenoiserParams base = test_base(11);
        TrainBaseConfig cfg;
        cfg.max_steps = 200;
        cfg.batch_size = 2;
        cfg.adam.lr = 2e-3;
        cfg.eval_every = 0;
        Rng train_rng(12);
        TrainLog log = train_base(base, corpus, s, cfg, train_rng);
        CHECK(log.last_heldout < log.first_heldout);
        for (const auto& pt : log.points) CHECK(pt.loss >= 0.0);
    }

    SUBCASE("zero learning rate leaves parameters unchanged") {
        DenoiserParams base = test_base(11);
        const uint64_t before = hash_tensors(base.tensors());
        TrainBaseConfig cfg;
        cfg.max_steps = 5;
        cfg.batch_size = 2;
        cfg.adam.lr = 0.0;
        Rng train_rng(12);
        train_base(base, corpus, s, cfg, train_rng);
        CHECK(hash_tensors(base.tensors()) == before);
    }

    SUBCASE("empty corpus is rejected") {
        DenoiserParams base = test_base(11);
        TrainBaseConfig cfg;
        Rng train_rng(12);
        std::vector<DatasetPair> empty;
        CHECK_THROWS_AS(train_base(base, empty, s, cfg, train_rng), InvalidConfigError);
    }
}

TEST_SUITE_END();
